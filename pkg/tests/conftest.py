"""Shared fixtures: hand-built splits, synthetic data, and plain test scorers."""

import numpy as np
import pytest

from ganc.dataset import Rating, SplitDataset, compute_item_stats, split_per_user
from ganc.preference import PreferenceVector
from ganc.synthetic import generate_ratings


def build_split(train_pairs, test_pairs=()):
    """Split from (user, item, rating) triples, bypassing the random splitter."""
    train = [Rating(u, i, float(r)) for u, i, r in train_pairs]
    test = [Rating(u, i, float(r)) for u, i, r in test_pairs]
    return SplitDataset.from_ratings(train, test)


class DictAccuracy:
    """Accuracy scorer backed by a raw (user, item) -> score dict."""

    kind = "dict"

    def __init__(self, scores, split):
        self.scores = scores
        self.split = split

    def score(self, user, item):
        return float(self.scores.get((user, item), 0.0))

    def score_vector(self, user):
        return np.array([self.scores.get((user, i), 0.0) for i in self.split.items])


class DictCoverage:
    """Static coverage scorer backed by an item -> score dict."""

    kind = "dict"

    def __init__(self, scores, split):
        self.scores = scores
        self.split = split

    def score(self, item):
        return float(self.scores.get(item, 0.0))

    def score_vector(self):
        return np.array([self.scores.get(i, 0.0) for i in self.split.items])


def random_instance(rng, n_users=3, n_items=6, train_per_user=(0, 2)):
    """Small random instance: split with random train sets, theta and accuracy.

    Every user also gets one test rating so the split retains all items.
    """
    users = list(range(1, n_users + 1))
    items = list(range(101, 101 + n_items))
    train = []
    for u in users:
        k = int(rng.integers(train_per_user[0], train_per_user[1] + 1))
        seen = rng.choice(items, size=k, replace=False) if k else []
        for i in seen:
            train.append((u, int(i), float(rng.integers(1, 6))))
    # anchor ratings keep every user and item in the train universe
    for k, i in enumerate(items):
        train.append((users[k % n_users], i, float(rng.integers(1, 6))))
    dedup = {}
    for u, i, r in train:
        dedup[(u, i)] = (u, i, r)
    split = build_split(list(dedup.values()))
    theta = PreferenceVector(
        "random", {u: float(rng.random()) for u in split.users})
    arec = DictAccuracy(
        {(u, i): float(rng.random()) for u in split.users for i in split.items},
        split)
    return split, theta, arec


@pytest.fixture(scope="session")
def synth_ratings():
    return generate_ratings(n_users=150, n_items=300, seed=11)


@pytest.fixture(scope="session")
def synth_split(synth_ratings):
    return split_per_user(synth_ratings, kappa=0.5, tau=20, seed=5)


@pytest.fixture(scope="session")
def synth_stats(synth_split):
    return compute_item_stats(synth_split)
