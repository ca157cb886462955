"""Accuracy and coverage scorers.

Accuracy side: a most-popular scorer, an SGD-trained matrix factorization
model, and an importer for externally computed score files. Coverage side:
random, static popularity-based, and dynamic frequency-based scorers. Every
scorer emits values in [0, 1] and exposes both a scalar lookup and a vector
aligned with the split's item universe.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .dataset import SplitDataset, ItemStats
from .errors import ParseError, TrainingDivergenceError, UnknownIdError
from .io_utils import canonical_ids, read_json, write_json


class PopScorer:
    """Binary accuracy scores: 1 for a user's top-n most popular unseen items."""

    def __init__(self, split: SplitDataset, stats: ItemStats, n: int):
        if not 0 < n <= len(split.items):
            raise ValueError(f"n must be in [1, {len(split.items)}], got {n}")
        self.split = split
        self.n = n
        self.kind = f"pop[{n}]"
        self._ranking = stats.ranking
        self._top: dict = {}

    def top_items(self, user) -> frozenset:
        cached = self._top.get(user)
        if cached is None:
            seen = self.split.per_user_train_index[user]
            picked = []
            for item in self._ranking:
                if item not in seen:
                    picked.append(item)
                    if len(picked) == self.n:
                        break
            cached = self._top[user] = frozenset(picked)
        return cached

    def score(self, user, item) -> float:
        return 1.0 if item in self.top_items(user) else 0.0

    def score_vector(self, user) -> np.ndarray:
        out = np.zeros(len(self.split.items))
        idx = self.split.item_index
        for item in self.top_items(user):
            out[idx[item]] = 1.0
        return out


@dataclass(frozen=True)
class MFModel:
    """Latent factors from SGD matrix factorization, plus training metadata."""

    users: tuple
    items: tuple
    user_factors: np.ndarray  # shape (n_users, g)
    item_factors: np.ndarray  # shape (n_items, g)
    g: int
    global_mean: float

    @cached_property
    def user_index(self) -> dict:
        return {u: k for k, u in enumerate(self.users)}

    @cached_property
    def item_index(self) -> dict:
        return {i: k for k, i in enumerate(self.items)}

    def predict_raw(self, user, item) -> float:
        try:
            u = self.user_index[user]
            i = self.item_index[item]
        except KeyError:
            raise UnknownIdError(f"({user!r}, {item!r}) not in model") from None
        return float(self.user_factors[u] @ self.item_factors[i])


def rsvd_train(split: SplitDataset, g: int, lam: float, eta: float,
               epochs: int, seed: int) -> MFModel:
    """SGD on the squared-error loss with L2 regularization.

    Per rating update: e = r - p.q; p += eta*(e*q - lam*p); q += eta*(e*p - lam*q),
    with q's step using the pre-update p. Factors start iid uniform in
    [-0.05, 0.05]. Raises on non-finite factors, reporting the epoch.
    """
    if not split.train:
        raise ValueError("cannot train on an empty split")
    rng = np.random.default_rng(seed)
    n_users, n_items = len(split.users), len(split.items)
    P = rng.uniform(-0.05, 0.05, size=(n_users, g))
    Q = rng.uniform(-0.05, 0.05, size=(n_items, g))
    uidx = np.fromiter((split.user_index[r.user_id] for r in split.train),
                       dtype=np.int64, count=len(split.train))
    iidx = np.fromiter((split.item_index[r.item_id] for r in split.train),
                       dtype=np.int64, count=len(split.train))
    vals = np.fromiter((r.value for r in split.train), dtype=float,
                       count=len(split.train))
    with np.errstate(over="ignore", invalid="ignore"):  # divergence is detected below
        for epoch in range(epochs):
            order = rng.permutation(len(vals))
            for k in order:
                u, i = uidx[k], iidx[k]
                pu = P[u].copy()
                qi = Q[i]
                e = vals[k] - pu @ qi
                P[u] += eta * (e * qi - lam * pu)
                Q[i] += eta * (e * pu - lam * qi)
            if not (np.isfinite(P).all() and np.isfinite(Q).all()):
                raise TrainingDivergenceError(f"non-finite factors at epoch {epoch + 1}")
    return MFModel(split.users, split.items, P, Q, g, float(vals.mean()))


def rmse(model: MFModel, ratings) -> float:
    """Root mean squared error of raw predictions over a rating list.

    Pairs with a user or item unknown to the model predict the global train
    mean.
    """
    if not ratings:
        raise ValueError("rmse over an empty rating list")
    total = 0.0
    for r in ratings:
        try:
            pred = model.predict_raw(r.user_id, r.item_id)
        except UnknownIdError:
            pred = model.global_mean
        total += (r.value - pred) ** 2
    return math.sqrt(total / len(ratings))


class MFScorer:
    """Per-user min-max normalized raw predictions over unseen train items."""

    def __init__(self, model: MFModel, split: SplitDataset):
        self.split = split
        self.kind = "rsvd"
        for u in split.users:
            if u not in model.user_index:
                raise UnknownIdError(f"user {u!r} not in model")
        for i in split.items:
            if i not in model.item_index:
                raise UnknownIdError(f"item {i!r} not in model")
        urows = np.array([model.user_index[u] for u in split.users])
        irows = np.array([model.item_index[i] for i in split.items])
        raw = model.user_factors[urows] @ model.item_factors[irows].T
        self._scores = np.zeros_like(raw)
        for k, user in enumerate(split.users):
            cand = split.candidate_indices(user)
            row = raw[k, cand]
            lo, hi = row.min(), row.max()
            if hi > lo:
                self._scores[k, cand] = (row - lo) / (hi - lo)

    def score(self, user, item) -> float:
        try:
            u = self.split.user_index[user]
            i = self.split.item_index[item]
        except KeyError:
            raise UnknownIdError(f"({user!r}, {item!r}) not in split") from None
        return float(self._scores[u, i])

    def score_vector(self, user) -> np.ndarray:
        return self._scores[self.split.user_index[user]]


class ExternalScorer:
    """Accuracy scores imported from a per-pair table, normalized per user.

    Pairs absent from the table score 0; rows for users or items outside the
    split universe are ignored.
    """

    def __init__(self, scores: dict, split: SplitDataset):
        self.split = split
        self.kind = "external"
        self._scores = np.zeros((len(split.users), len(split.items)))
        per_user: dict = {}
        for (user, item), value in scores.items():
            if user in split.user_index and item in split.item_index:
                per_user.setdefault(user, []).append((item, value))
        for user, pairs in per_user.items():
            vals = np.array([v for _, v in pairs], dtype=float)
            lo, hi = vals.min(), vals.max()
            norm = (vals - lo) / (hi - lo) if hi > lo else np.zeros_like(vals)
            u = split.user_index[user]
            for (item, _), nv in zip(pairs, norm):
                self._scores[u, split.item_index[item]] = nv

    def score(self, user, item) -> float:
        try:
            u = self.split.user_index[user]
            i = self.split.item_index[item]
        except KeyError:
            raise UnknownIdError(f"({user!r}, {item!r}) not in split") from None
        return float(self._scores[u, i])

    def score_vector(self, user) -> np.ndarray:
        return self._scores[self.split.user_index[user]]


def load_external_scores(path, split: SplitDataset) -> ExternalScorer:
    """Read a ``user,item,score`` CSV into an accuracy scorer."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:3]] != ["user", "item", "score"]:
            raise ParseError(f"{path}:1: expected header user,item,score")
        for line_no, fields in enumerate(reader, start=2):
            if not fields or (len(fields) == 1 and not fields[0].strip()):
                continue
            if len(fields) != 3:
                raise ParseError(f"{path}:{line_no}: expected 3 fields")
            try:
                rows.append((fields[0].strip(), fields[1].strip(), float(fields[2])))
            except ValueError:
                raise ParseError(f"{path}:{line_no}: bad score {fields[2]!r}") from None
    users = canonical_ids([r[0] for r in rows])
    items = canonical_ids([r[1] for r in rows])
    scores: dict = {}
    for u, i, (_, _, v) in zip(users, items, rows):
        scores[(u, i)] = v  # duplicate pairs keep the last occurrence
    return ExternalScorer(scores, split)


class StatCoverage:
    """Constant coverage scores 1/sqrt(train popularity + 1)."""

    def __init__(self, stats: ItemStats, split: SplitDataset):
        self.split = split
        self.kind = "stat"
        pops = np.array([stats.popularity[i] for i in split.items], dtype=float)
        self._scores = 1.0 / np.sqrt(pops + 1.0)

    def score(self, item) -> float:
        return float(self._scores[self.split.item_index[item]])

    def score_vector(self) -> np.ndarray:
        return self._scores


class DynCoverage:
    """Coverage scores 1/sqrt(f + 1) over live recommendation frequencies.

    Reads the frequency state at call time; holding a reference to a frozen
    copy yields a static snapshot scorer.
    """

    def __init__(self, freq):
        self.freq = freq
        self.kind = "dyn"

    def score(self, item) -> float:
        return 1.0 / math.sqrt(self.freq.count(item) + 1.0)

    def score_vector(self) -> np.ndarray:
        return 1.0 / np.sqrt(self.freq.counts + 1.0)


class RandCoverage:
    """Uniform [0, 1) coverage scores, drawn once per item and stable in a run."""

    def __init__(self, seed: int, split: SplitDataset):
        self.split = split
        self.kind = "rand"
        rng = np.random.default_rng(seed)
        self._scores = rng.random(len(split.items))

    def score(self, item) -> float:
        return float(self._scores[self.split.item_index[item]])

    def score_vector(self) -> np.ndarray:
        return self._scores


def pop_scorer(split: SplitDataset, stats: ItemStats, n: int) -> PopScorer:
    return PopScorer(split, stats, n)


def mf_accuracy_scorer(model: MFModel, split: SplitDataset) -> MFScorer:
    return MFScorer(model, split)


def stat_coverage(stats: ItemStats, split: SplitDataset) -> StatCoverage:
    return StatCoverage(stats, split)


def dyn_coverage(freq) -> DynCoverage:
    return DynCoverage(freq)


def rand_coverage(seed: int, split: SplitDataset) -> RandCoverage:
    return RandCoverage(seed, split)


def save_mf_model(model: MFModel, directory, manifest: dict | None = None) -> None:
    """Persist factors as an npz dump plus a JSON manifest."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    np.savez_compressed(
        d / "mf_model.npz",
        users=np.array([str(u) for u in model.users]),
        items=np.array([str(i) for i in model.items]),
        P=model.user_factors,
        Q=model.item_factors,
        global_mean=np.array([model.global_mean]),
    )
    payload = dict(manifest or {})
    payload.update(g=model.g)
    write_json(d / "mf.json", payload)


def load_mf_model(directory) -> tuple[MFModel, dict]:
    d = Path(directory)
    data = np.load(d / "mf_model.npz", allow_pickle=False)
    manifest = read_json(d / "mf.json")
    users = tuple(canonical_ids(list(data["users"])))
    items = tuple(canonical_ids(list(data["items"])))
    model = MFModel(users, items, data["P"], data["Q"],
                    int(data["P"].shape[1]), float(data["global_mean"][0]))
    return model, manifest
