"""Per-user long-tail novelty preference models.

Four estimators produce a scalar theta in [0, 1] per user: rated-item count
(activity), long-tail share of rated items, a tf-idf style average of
per-pair values, and a generalized weighted average learned by alternating
minimax updates over per-item importance weights.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import ItemStats, SplitDataset, min_max_normalize
from .errors import NumericalDegeneracyError
from .io_utils import read_json, write_json

MODELS = ("activity", "normalized_longtail", "tfidf", "generalized", "constant", "random")


@dataclass(frozen=True)
class PerUserItemPreference:
    """Per observed train pair (user, item) -> preference value in [0, 1]."""

    values: dict


@dataclass(frozen=True)
class PreferenceVector:
    model: str
    theta: dict
    weights: dict | None = None
    iterations: int | None = None
    converged: bool | None = None


def _pair_arrays(split: SplitDataset):
    """Train triples as aligned index arrays (user idx, item idx, rating)."""
    uidx = np.fromiter((split.user_index[r.user_id] for r in split.train),
                       dtype=np.int64, count=len(split.train))
    iidx = np.fromiter((split.item_index[r.item_id] for r in split.train),
                       dtype=np.int64, count=len(split.train))
    vals = np.fromiter((r.value for r in split.train), dtype=float, count=len(split.train))
    return uidx, iidx, vals


def _raw_theta_ui(split: SplitDataset) -> np.ndarray:
    """Unprojected per-pair values r_ui * ln(|U| / |U_i|), aligned with split.train."""
    _, iidx, vals = _pair_arrays(split)
    n_users = len(split.users)
    raters = np.array([len(split.per_item_train_index[i]) for i in split.items], dtype=float)
    return vals * np.log(n_users / raters[iidx])


def compute_theta_ui(split: SplitDataset) -> PerUserItemPreference:
    """Per-pair preference values, min-max projected jointly onto [0, 1]."""
    projected = min_max_normalize(_raw_theta_ui(split))
    values = {(r.user_id, r.item_id): float(t) for r, t in zip(split.train, projected)}
    return PerUserItemPreference(values)


def _weighted_user_means(split, theta_ui: np.ndarray, w_item: np.ndarray) -> np.ndarray:
    """Per-user weighted average of pair values with per-item weights."""
    uidx, iidx, _ = _pair_arrays(split)
    wi = w_item[iidx]
    num = np.bincount(uidx, weights=wi * theta_ui, minlength=len(split.users))
    den = np.bincount(uidx, weights=wi, minlength=len(split.users))
    return num / den


def theta_activity(split: SplitDataset) -> PreferenceVector:
    """Rated-item counts, min-max normalized across users."""
    counts = [len(split.per_user_train_index[u]) for u in split.users]
    norm = min_max_normalize(counts)
    return PreferenceVector("activity", dict(zip(split.users, map(float, norm))))


def theta_normalized_longtail(split: SplitDataset, stats: ItemStats) -> PreferenceVector:
    """Fraction of each user's rated items that fall in the long tail."""
    lt = stats.long_tail
    theta = {
        u: len(split.per_user_train_index[u] & lt) / len(split.per_user_train_index[u])
        for u in split.users
    }
    return PreferenceVector("normalized_longtail", theta)


def theta_tfidf(split: SplitDataset) -> PreferenceVector:
    """Plain per-user average of the projected per-pair values."""
    projected = min_max_normalize(_raw_theta_ui(split))
    means = _weighted_user_means(split, projected, np.ones(len(split.items)))
    return PreferenceVector("tfidf", dict(zip(split.users, map(float, means))))


def theta_generalized(split: SplitDataset, lambda1: float = 1.0,
                      tol: float = 1e-6, max_iters: int = 100,
                      theta_ui: PerUserItemPreference | None = None) -> PreferenceVector:
    """Alternating minimax estimate of user preferences and item weights.

    Starting from unit weights, each sweep recomputes item weights
    w_i = lambda1 / eps_i from the item mediocrity coefficient
    eps_i = sum over raters of 1 - (theta_ui - theta_u)^2, then refreshes
    every theta_u as the w-weighted average of its pair values. Stops when
    the largest per-user change drops below ``tol``. With ``max_iters=0``
    the result equals :func:`theta_tfidf` and weights stay at one.

    ``theta_ui`` overrides the internally computed pair values; entries must
    already lie in [0, 1] or the mediocrity coefficient can degenerate.
    """
    if lambda1 <= 0:
        raise ValueError(f"lambda1 must be positive, got {lambda1}")
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if max_iters < 0:
        raise ValueError(f"max_iters must be >= 0, got {max_iters}")
    uidx, iidx, _ = _pair_arrays(split)
    n_users, n_items = len(split.users), len(split.items)
    if theta_ui is None:
        t_ui = min_max_normalize(_raw_theta_ui(split))
    else:
        t_ui = np.array([theta_ui.values[(r.user_id, r.item_id)] for r in split.train])

    def user_means(w_item):
        wi = w_item[iidx]
        num = np.bincount(uidx, weights=wi * t_ui, minlength=n_users)
        den = np.bincount(uidx, weights=wi, minlength=n_users)
        return num / den

    w = np.ones(n_items)
    theta = user_means(w)
    iterations = 0
    converged = False
    for k in range(1, max_iters + 1):
        sq_dev = (t_ui - theta[uidx]) ** 2
        eps = np.bincount(iidx, weights=1.0 - sq_dev, minlength=n_items)
        if np.any(eps <= 0):
            bad = split.items[int(np.argmax(eps <= 0))]
            raise NumericalDegeneracyError(
                f"item {bad!r}: mediocrity coefficient is not positive")
        w = lambda1 / eps
        new_theta = user_means(w)
        delta = float(np.max(np.abs(new_theta - theta)))
        theta = new_theta
        iterations = k
        if delta < tol:
            converged = True
            break
    theta = np.clip(theta, 0.0, 1.0)
    return PreferenceVector(
        "generalized",
        dict(zip(split.users, map(float, theta))),
        weights=dict(zip(split.items, map(float, w))),
        iterations=iterations,
        converged=converged,
    )


def theta_baseline(users, kind: str, c: float = 0.5, seed: int = 0) -> PreferenceVector:
    """Constant or seeded-uniform-random preference vector over ``users``."""
    ordered = sorted(users)
    if kind == "constant":
        if not 0 <= c <= 1:
            raise ValueError(f"constant must be in [0, 1], got {c}")
        return PreferenceVector("constant", {u: float(c) for u in ordered})
    if kind == "random":
        rng = np.random.default_rng(seed)
        draws = rng.random(len(ordered))
        return PreferenceVector("random", dict(zip(ordered, map(float, draws))))
    raise ValueError(f"unknown baseline kind {kind!r}")


def save_prefs(pv: PreferenceVector, directory, manifest: dict | None = None) -> None:
    """Persist theta.csv (plus weights.csv for the generalized model) and a manifest."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "theta.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["user", "theta"])
        for u in sorted(pv.theta):
            w.writerow([u, repr(pv.theta[u])])
    if pv.weights is not None:
        with open(d / "weights.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["item", "weight"])
            for i in sorted(pv.weights):
                w.writerow([i, repr(pv.weights[i])])
    payload = dict(manifest or {})
    payload.update(model=pv.model, iterations=pv.iterations, converged=pv.converged)
    write_json(d / "prefs.json", payload)


def load_prefs(directory) -> tuple[PreferenceVector, dict]:
    d = Path(directory)
    manifest = read_json(d / "prefs.json")
    theta = {}
    with open(d / "theta.csv", newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for user, value in reader:
            theta[_maybe_int(user)] = float(value)
    weights = None
    if (d / "weights.csv").exists():
        weights = {}
        with open(d / "weights.csv", newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            for item, value in reader:
                weights[_maybe_int(item)] = float(value)
    return PreferenceVector(
        manifest["model"], theta, weights,
        manifest.get("iterations"), manifest.get("converged"),
    ), manifest


def _maybe_int(s: str):
    try:
        return int(s)
    except ValueError:
        return s
