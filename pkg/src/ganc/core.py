"""Greedy top-N assignment under blended accuracy/coverage value functions.

The value of a set for a user is (1-theta)*sum(a) + theta*sum(c). With the
dynamic coverage scorer the assignment couples users, so collections are
built by a locally greedy pass over users; the sampling variant runs the
sequential pass over a KDE-drawn subset sorted by rising theta, snapshots
the frequency state per sampled user, and finishes the remaining users in
parallel against their nearest snapshot. Exhaustive and property-style
oracles for the greedy guarantees live here too.
"""

from __future__ import annotations

import csv
import itertools
import math
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import SplitDataset
from .errors import ContractViolationError, InfeasibleError, InstanceTooLargeError
from .io_utils import canonical_ids
from .preference import PreferenceVector
from .recommenders import DynCoverage

PROTOCOLS = ("all_unrated", "rated_test_items")


class RecFrequency:
    """Mutable per-item counts of recommendations assigned so far."""

    def __init__(self, split: SplitDataset, counts: np.ndarray | None = None):
        self.split = split
        self.counts = np.zeros(len(split.items), dtype=np.int64) if counts is None else counts

    def count(self, item) -> int:
        return int(self.counts[self.split.item_index[item]])

    def increment(self, item_ids) -> None:
        idx = self.split.item_index
        for i in item_ids:
            self.counts[idx[i]] += 1

    def copy(self) -> "RecFrequency":
        return RecFrequency(self.split, self.counts.copy())

    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class TopNCollection:
    """Ordered list of exactly n recommended items per user."""

    n: int
    lists: dict

    def validate(self, split: SplitDataset) -> None:
        universe = set(split.items)
        for user, items in self.lists.items():
            if len(items) != self.n or len(set(items)) != self.n:
                raise ContractViolationError(f"user {user!r}: list is not {self.n} distinct items")
            seen = split.per_user_train_index.get(user)
            if seen is None:
                raise ContractViolationError(f"user {user!r} not in split")
            for i in items:
                if i not in universe:
                    raise ContractViolationError(f"user {user!r}: item {i!r} outside train universe")
                if i in seen:
                    raise ContractViolationError(f"user {user!r}: item {i!r} already rated in train")

    def truncated(self, n: int) -> "TopNCollection":
        if n > self.n:
            raise ValueError(f"cannot truncate to {n} > {self.n}")
        if n == self.n:
            return self
        return TopNCollection(n, {u: items[:n] for u, items in self.lists.items()})


class SnapshotStore:
    """Frequency snapshots keyed by the sampled user's theta, in rising order."""

    def __init__(self):
        self._thetas: list = []
        self._freqs: list = []

    def add(self, theta: float, freq: RecFrequency) -> None:
        self._thetas.append(theta)
        self._freqs.append(freq)

    def __len__(self) -> int:
        return len(self._thetas)

    def nearest(self, theta: float) -> RecFrequency:
        """Snapshot whose theta is closest; equidistant picks the lower theta."""
        gaps = np.abs(np.asarray(self._thetas) - theta)
        return self._freqs[int(np.argmin(gaps))]


def user_value(split: SplitDataset, user, items, theta: float, arec, crec) -> float:
    """Blended value (1-theta)*sum(a) + theta*sum(c) of an item set for a user."""
    seen = split.per_user_train_index[user]
    overlap = [i for i in items if i in seen]
    if overlap:
        raise ContractViolationError(f"user {user!r}: items {overlap!r} already rated in train")
    a_sum = sum(arec.score(user, i) for i in items)
    c_sum = sum(crec.score(i) for i in items)
    return (1.0 - theta) * a_sum + theta * c_sum


def _greedy_idx(split, user, theta, arec, crec, n, cand_idx) -> list:
    """n greedy steps over candidate universe indices; returns picked indices.

    Candidate indices must be ascending so argmax tie-breaks resolve to the
    lowest item id.
    """
    if len(cand_idx) < n:
        raise InfeasibleError(
            f"user {user!r}: {len(cand_idx)} candidates for top-{n}")
    acc = (1.0 - theta) * arec.score_vector(user)[cand_idx]
    avail = np.ones(len(cand_idx), dtype=bool)
    picked = []
    for _ in range(n):
        gains = acc + theta * crec.score_vector()[cand_idx]
        gains[~avail] = -np.inf
        k = int(np.argmax(gains))
        picked.append(int(cand_idx[k]))
        avail[k] = False
    return picked


def greedy_topn_user(split: SplitDataset, user, theta: float, arec, crec,
                     n: int, candidates=None) -> tuple:
    """Build one user's top-n by repeated maximal-marginal-gain selection.

    ``candidates`` restricts the pool to explicit item ids (they must be
    unseen by the user); by default every unseen train item is eligible.
    """
    if candidates is None:
        cand_idx = split.candidate_indices(user)
    else:
        seen = split.per_user_train_index[user]
        bad = [i for i in candidates if i in seen]
        if bad:
            raise ContractViolationError(f"user {user!r}: candidates {bad!r} already rated")
        cand_idx = np.array(sorted(split.item_index[i] for i in candidates), dtype=np.int64)
    picked = _greedy_idx(split, user, theta, arec, crec, n, cand_idx)
    return tuple(split.items[k] for k in picked)


def _eligible(split: SplitDataset, n: int, protocol: str):
    """(users, candidate-index map) for a ranking protocol.

    all_unrated ranks every unseen train item; rated_test_items ranks only a
    user's own test items and drops users with fewer than n of them.
    """
    if protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}")
    if protocol == "all_unrated":
        return list(split.users), {u: split.candidate_indices(u) for u in split.users}
    users = []
    cands = {}
    for u in split.users:
        test_items = split.per_user_test_index[u]
        if len(test_items) >= n:
            users.append(u)
            cands[u] = np.array(sorted(split.item_index[i] for i in test_items),
                                dtype=np.int64)
    return users, cands


def _ids(split, picked_idx) -> tuple:
    return tuple(split.items[k] for k in picked_idx)


def locally_greedy_full(split: SplitDataset, theta: PreferenceVector, arec,
                        n: int, user_order: str = "arbitrary",
                        protocol: str = "all_unrated") -> TopNCollection:
    """Fully sequential greedy baseline over all users with dynamic coverage.

    Visits users one at a time (input order, or rising theta), builds each
    top-n greedily against the live frequency state, then counts the
    assignment into the state.
    """
    users, cands = _eligible(split, n, protocol)
    if user_order == "increasing_theta":
        users = sorted(users, key=lambda u: (theta.theta[u], u))
    elif user_order != "arbitrary":
        raise ValueError(f"unknown user_order {user_order!r}")
    freq = RecFrequency(split)
    dyn = DynCoverage(freq)
    lists = {}
    for u in users:
        picked = _ids(split, _greedy_idx(split, u, theta.theta[u], arec, dyn, n, cands[u]))
        freq.increment(picked)
        lists[u] = picked
    return TopNCollection(n, lists)


def kde_sample(theta: PreferenceVector, s: int, seed: int, users=None) -> list:
    """Draw s distinct users from a Gaussian KDE over the theta values.

    Bandwidth is Silverman's 1.06 * std * n^(-1/5), floored at 1e-3. Each
    draw maps to the closest not-yet-selected user by |theta_u - draw|.
    Returns the sample sorted by non-decreasing theta.
    """
    pool = sorted(theta.theta if users is None else users,
                  key=lambda u: (theta.theta[u], u))
    n = len(pool)
    if not 0 < s <= n:
        raise ValueError(f"sample size must be in [1, {n}], got {s}")
    th = np.array([theta.theta[u] for u in pool])
    sd = float(np.std(th, ddof=1)) if n > 1 else 0.0
    h = max(1.06 * sd * n ** (-0.2), 1e-3)
    rng = np.random.default_rng(seed)
    taken = np.zeros(n, dtype=bool)
    gaps = np.empty(n)
    for _ in range(s):
        draw = th[int(rng.integers(n))] + h * float(rng.standard_normal())
        np.abs(th - draw, out=gaps)
        gaps[taken] = np.inf
        taken[int(np.argmin(gaps))] = True
    return [pool[k] for k in np.flatnonzero(taken)]


@dataclass(frozen=True)
class OslgRun:
    """An OSLG result: the collection plus sample and per-phase wall clock."""

    collection: TopNCollection
    sampled_users: tuple
    phase_seconds: dict


def oslg(split: SplitDataset, theta: PreferenceVector, arec, n: int, s: int,
         seed: int, workers: int = 1, protocol: str = "all_unrated",
         phase4_order=None) -> OslgRun:
    """Ordered sampling-based locally greedy assignment with dynamic coverage.

    Phase one runs the sequential greedy over a KDE sample sorted by rising
    theta, storing a full frequency snapshot after each sampled user. Phase
    two assigns every remaining user independently against the snapshot
    whose theta is nearest, so its outcome does not depend on execution
    order or worker count (``phase4_order`` exists to exercise exactly that
    contract).
    """
    users, cands = _eligible(split, n, protocol)
    sample = kde_sample(theta, s, seed, users=users)
    in_sample = set(sample)

    t0 = time.perf_counter()
    freq = RecFrequency(split)
    dyn = DynCoverage(freq)
    store = SnapshotStore()
    lists = {}
    for u in sample:
        picked = _ids(split, _greedy_idx(split, u, theta.theta[u], arec, dyn, n, cands[u]))
        freq.increment(picked)
        store.add(theta.theta[u], freq.copy())
        lists[u] = picked
    t1 = time.perf_counter()

    rest = [u for u in users if u not in in_sample]
    if phase4_order is not None:
        if sorted(phase4_order) != sorted(rest):
            raise ValueError("phase4_order must permute the non-sampled users")
        rest = list(phase4_order)

    def assign(u):
        snapshot = DynCoverage(store.nearest(theta.theta[u]))
        return u, _ids(split, _greedy_idx(split, u, theta.theta[u], arec, snapshot, n, cands[u]))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(assign, rest))
    else:
        results = [assign(u) for u in rest]
    lists.update(dict(results))
    t2 = time.perf_counter()

    return OslgRun(
        TopNCollection(n, lists),
        tuple(sample),
        {"sequential": t1 - t0, "parallel": t2 - t1},
    )


def independent_greedy(split: SplitDataset, theta: PreferenceVector, arec, crec,
                       n: int, workers: int = 1,
                       protocol: str = "all_unrated") -> TopNCollection:
    """Per-user greedy with a static coverage scorer; users are independent."""
    users, cands = _eligible(split, n, protocol)

    def assign(u):
        return u, _ids(split, _greedy_idx(split, u, theta.theta[u], arec, crec, n, cands[u]))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(assign, users))
    else:
        results = [assign(u) for u in users]
    return TopNCollection(n, dict(results))


def collection_value(split: SplitDataset, theta: PreferenceVector, arec,
                     lists: dict) -> float:
    """Objective value of a full collection, with dynamic coverage evaluated
    at the final recommendation frequencies."""
    freq = Counter(i for items in lists.values() for i in items)
    total = 0.0
    for u, items in lists.items():
        th = theta.theta[u]
        a_sum = sum(arec.score(u, i) for i in items)
        c_sum = sum(1.0 / math.sqrt(1.0 + freq[i]) for i in items)
        total += (1.0 - th) * a_sum + th * c_sum
    return total


def brute_force_optimal(split: SplitDataset, theta: PreferenceVector, arec,
                        n: int) -> tuple[float, TopNCollection]:
    """Exhaustive maximum of the final-frequency objective on tiny instances.

    Enumerates every feasible collection (all n-subsets of unseen items per
    user). Guarded to at most 4 users, 8 items, and n <= 2 because the
    search is exponential.
    """
    if len(split.users) > 4 or len(split.items) > 8 or n > 2:
        raise InstanceTooLargeError(
            f"refusing exhaustive search on |U|={len(split.users)}, "
            f"|I|={len(split.items)}, n={n}")
    per_user = []
    for u in split.users:
        cands = sorted(set(split.items) - split.per_user_train_index[u])
        if len(cands) < n:
            raise InfeasibleError(f"user {u!r}: {len(cands)} candidates for top-{n}")
        per_user.append([combo for combo in itertools.combinations(cands, n)])
    best_value = -np.inf
    best = None
    for assignment in itertools.product(*per_user):
        lists = dict(zip(split.users, assignment))
        value = collection_value(split, theta, arec, lists)
        if value > best_value:
            best_value = value
            best = lists
    return float(best_value), TopNCollection(n, best)


def submodularity_check(split: SplitDataset, theta: PreferenceVector, arec,
                        trials: int = 100, seed: int = 0) -> bool:
    """Randomized check of diminishing, non-negative greedy gains.

    The ground set is all feasible (user, item) pairs. For random chains
    A within B and a pair outside B, the gain credited for adding the pair,
    (1-theta_u)*a(u,i) + theta_u/sqrt(1 + count of the item in the set),
    must not grow with the set and must stay non-negative.
    """
    pairs = [(u, i) for u in split.users
             for i in sorted(set(split.items) - split.per_user_train_index[u])]
    if len(pairs) < 2:
        raise ValueError("need at least two feasible pairs")
    rng = np.random.default_rng(seed)

    def gain(user, item, members) -> float:
        f = sum(1 for (_, j) in members if j == item)
        return ((1.0 - theta.theta[user]) * arec.score(user, item)
                + theta.theta[user] / math.sqrt(1.0 + f))

    for _ in range(trials):
        perm = rng.permutation(len(pairs))
        b_size = int(rng.integers(0, len(pairs)))  # leaves at least one pair outside B
        a_size = int(rng.integers(0, b_size + 1))
        a_set = [pairs[k] for k in perm[:a_size]]
        b_set = [pairs[k] for k in perm[:b_size]]
        user, item = pairs[perm[b_size]]
        d_a = gain(user, item, a_set)
        d_b = gain(user, item, b_set)
        if d_a < d_b - 1e-12 or d_b < -1e-12:
            return False
    return True


def save_collection(coll: TopNCollection, directory) -> None:
    """Persist a collection as ``user,rank,item`` rows (rank 1..n)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "topn.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["user", "rank", "item"])
        for user in sorted(coll.lists):
            for rank, item in enumerate(coll.lists[user], start=1):
                w.writerow([user, rank, item])


def load_collection(directory) -> TopNCollection:
    d = Path(directory)
    rows = []
    with open(d / "topn.csv", newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for user, rank, item in reader:
            rows.append((user, int(rank), item))
    users = canonical_ids([r[0] for r in rows])
    items = canonical_ids([r[2] for r in rows])
    lists: dict = {}
    for u, i, (_, rank, _) in zip(users, items, rows):
        lists.setdefault(u, []).append((rank, i))
    n = max((len(v) for v in lists.values()), default=0)
    return TopNCollection(
        n, {u: tuple(i for _, i in sorted(v)) for u, v in lists.items()})
