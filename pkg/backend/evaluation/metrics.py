from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from privacy.mechanisms import RandomStream
from trajectories.dataset import Dataset, STPoint
from trajectories.exceptions import PreconditionError
from trajectories.prefix_tree import build_real_tree, prefix_count

Prefix = tuple[STPoint, ...]


@dataclass(frozen=True)
class QueryWorkload:
    prefixes: tuple[Prefix, ...]
    sanity_bound: float = 0.001

    @property
    def max_length(self) -> int:
        return max((len(p) for p in self.prefixes), default=0)


def make_workload(d: Dataset, h: int, rng: RandomStream, sanity_bound: float = 0.001,
                  max_attempts_per_query: int = 50) -> QueryWorkload:
    """
    Every prefix (length <= h) that occurs in `d`, plus as many prefixes
    with true count 0, drawn uniformly over length and slot-increasing labels.
    """
    exact = build_real_tree(d, h)
    present = [node.path() for node in exact.iter_nodes() if not node.is_root]
    seen = set(present)

    universe = d.universe
    longest = min(h, universe.time_slots)
    gen = rng.generator
    absent: list[Prefix] = []
    attempts = 0
    while len(absent) < len(present) and attempts < max_attempts_per_query * max(len(present), 1):
        attempts += 1
        length = int(gen.integers(1, longest + 1))
        slots = np.sort(gen.choice(universe.time_slots, size=length, replace=False))
        cells = gen.integers(0, universe.cell_count, size=length)
        prefix = tuple(STPoint(int(c), int(s)) for c, s in zip(cells, slots))
        if prefix in seen:
            continue
        seen.add(prefix)
        absent.append(prefix)
    return QueryWorkload(tuple(present) + tuple(absent), sanity_bound)


def avg_relative_error(original: Dataset, published: Dataset, w: QueryWorkload) -> float:
    """Mean of |c_pub(q) - c_orig(q)| / max(c_orig(q), s * |original|) over the workload."""
    if not w.prefixes:
        raise PreconditionError("empty query workload")
    if original.universe != published.universe:
        raise PreconditionError("original and published datasets use different universes")
    h = w.max_length
    orig_tree = build_real_tree(original, h)
    pub_tree = build_real_tree(published, h)
    floor = w.sanity_bound * len(original)
    errors = []
    for q in w.prefixes:
        c_orig = prefix_count(orig_tree, q)
        c_pub = prefix_count(pub_tree, q)
        denom = max(c_orig, floor)
        if denom == 0:
            # empty original: only the absolute error is left to report
            denom = 1.0
        errors.append(abs(c_pub - c_orig) / denom)
    return float(np.mean(errors))


def _length_fractions(d: Dataset, size: int) -> np.ndarray:
    counts = np.bincount([len(t) for t in d.trajectories], minlength=size + 1)[1:size + 1]
    return counts / counts.sum()


def length_distribution_l1(original: Dataset, published: Dataset) -> float:
    if len(original) == 0 or len(published) == 0:
        raise PreconditionError("length distribution distance needs two non-empty datasets")
    size = max(max(len(t) for t in original), max(len(t) for t in published))
    return float(np.abs(_length_fractions(original, size) - _length_fractions(published, size)).sum())


def sign_test(treatment: list[float], control: list[float]) -> float:
    """One-sided paired sign test p-value for 'treatment errors are lower than control'."""
    if len(treatment) != len(control):
        raise PreconditionError("sign test needs paired samples")
    wins = sum(1 for a, b in zip(treatment, control) if a < b)
    losses = sum(1 for a, b in zip(treatment, control) if a > b)
    if wins + losses == 0:
        return 1.0
    return float(stats.binomtest(wins, wins + losses, 0.5, alternative="greater").pvalue)
