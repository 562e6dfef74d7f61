"""
Seeded noise sources and the two DP mechanisms the builders use.

RandomStream wraps numpy's PCG64 bit generator, whose output for a given
seed is fixed across platforms. Laplace noise is drawn by inverse CDF from
one open-interval uniform, so a draw is a pure function of the stream state.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from trajectories.exceptions import PreconditionError

from .exceptions import check_epsilon

_SEED_MASK = (1 << 64) - 1


class RandomStream:
    """
    Single-owner random source. `degenerate=True` is a test hook for the
    eps -> infinity limit: Laplace draws are 0 and the exponential
    mechanism returns the first best-scoring candidate.
    """

    def __init__(self, seed: int, degenerate: bool = False):
        self.seed = int(seed)
        self.degenerate = degenerate
        self._gen = np.random.Generator(np.random.PCG64(self.seed & _SEED_MASK))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def uniform_open(self) -> float:
        """Uniform draw on the open interval (0, 1)."""
        while True:
            u = float(self._gen.random())
            if u > 0.0:
                return u

    def split(self, index: int) -> "RandomStream":
        """Independent stream for run `index`: seed + index."""
        return RandomStream(self.seed + int(index), self.degenerate)

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, degenerate={self.degenerate})"


# ────────────────────────────────
#  LAPLACE
# ────────────────────────────────
def laplace_from_uniform(u: float, scale: float) -> float:
    d = u - 0.5
    if d == 0.0:
        return 0.0
    return math.copysign(-scale * math.log(1.0 - 2.0 * abs(d)), d)


def laplace(scale: float, rng: RandomStream) -> float:
    """One Laplace(0, scale) draw. Callers pass scale = sensitivity / eps."""
    if not scale > 0:
        raise PreconditionError(f"Laplace scale must be positive, got {scale}")
    if rng.degenerate:
        return 0.0
    return laplace_from_uniform(rng.uniform_open(), scale)


def laplace_tail(eps: float, theta: float) -> float:
    """P[Lap(1/eps) > theta] for theta >= 0."""
    return 0.5 * math.exp(-eps * theta)


# ────────────────────────────────
#  EXPONENTIAL MECHANISM
# ────────────────────────────────
def exp_probabilities(scores: Sequence[float], eps: float, sensitivity: float) -> np.ndarray:
    s = np.asarray(scores, dtype=float)
    # shifting by the max leaves the distribution unchanged and keeps exp() finite
    w = np.exp(eps * (s - s.max()) / (2.0 * sensitivity))
    return w / w.sum()


def exp_mechanism(scores: Sequence[float], eps: float, sensitivity: float, rng: RandomStream) -> int:
    """Index i with probability proportional to exp(eps * scores[i] / (2 * sensitivity))."""
    if len(scores) == 0:
        raise PreconditionError("exponential mechanism needs at least one candidate")
    if not sensitivity > 0:
        raise PreconditionError(f"sensitivity must be positive, got {sensitivity}")
    if len(scores) == 1:
        return 0
    if rng.degenerate:
        return int(np.argmax(np.asarray(scores, dtype=float)))
    eps = check_epsilon(eps)
    cdf = np.cumsum(exp_probabilities(scores, eps, sensitivity))
    idx = int(np.searchsorted(cdf, rng.uniform_open() * cdf[-1], side="right"))
    return min(idx, len(scores) - 1)
