from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

from .exceptions import DomainError, EmptyTrajectoryError, OrderingError, PreconditionError


# ────────────────────────────────
#  UNIVERSE AND LABELS
# ────────────────────────────────
@dataclass(frozen=True)
class Universe:
    grid_rows: int
    grid_cols: int
    time_slots: int

    def __post_init__(self):
        for name in ("grid_rows", "grid_cols", "time_slots"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise DomainError(f"{name} must be a positive integer, got {value!r}")

    @property
    def cell_count(self) -> int:
        return self.grid_rows * self.grid_cols

    @property
    def label_count(self) -> int:
        return self.cell_count * self.time_slots

    def contains(self, point: "STPoint") -> bool:
        return 0 <= point.cell < self.cell_count and 0 <= point.slot < self.time_slots

    def labels_after(self, slot: int) -> list["STPoint"]:
        """All labels with a slot strictly later than `slot`, in (slot, cell) order."""
        return [
            STPoint(cell, s)
            for s in range(max(slot + 1, 0), self.time_slots)
            for cell in range(self.cell_count)
        ]

    def header(self) -> str:
        return f"universe rows={self.grid_rows} cols={self.grid_cols} slots={self.time_slots}"


@dataclass(frozen=True)
class STPoint:
    cell: int
    slot: int

    @property
    def key(self) -> tuple[int, int]:
        # traversal and output order is (slot, cell)
        return (self.slot, self.cell)

    def __str__(self) -> str:
        return f"{self.cell}:{self.slot}"


# ────────────────────────────────
#  TRAJECTORIES AND DATASETS
# ────────────────────────────────
@dataclass(frozen=True)
class Trajectory:
    points: tuple[STPoint, ...]

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        if not self.points:
            raise EmptyTrajectoryError("a trajectory needs at least one point")
        for prev, cur in zip(self.points, self.points[1:]):
            if cur.slot <= prev.slot:
                raise OrderingError(
                    f"time slots must strictly increase ({prev} followed by {cur})"
                )

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self) -> Iterator[STPoint]:
        return iter(self.points)

    def prefix(self, length: int) -> tuple[STPoint, ...]:
        return self.points[:length]

    def __str__(self) -> str:
        return " ".join(str(p) for p in self.points)


@dataclass(frozen=True)
class Dataset:
    universe: Universe
    trajectories: tuple[Trajectory, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "trajectories", tuple(self.trajectories))
        for idx, traj in enumerate(self.trajectories):
            for p in traj:
                if not self.universe.contains(p):
                    raise DomainError(f"trajectory {idx}: point {p} lies outside the universe")

    def __len__(self) -> int:
        return len(self.trajectories)

    def __iter__(self) -> Iterator[Trajectory]:
        return iter(self.trajectories)

    def canonical_key(self) -> tuple[str, ...]:
        """Order-free identity of the multiset (used to compare published outputs)."""
        return tuple(sorted(str(t) for t in self.trajectories))


@dataclass(frozen=True)
class RawTrace:
    samples: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(tuple(s) for s in self.samples))
        for prev, cur in zip(self.samples, self.samples[1:]):
            if cur[2] < prev[2]:
                raise OrderingError(f"raw timestamps decrease ({prev[2]} then {cur[2]})")


# ────────────────────────────────
#  STATISTICS USED BY PREPROCESSING
# ────────────────────────────────
def max_length(d: Dataset) -> int:
    return max((len(t) for t in d.trajectories), default=0)


def length_histogram(d: Dataset) -> list[int]:
    """Entry i holds the number of trajectories of length i + 1."""
    hist = [0] * max_length(d)
    for t in d.trajectories:
        hist[len(t) - 1] += 1
    return hist


def remove_one(d: Dataset, index: int) -> Dataset:
    """The neighbouring dataset D' that lacks trajectory `index`."""
    if not 0 <= index < len(d.trajectories):
        raise PreconditionError(f"index {index} out of range for {len(d)} trajectories")
    kept = d.trajectories[:index] + d.trajectories[index + 1:]
    return Dataset(d.universe, kept)


def brute_force_prefix_count(d: Dataset, prefix: Sequence[STPoint]) -> int:
    prefix = tuple(prefix)
    n = len(prefix)
    return sum(1 for t in d.trajectories if t.points[:n] == prefix)
