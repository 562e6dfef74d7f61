from __future__ import annotations

import math
from dataclasses import dataclass

from .dataset import RawTrace, STPoint, Trajectory, Universe
from .exceptions import DomainError, EmptyTrajectoryError


@dataclass(frozen=True)
class BBox:
    min_x: float
    min_y: float
    max_x: float
    max_y: float

    def __post_init__(self):
        if not (self.max_x > self.min_x and self.max_y > self.min_y):
            raise DomainError(f"degenerate bounding box {self}")

    def cell_of(self, x: float, y: float, universe: Universe) -> int | None:
        """Row-major grid cell for (x, y); None outside the box. The max edges belong to the last row/column."""
        if not (self.min_x <= x <= self.max_x and self.min_y <= y <= self.max_y):
            return None
        col = int(math.floor((x - self.min_x) / (self.max_x - self.min_x) * universe.grid_cols))
        row = int(math.floor((y - self.min_y) / (self.max_y - self.min_y) * universe.grid_rows))
        col = min(col, universe.grid_cols - 1)
        row = min(row, universe.grid_rows - 1)
        return row * universe.grid_cols + col


def discretize(
    trace: RawTrace,
    universe: Universe,
    bbox: BBox,
    time_origin: float,
    slot_width: float,
) -> Trajectory:
    """
    Map raw (x, y, t) samples onto (cell, slot) labels.

    Samples outside the box or the slot range are dropped. Repeated samples
    in one (cell, slot) collapse, and when a slot is already taken the first
    cell seen in it wins.
    """
    if not slot_width > 0:
        raise DomainError(f"slot_width must be positive, got {slot_width}")

    points: list[STPoint] = []
    for x, y, t in trace.samples:
        cell = bbox.cell_of(x, y, universe)
        if cell is None:
            continue
        slot = int(math.floor((t - time_origin) / slot_width))
        if not 0 <= slot < universe.time_slots:
            continue
        if points and slot <= points[-1].slot:
            continue
        points.append(STPoint(cell, slot))

    if not points:
        raise EmptyTrajectoryError("no sample of the trace falls inside the universe")
    return Trajectory(tuple(points))
