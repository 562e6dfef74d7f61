"""
Synthetic trajectory data for experiments.

Each trajectory picks a length, a sorted set of distinct slots and a start
cell drawn from a power-law popularity over cells (cell 0 most popular),
then walks to a neighbouring cell (8-neighbourhood or staying put) at each
following slot, again weighted by popularity.
"""
from __future__ import annotations

import numpy as np

from trajectories.dataset import Dataset, STPoint, Trajectory, Universe
from trajectories.exceptions import PreconditionError


def popularity_weights(cell_count: int, skew: float) -> np.ndarray:
    ranks = np.arange(1, cell_count + 1, dtype=float)
    weights = ranks ** (-float(skew))
    return weights / weights.sum()


def _neighbours(universe: Universe, cell: int) -> np.ndarray:
    row, col = divmod(cell, universe.grid_cols)
    rows = range(max(row - 1, 0), min(row + 2, universe.grid_rows))
    cols = range(max(col - 1, 0), min(col + 2, universe.grid_cols))
    return np.array([r * universe.grid_cols + c for r in rows for c in cols])


def synth_dataset(universe: Universe, n_traj: int, max_len: int, popularity_skew: float,
                  seed: int) -> Dataset:
    if n_traj < 0:
        raise PreconditionError(f"n_traj must be >= 0, got {n_traj}")
    if max_len < 1:
        raise PreconditionError(f"max_len must be >= 1, got {max_len}")
    if popularity_skew < 0:
        raise PreconditionError(f"popularity_skew must be >= 0, got {popularity_skew}")

    gen = np.random.Generator(np.random.PCG64(seed))
    weights = popularity_weights(universe.cell_count, popularity_skew)
    neighbourhoods = [_neighbours(universe, c) for c in range(universe.cell_count)]
    longest = min(max_len, universe.time_slots)

    rows = []
    for _ in range(n_traj):
        length = int(gen.integers(1, longest + 1))
        slots = np.sort(gen.choice(universe.time_slots, size=length, replace=False))
        cell = int(gen.choice(universe.cell_count, p=weights))
        points = [STPoint(cell, int(slots[0]))]
        for slot in slots[1:]:
            options = neighbourhoods[cell]
            local = weights[options] / weights[options].sum()
            cell = int(gen.choice(options, p=local))
            points.append(STPoint(cell, int(slot)))
        rows.append(Trajectory(tuple(points)))
    return Dataset(universe, tuple(rows))
