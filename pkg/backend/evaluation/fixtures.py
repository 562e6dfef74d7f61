"""
Bundled datasets.

REFERENCE_TEXT is a 15-trajectory worked dataset over seven places, each
place n sitting in cell n-1 at slot n-1 of a 1x7 grid (PLACE maps n to its
point). TINY_FIXTURES are neighbour pairs small enough for the
empirical DP checker: (dataset text, index of the trajectory to remove).
"""
from trajectories.dataset import Dataset, STPoint
from trajectories.fileformat import parse_dataset

PLACE = {i: STPoint(i - 1, i - 1) for i in range(1, 8)}

REFERENCE_TEXT = """universe rows=1 cols=7 slots=7
0:0 1:1
0:0 2:2 3:3
1:1 2:2
2:2 4:4
1:1 4:4 5:5
2:2 3:3 4:4
2:2 4:4 5:5
3:3 4:4
3:3 4:4 5:5
3:3 4:4
4:4 5:5
4:4 5:5
3:3 6:6
4:4 5:5
4:4 6:6
"""

TINY_FIXTURES: dict[str, tuple[str, int]] = {
    "pair-chain": ("universe rows=2 cols=2 slots=2\n0:0\n1:1\n0:0 1:1\n", 2),
    "duplicates": ("universe rows=2 cols=2 slots=2\n0:0 1:1\n0:0 1:1\n", 1),
    "singletons": ("universe rows=2 cols=2 slots=2\n0:0\n3:0\n2:1\n", 0),
    "crossing":   ("universe rows=2 cols=2 slots=2\n0:0 3:1\n3:0 0:1\n1:1\n", 1),
    "full":       ("universe rows=2 cols=2 slots=2\n0:0 1:1\n2:0 3:1\n1:0\n3:1\n", 3),
}


def reference_dataset() -> Dataset:
    return parse_dataset(REFERENCE_TEXT)


def tiny_fixture(name: str) -> tuple[Dataset, int]:
    text, removed = TINY_FIXTURES[name]
    return parse_dataset(text), removed
