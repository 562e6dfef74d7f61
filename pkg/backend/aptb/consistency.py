"""
Consistency post-processing and dataset generation.

A consistent tree has, at every node N with count n and children S(N):
every child count <= n, n >= sum of child counts, and n a non-negative
integer. enforce_consistency gets there in two top-down passes (clamp and
proportional rescale, then largest-remainder rounding), and the published
dataset is read off the consistent tree's terminal counts.
"""
from __future__ import annotations

import math

from trajectories.dataset import Dataset, Trajectory
from trajectories.exceptions import PreconditionError
from trajectories.prefix_tree import PrefixTree, TreeNode

# A PrefixTree that satisfies the three consistency clauses.
ConsistentTree = PrefixTree
TerminalMap = dict


def consistency_violations(t: PrefixTree) -> list[str]:
    problems = []
    for node in t.iter_nodes():
        n = node.count
        if n < 0 or n != math.floor(n):
            problems.append(f"{node.scope}: count {n!r} is not a non-negative integer")
        total = 0.0
        for child in node.children.values():
            total += child.count
            if child.count > n:
                problems.append(f"{child.scope}: child count {child.count!r} exceeds parent {n!r}")
        if total > n:
            problems.append(f"{node.scope}: children sum {total!r} exceeds count {n!r}")
    return problems


def _clamp_and_rescale(t: PrefixTree) -> None:
    t.root.count = max(t.root.count, 0.0)
    for level in t.levels():
        for node in level:
            children = node.ordered_children()
            for child in children:
                child.count = max(child.count, 0.0)
            total = sum(c.count for c in children)
            if total > node.count:
                scale = node.count / total if total > 0 else 0.0
                for child in children:
                    child.count *= scale


def _integerize_siblings(parent_count: int, children: list[TreeNode]) -> None:
    """
    Largest-remainder rounding of one sibling group so that the integer sum
    stays <= the (already integer) parent count. Ties go to the earlier
    (slot, cell) label.
    """
    if not children:
        return
    values = [c.count for c in children]
    total = sum(values)
    if total > parent_count:
        values = [v * parent_count / total for v in values]
        total = sum(values)
    floors = [int(math.floor(v)) for v in values]
    target = min(parent_count, int(math.floor(total + 0.5)))
    extra = max(0, target - sum(floors))
    order = sorted(range(len(values)), key=lambda i: (-(values[i] - floors[i]), i))
    for i in order[:extra]:
        floors[i] += 1
    for child, value in zip(children, floors):
        child.count = float(value)


def _drop_zero_nodes(node: TreeNode) -> None:
    node.children = {label: c for label, c in node.children.items() if c.count > 0}
    for child in node.children.values():
        _drop_zero_nodes(child)


def enforce_consistency(t: PrefixTree) -> ConsistentTree:
    """Return a consistent copy of `t`; the input tree is left untouched."""
    out = t.copy()
    _clamp_and_rescale(out)
    out.root.count = float(math.floor(out.root.count + 0.5))
    for level in out.levels():
        for node in level:
            _integerize_siblings(int(node.count), node.ordered_children())
    _drop_zero_nodes(out.root)
    return out


def terminal_counts(t: ConsistentTree) -> TerminalMap:
    """Per node: count minus the children's total, the number of trajectories ending there."""
    terminals = {}
    for node in t.iter_nodes():
        terminal = node.count - node.children_total()
        if terminal < 0:
            raise PreconditionError(f"{node.scope}: children exceed the node count; tree is not consistent")
        terminals[node] = int(terminal)
    return terminals


def generate_dataset(t: ConsistentTree) -> Dataset:
    """Emit terminal(N) copies of every root-to-N path, depth first in (slot, cell) order."""
    problems = consistency_violations(t)
    if problems:
        raise PreconditionError(f"tree is not consistent: {problems[0]}")
    terminals = terminal_counts(t)
    rows = []
    for node in t.iter_nodes():
        if node.is_root:
            continue
        copies = terminals[node]
        if copies:
            traj = Trajectory(node.path())
            rows.extend([traj] * copies)
    return Dataset(t.universe, tuple(rows))
