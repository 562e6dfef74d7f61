"""
Prefix tree over trajectories.

Each node carries the triple (label, eps, count): the spatio-temporal
location it stands for, the budget allocated to it (None until a mechanism
allocates one) and the number of trajectories sharing its prefix. The root
is a virtual node at depth 0 with no label.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

from .dataset import Dataset, STPoint, Universe
from .exceptions import PreconditionError

SONSET_UNIVERSE = "universe"
# Candidates restricted to labels seen in the data. Not private; utility experiments only.
SONSET_OBSERVED = "observed"
SONSET_MODES = (SONSET_UNIVERSE, SONSET_OBSERVED)


class TreeNode:
    __slots__ = ("label", "depth", "count", "eps", "eps_remaining", "children", "parent", "leaf")

    def __init__(self, label: STPoint | None, depth: int, count: float = 0.0, parent: "TreeNode | None" = None):
        self.label = label
        self.depth = depth
        self.count = float(count)
        self.eps: float | None = None
        self.eps_remaining: float | None = None
        self.children: dict[STPoint, TreeNode] = {}
        self.parent = parent
        # set when a mechanism decides not to expand the node
        self.leaf = False

    def add_child(self, label: STPoint, count: float = 0.0) -> "TreeNode":
        child = TreeNode(label, self.depth + 1, count, parent=self)
        self.children[label] = child
        return child

    def ordered_children(self) -> list["TreeNode"]:
        return sorted(self.children.values(), key=lambda c: c.label.key)

    def path(self) -> tuple[STPoint, ...]:
        labels = []
        node = self
        while node is not None and node.label is not None:
            labels.append(node.label)
            node = node.parent
        return tuple(reversed(labels))

    @property
    def scope(self) -> str:
        """Ledger scope key: 'root' or 'root/<cell>:<slot>/...'."""
        return "/".join(["root", *(str(p) for p in self.path())])

    @property
    def is_root(self) -> bool:
        return self.label is None

    def children_total(self) -> float:
        return sum(c.count for c in self.children.values())

    def __repr__(self) -> str:
        return f"TreeNode({self.scope}, c={self.count:g}, eps={self.eps})"


@dataclass
class PrefixTree:
    root: TreeNode
    height_limit: int
    universe: Universe
    sonset_mode: str = SONSET_UNIVERSE
    observed_labels: frozenset = field(default_factory=frozenset)

    def iter_nodes(self) -> Iterator[TreeNode]:
        """Pre-order, children in (slot, cell) order."""
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.ordered_children()))

    def levels(self) -> list[list[TreeNode]]:
        out: list[list[TreeNode]] = []
        frontier = [self.root]
        while frontier:
            out.append(frontier)
            frontier = [c for n in frontier for c in n.ordered_children()]
        return out

    def leaf_paths(self) -> list[list[TreeNode]]:
        """Every root-to-leaf path (a root with no children is a path of its own)."""
        paths = []
        for node in self.iter_nodes():
            if not node.children:
                chain = []
                cur = node
                while cur is not None:
                    chain.append(cur)
                    cur = cur.parent
                paths.append(list(reversed(chain)))
        return paths

    def find(self, prefix: Sequence[STPoint]) -> TreeNode | None:
        node = self.root
        for label in prefix:
            node = node.children.get(label)
            if node is None:
                return None
        return node

    def find_scope(self, scope: str) -> TreeNode | None:
        parts = scope.split("/")
        if not parts or parts[0] != "root":
            return None
        prefix = []
        for token in parts[1:]:
            cell, _, slot = token.partition(":")
            try:
                prefix.append(STPoint(int(cell), int(slot)))
            except ValueError:
                return None
        return self.find(prefix)

    def height(self) -> int:
        return max(n.depth for n in self.iter_nodes())

    def copy(self) -> "PrefixTree":
        """Deep copy of the node structure; the universe and label set are shared (immutable)."""
        def clone(node: TreeNode, parent: TreeNode | None) -> TreeNode:
            twin = TreeNode(node.label, node.depth, node.count, parent)
            twin.eps, twin.eps_remaining, twin.leaf = node.eps, node.eps_remaining, node.leaf
            for label, child in node.children.items():
                twin.children[label] = clone(child, twin)
            return twin

        return PrefixTree(clone(self.root, None), self.height_limit, self.universe,
                          self.sonset_mode, self.observed_labels)


# ────────────────────────────────
#  EXACT CONSTRUCTION
# ────────────────────────────────
def build_real_tree(d: Dataset, h: int, sonset_mode: str = SONSET_UNIVERSE) -> PrefixTree:
    """Noise-free tree: one node per distinct prefix of length <= h with its exact count."""
    if h < 1:
        raise PreconditionError(f"height limit must be >= 1, got {h}")
    root = TreeNode(None, 0, count=len(d))
    observed = set()
    for traj in d.trajectories:
        node = root
        for label in traj.prefix(h):
            child = node.children.get(label)
            if child is None:
                child = node.add_child(label)
            child.count += 1
            node = child
        observed.update(traj.points)
    return PrefixTree(root, h, d.universe, sonset_mode, frozenset(observed))


def prefix_count(t: PrefixTree, prefix: Sequence[STPoint]) -> float:
    if len(prefix) > t.height_limit:
        raise PreconditionError(f"prefix of length {len(prefix)} exceeds height limit {t.height_limit}")
    node = t.find(prefix)
    return node.count if node is not None else 0.0


# ────────────────────────────────
#  STRUCTURE QUERIES
# ────────────────────────────────
def _last_slot(n: TreeNode) -> int:
    return n.label.slot if n.label is not None else -1


def son_set(n: TreeNode, t: PrefixTree) -> list[STPoint]:
    """Candidate child labels of `n`, ordered by (slot, cell)."""
    if n.depth >= t.height_limit:
        return []
    labels = t.universe.labels_after(_last_slot(n))
    if t.sonset_mode == SONSET_OBSERVED:
        labels = [p for p in labels if p in t.observed_labels]
    return labels


def max_expand(n: TreeNode, t: PrefixTree) -> int:
    """
    Longest chain of candidate descendants below `n`. Candidates only need a
    later slot, so the longest chain takes one label per remaining slot,
    capped by the levels left under the height limit.
    """
    if n.depth >= t.height_limit:
        return 0
    slot = _last_slot(n)
    if t.sonset_mode == SONSET_OBSERVED:
        later = len({p.slot for p in t.observed_labels if p.slot > slot})
    else:
        later = t.universe.time_slots - 1 - slot
    return max(0, min(later, t.height_limit - n.depth))


# ────────────────────────────────
#  DEBUG DUMP
# ────────────────────────────────
def _fmt(value: float | None) -> str:
    return "-" if value is None else f"{value:.6g}"


def dump_tree(t: PrefixTree) -> str:
    lines = []
    for node in t.iter_nodes():
        if node.is_root:
            lines.append(f"root c={_fmt(node.count)} eps={_fmt(node.eps)}")
            continue
        indent = "  " * (node.depth - 1)
        lines.append(f"{indent}{node.label} c={_fmt(node.count)} eps={_fmt(node.eps)}")
    return "\n".join(lines) + "\n"
