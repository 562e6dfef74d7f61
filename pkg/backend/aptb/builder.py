"""
Noisy prefix tree construction with adaptive budgets and node aggregation.

Outline of one build:

  1. split_budget     a small preprocessing share of eps goes to the noisy
                      maximum length and the noisy length histogram.
  2. noisy_height     the noisy maximum length, clamped by the publisher's
                      limit, becomes the tree height h.
  3. level loop       every expandable node gets one child per candidate
                      label (unobserved labels with true count 0). Each child
                      is allocated eps_remaining / (levels it may still grow + 1).
                      Children of a level with equal allocations form a budget
                      class; each class is clustered on preliminary noisy
                      counts, clusters are merged into coarse nodes through the
                      exponential mechanism, and each coarse node gets one
                      Laplace draw that its members share evenly.
  4. pruning          nodes whose published count falls under the class
                      threshold are not expanded.

Every data-touching step charges the ledger.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

from privacy.exceptions import check_epsilon
from privacy.ledger import (
    PURPOSE_COUNT,
    PURPOSE_PRE_HISTOGRAM,
    PURPOSE_PRE_LENGTH,
    PURPOSE_RANK,
    PURPOSE_SELECT,
    BudgetLedger,
)
from privacy.mechanisms import RandomStream, exp_mechanism, laplace
from trajectories.dataset import Dataset, length_histogram, max_length
from trajectories.exceptions import PreconditionError
from trajectories.prefix_tree import PrefixTree, TreeNode, build_real_tree, max_expand, son_set

from .config import AptbConfig

logger = logging.getLogger(__name__)

SCORE_SENSITIVITY = 1.0
SCOPE_PRE_LENGTH = "global/pre-length"
SCOPE_PRE_HISTOGRAM = "global/pre-histogram"


# ────────────────────────────────
#  BUILD ARTIFACTS
# ────────────────────────────────
@dataclass
class BudgetClass:
    level: int
    eps_node: float
    members: list[TreeNode] = field(default_factory=list)


@dataclass
class Cluster:
    members: list[TreeNode]
    rank_counts: list[float]

    @property
    def k(self) -> int:
        return len(self.members)


@dataclass
class CoarseNode:
    members: list[TreeNode]
    noisy_total: float

    @property
    def m(self) -> int:
        return len(self.members)

    @property
    def published_member_count(self) -> float:
        return self.noisy_total / self.m


@dataclass
class ClassRecord:
    level: int
    eps_node: float
    k: int
    eps_count: float
    delta: float
    theta: float
    # eps_count and theta used by clusters of size <= 2 (and by every cluster when delta is 0)
    folded_eps_count: float
    folded_theta: float
    clusters: int
    pruned: int


@dataclass
class BuildTrace:
    h: int = 0
    noisy_hist: list[float] = field(default_factory=list)
    eps_len: float = 0.0
    eps_hist: float = 0.0
    eps_tree: float = 0.0
    classes: list[ClassRecord] = field(default_factory=list)
    coarse_nodes: list[CoarseNode] = field(default_factory=list)
    # (eps_count the node was noised with, theta it was compared against)
    node_thresholds: dict = field(default_factory=dict)


class BuildResult(NamedTuple):
    tree: PrefixTree
    ledger: BudgetLedger
    trace: BuildTrace


# ────────────────────────────────
#  PREPROCESSING
# ────────────────────────────────
def split_budget(cfg: AptbConfig, ledger: BudgetLedger | None = None) -> tuple[float, float, float]:
    """
    (eps_len, eps_hist, eps_tree). The preprocessing share is halved between
    the maximum length and the length histogram; the rest builds the tree.
    Only the two preprocessing halves are global-stage charges: eps_tree is
    charged node by node as it is allocated.
    """
    pre = cfg.pre_fraction * cfg.total_eps
    eps_len = eps_hist = pre / 2.0
    eps_tree = (1.0 - cfg.pre_fraction) * cfg.total_eps
    if ledger is not None:
        ledger.charge(SCOPE_PRE_LENGTH, eps_len, PURPOSE_PRE_LENGTH)
        ledger.charge(SCOPE_PRE_HISTOGRAM, eps_hist, PURPOSE_PRE_HISTOGRAM)
    return eps_len, eps_hist, eps_tree


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def noisy_height(d: Dataset, eps_len: float, eps_hist: float, h_user: int,
                 rng: RandomStream) -> tuple[int, list[float]]:
    """
    Noisy tree height and noisy length histogram over lengths 1..h.
    Trajectories longer than h fall into the length-h bucket, so the
    histogram total estimates the dataset size.
    """
    eps_len = check_epsilon(eps_len, "eps_len")
    eps_hist = check_epsilon(eps_hist, "eps_hist")
    if h_user < 1:
        raise PreconditionError(f"h_user must be >= 1, got {h_user}")

    noisy_max = max_length(d) + laplace(1.0 / eps_len, rng)
    h = min(max(_round_half_up(noisy_max), 1), h_user)

    true_hist = length_histogram(d)
    folded = [0] * h
    for idx, n in enumerate(true_hist):
        folded[min(idx, h - 1)] += n
    noisy_hist = [n + laplace(1.0 / eps_hist, rng) for n in folded]
    return h, noisy_hist


# ────────────────────────────────
#  ALLOCATION
# ────────────────────────────────
def allocate_budget(n: TreeNode, eps_remaining: float, t: PrefixTree) -> float:
    """The further a node can still grow, the smaller its share of what is left on its path."""
    eps_remaining = check_epsilon(eps_remaining, "eps_remaining")
    if n.depth < 1:
        raise PreconditionError("the virtual root is not allocated a budget")
    levels = min(max_expand(n, t), t.height_limit - n.depth)
    return eps_remaining / (levels + 1)


# ────────────────────────────────
#  AGGREGATION
# ────────────────────────────────
def cluster_nodes(cls: BudgetClass, delta: float, eps_rank: float, rng: RandomStream,
                  ledger: BudgetLedger | None = None) -> list[Cluster]:
    """
    Rank members by a preliminary noisy count and cut the ranking wherever two
    neighbours are more than `delta` apart, so outliers end up alone.
    With delta = 0 the outcome is known in advance: every member is its own
    cluster and no rank noise is drawn or charged.
    """
    if not cls.members:
        raise PreconditionError("cannot cluster an empty budget class")
    if delta < 0:
        raise PreconditionError(f"delta must be >= 0, got {delta}")

    members = sorted(cls.members, key=lambda n: n.label.key)
    if delta == 0:
        # noisy ranks never tie, so a zero gap tolerance isolates every node
        return [Cluster([m], [m.count]) for m in members]
    if eps_rank <= 0:
        # no ranking budget: the class stays one cluster in label order
        return [Cluster(members, [m.count for m in members])]

    ranked = []
    for node in members:
        ranked.append((node.count + laplace(1.0 / eps_rank, rng), node))
        if ledger is not None:
            ledger.charge(node.scope, eps_rank, PURPOSE_RANK)
    ranked.sort(key=lambda pair: (-pair[0], pair[1].label.key))

    clusters: list[Cluster] = []
    for noisy, node in ranked:
        if clusters and clusters[-1].rank_counts[-1] - noisy <= delta:
            clusters[-1].members.append(node)
            clusters[-1].rank_counts.append(noisy)
        else:
            clusters.append(Cluster([node], [noisy]))
    return clusters


def _mean_count(group: list[TreeNode]) -> float:
    return sum(n.count for n in group) / len(group)


def reconstruct_cluster(c: Cluster, eps_select: float, eps_count: float, delta: float,
                        rng: RandomStream, ledger: BudgetLedger | None = None,
                        noise_eps_factor: float = 1.0) -> list[CoarseNode]:
    """
    Merge adjacent members of a cluster into coarse nodes and noise them.

    With k > 2 members the merge scheme is chosen by k rounds of the
    exponential mechanism over "merge neighbouring groups i, i+1" candidates
    (score: minus the gap between their mean true counts) and a STOP
    candidate scored -delta. With k <= 2 the only scheme is the whole
    cluster, so nothing is selected or charged for it.

    Members' counts are overwritten with the coarse node average.
    """
    eps_count = check_epsilon(eps_count, "eps_count")
    k = c.k
    groups: list[list[TreeNode]] = [[m] for m in c.members]

    if k <= 2:
        groups = [list(c.members)]
    elif eps_select > 0:
        per_round = eps_select / k
        for _ in range(k):
            if len(groups) == 1:
                break
            scores = [-delta] + [
                -abs(_mean_count(left) - _mean_count(right))
                for left, right in zip(groups, groups[1:])
            ]
            choice = exp_mechanism(scores, per_round, SCORE_SENSITIVITY, rng)
            if choice == 0:
                break
            i = choice - 1
            groups[i:i + 2] = [groups[i] + groups[i + 1]]
        # every round is paid for, including the ones skipped after STOP
        if ledger is not None:
            for member in c.members:
                ledger.charge(member.scope, per_round * k, PURPOSE_SELECT)

    coarse_nodes = []
    for group in groups:
        true_total = sum(n.count for n in group)
        noisy_total = true_total + laplace(1.0 / (eps_count * noise_eps_factor), rng)
        coarse = CoarseNode(group, noisy_total)
        for member in group:
            member.count = coarse.published_member_count
            if ledger is not None:
                ledger.charge(member.scope, eps_count, PURPOSE_COUNT)
        coarse_nodes.append(coarse)
    return coarse_nodes


# ────────────────────────────────
#  THRESHOLD
# ────────────────────────────────
def compute_theta(k: int, eps_count: float, cfg) -> float:
    """
    Expansion threshold for a class of k nodes noised with eps_count. A node
    with true count 0 clears theta with probability P = exp(-eps * theta) / 2;
    theta = ln(max(k, 2)) / eps keeps k * P at 1/2.
    `cfg` is anything carrying theta_floor and theta_override.
    """
    if k < 1:
        raise PreconditionError(f"class size must be >= 1, got {k}")
    if cfg.theta_override is not None:
        return float(cfg.theta_override)
    return max(cfg.theta_floor, math.log(max(k, 2)) / eps_count)


def resolve_delta(cfg: AptbConfig, eps_count: float) -> float:
    if cfg.auto_delta:
        # twice the standard deviation of Lap(1 / eps_count)
        return 2.0 * math.sqrt(2.0) / eps_count
    return float(cfg.delta)


# ────────────────────────────────
#  FULL BUILD
# ────────────────────────────────
def _group_classes(level: int, nodes: list[TreeNode]) -> list[BudgetClass]:
    by_eps: dict[float, BudgetClass] = {}
    for node in nodes:
        cls = by_eps.get(node.eps)
        if cls is None:
            cls = by_eps[node.eps] = BudgetClass(level, node.eps)
        cls.members.append(node)
    return [by_eps[eps] for eps in sorted(by_eps, reverse=True)]


def _process_class(cls: BudgetClass, cfg: AptbConfig, rng: RandomStream,
                   ledger: BudgetLedger, trace: BuildTrace) -> None:
    eps_rank = cfg.split_rank * cls.eps_node
    eps_select = cfg.split_select * cls.eps_node
    eps_count = cfg.split_count * cls.eps_node
    delta = resolve_delta(cfg, eps_count)
    k = len(cls.members)

    clusters = cluster_nodes(cls, delta, eps_rank, rng, ledger)
    # clusters with one merge scheme have nothing to select, and a zero delta never ranks;
    # unspent shares go to the count noise
    rank_unspent = eps_rank if delta == 0 else 0.0
    folded_eps_count = eps_count + eps_select + rank_unspent
    theta = compute_theta(k, eps_count, cfg)
    folded_theta = compute_theta(k, folded_eps_count, cfg)
    for cluster in clusters:
        folded = cluster.k <= 2
        cluster_eps_count = folded_eps_count if folded else eps_count
        cluster_theta = folded_theta if folded else theta
        coarse = reconstruct_cluster(
            cluster, eps_select, cluster_eps_count, delta, rng, ledger,
            noise_eps_factor=cfg.unaccounted_eps_factor,
        )
        trace.coarse_nodes.extend(coarse)
        for member in cluster.members:
            trace.node_thresholds[member.scope] = (cluster_eps_count, cluster_theta)
            if member.count < cluster_theta:
                member.leaf = True

    pruned = sum(1 for m in cls.members if m.leaf)
    trace.classes.append(ClassRecord(
        level=cls.level, eps_node=cls.eps_node, k=k, eps_count=eps_count, delta=delta,
        theta=theta, folded_eps_count=folded_eps_count, folded_theta=folded_theta,
        clusters=len(clusters), pruned=pruned,
    ))


def build_noisy_tree(d: Dataset, cfg: AptbConfig) -> BuildResult:
    rng = RandomStream(cfg.seed, degenerate=cfg.zero_noise)
    ledger = BudgetLedger()
    trace = BuildTrace()

    eps_len, eps_hist, eps_tree = split_budget(cfg, ledger)
    h, noisy_hist = noisy_height(d, eps_len, eps_hist, cfg.h_user, rng)
    trace.h, trace.noisy_hist = h, noisy_hist
    trace.eps_len, trace.eps_hist, trace.eps_tree = eps_len, eps_hist, eps_tree

    exact = build_real_tree(d, h, cfg.sonset_mode)
    root = TreeNode(None, 0, count=sum(max(x, 0.0) for x in noisy_hist))
    root.eps_remaining = eps_tree
    tree = PrefixTree(root, h, d.universe, cfg.sonset_mode, exact.observed_labels)
    exact_of: dict[TreeNode, TreeNode | None] = {root: exact.root}

    frontier = [root]
    for level in range(1, h + 1):
        new_nodes: list[TreeNode] = []
        for parent in frontier:
            if parent.leaf:
                continue
            remaining = parent.eps_remaining - (parent.eps or 0.0)
            exact_parent = exact_of.get(parent)
            for label in son_set(parent, tree):
                exact_child = exact_parent.children.get(label) if exact_parent is not None else None
                child = parent.add_child(label, exact_child.count if exact_child is not None else 0.0)
                exact_of[child] = exact_child
                child.eps_remaining = remaining
                child.eps = allocate_budget(child, remaining, tree)
                new_nodes.append(child)
        if not new_nodes:
            break

        classes = _group_classes(level, new_nodes)
        for cls in classes:
            _process_class(cls, cfg, rng, ledger, trace)
        logger.debug(
            "level %d: %d nodes in %d budget classes, %d pruned",
            level, len(new_nodes), len(classes), sum(1 for n in new_nodes if n.leaf),
        )
        frontier = new_nodes

    logger.debug(
        "APTB build: h=%d, %d nodes, %d coarse nodes, %d ledger charges",
        h, sum(1 for _ in tree.iter_nodes()), len(trace.coarse_nodes), len(ledger),
    )
    return BuildResult(tree, ledger, trace)
