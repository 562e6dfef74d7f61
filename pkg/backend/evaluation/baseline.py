"""
Uniform-budget baseline: every level of the tree gets eps / h and every
node its own Lap(h / eps) draw. It reuses the candidate sets, the
threshold rule and the consistency pass of the APTB publisher, so a
comparison isolates the adaptive allocation and node aggregation.
"""
from __future__ import annotations

import logging

from aptb.builder import compute_theta
from aptb.config import AptbConfig
from privacy.exceptions import check_epsilon
from privacy.ledger import PURPOSE_COUNT, BudgetLedger
from privacy.mechanisms import RandomStream, laplace
from trajectories.dataset import Dataset
from trajectories.exceptions import PreconditionError
from trajectories.prefix_tree import PrefixTree, TreeNode, build_real_tree, son_set

logger = logging.getLogger(__name__)


def build_baseline_tree(d: Dataset, eps: float, h: int, rng: RandomStream,
                        cfg: AptbConfig | None = None) -> tuple[PrefixTree, BudgetLedger]:
    eps = check_epsilon(eps)
    if h < 1:
        raise PreconditionError(f"h must be >= 1, got {h}")
    cfg = cfg or AptbConfig(total_eps=eps, h_user=h)
    eps_level = eps / h
    noise_eps = eps_level * cfg.unaccounted_eps_factor

    ledger = BudgetLedger()
    exact = build_real_tree(d, h, cfg.sonset_mode)
    root = TreeNode(None, 0)
    tree = PrefixTree(root, h, d.universe, cfg.sonset_mode, exact.observed_labels)
    exact_of: dict[TreeNode, TreeNode | None] = {root: exact.root}

    frontier = [root]
    for level in range(1, h + 1):
        nodes = []
        for parent in frontier:
            if parent.leaf:
                continue
            exact_parent = exact_of.get(parent)
            for label in son_set(parent, tree):
                exact_child = exact_parent.children.get(label) if exact_parent is not None else None
                true_count = exact_child.count if exact_child is not None else 0.0
                child = parent.add_child(label, true_count + laplace(1.0 / noise_eps, rng))
                child.eps = eps_level
                exact_of[child] = exact_child
                ledger.charge(child.scope, eps_level, PURPOSE_COUNT)
                nodes.append(child)
        if not nodes:
            break
        theta = compute_theta(len(nodes), eps_level, cfg)
        for node in nodes:
            if node.count < theta:
                node.leaf = True
        logger.debug("baseline level %d: %d nodes, theta %.4g", level, len(nodes), theta)
        frontier = nodes

    # the root spends nothing; it only has to bound its children for consistency
    root.count = sum(max(c.count, 0.0) for c in root.children.values())
    return tree, ledger
