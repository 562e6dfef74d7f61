from __future__ import annotations

import logging
from typing import NamedTuple

from privacy.ledger import BudgetLedger, CompositionReport, verify_composition
from trajectories.dataset import Dataset
from trajectories.prefix_tree import PrefixTree

from .builder import BuildTrace, build_noisy_tree
from .config import AptbConfig
from .consistency import enforce_consistency, generate_dataset

logger = logging.getLogger(__name__)


class PublishResult(NamedTuple):
    noisy_tree: PrefixTree
    consistent_tree: PrefixTree
    dataset: Dataset
    ledger: BudgetLedger
    audit: CompositionReport
    trace: BuildTrace | None


def publish(d: Dataset, cfg: AptbConfig) -> PublishResult:
    """Build, audit against cfg.total_eps, make consistent, generate the published dataset."""
    noisy, ledger, trace = build_noisy_tree(d, cfg)
    audit = verify_composition(ledger, noisy, cfg.total_eps)
    consistent = enforce_consistency(noisy)
    published = generate_dataset(consistent)
    logger.debug(
        "published %d trajectories from %d (max path sum %.6g of %.6g)",
        len(published), len(d), audit.max_path_sum, cfg.total_eps,
    )
    return PublishResult(noisy, consistent, published, ledger, audit, trace)
