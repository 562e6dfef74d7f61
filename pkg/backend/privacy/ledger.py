"""
Budget ledger and sequential-composition audit.

Mechanisms append a charge for every data-touching step as they go; the
audit afterwards sums the global-stage charges plus the node charges along
each root-to-leaf path of the built tree and compares against the total
budget. Node scopes look like ``root/<cell>:<slot>/...``; anything else
is a global-stage scope.
"""
from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterator

from trajectories.prefix_tree import PrefixTree

from .exceptions import LedgerMismatchError, check_epsilon

logger = logging.getLogger(__name__)

PURPOSE_RANK = "rank"
PURPOSE_SELECT = "select"
PURPOSE_COUNT = "count"
PURPOSE_PRE_LENGTH = "pre-length"
PURPOSE_PRE_HISTOGRAM = "pre-histogram"
PURPOSES = (PURPOSE_RANK, PURPOSE_SELECT, PURPOSE_COUNT, PURPOSE_PRE_LENGTH, PURPOSE_PRE_HISTOGRAM)

AUDIT_TOLERANCE = 1e-9


def is_node_scope(scope: str) -> bool:
    return scope == "root" or scope.startswith("root/")


@dataclass(frozen=True)
class Charge:
    scope: str
    epsilon: float
    purpose: str


class BudgetLedger:
    """Append-only record of epsilon charges for one run."""

    def __init__(self):
        self._charges: list[Charge] = []

    def charge(self, scope: str, eps: float, purpose: str) -> "BudgetLedger":
        if purpose not in PURPOSES:
            raise ValueError(f"unknown charge purpose {purpose!r}")
        self._charges.append(Charge(scope, check_epsilon(eps), purpose))
        return self

    @property
    def charges(self) -> tuple[Charge, ...]:
        return tuple(self._charges)

    def __len__(self) -> int:
        return len(self._charges)

    def __iter__(self) -> Iterator[Charge]:
        return iter(self._charges)

    def global_total(self) -> float:
        return sum(c.epsilon for c in self._charges if not is_node_scope(c.scope))

    def per_scope_totals(self) -> dict[str, float]:
        totals: dict[str, float] = defaultdict(float)
        for c in self._charges:
            if is_node_scope(c.scope):
                totals[c.scope] += c.epsilon
        return dict(totals)

    def per_purpose_totals(self) -> dict[str, float]:
        totals = {p: 0.0 for p in PURPOSES}
        for c in self._charges:
            totals[c.purpose] += c.epsilon
        return totals

    def export(self) -> str:
        """One charge per line: scope<TAB>purpose<TAB>epsilon (repr, so floats round-trip)."""
        return "".join(f"{c.scope}\t{c.purpose}\t{c.epsilon!r}\n" for c in self._charges)


def charge(ledger: BudgetLedger, scope: str, eps: float, purpose: str) -> BudgetLedger:
    return ledger.charge(scope, eps, purpose)


def export_ledger(ledger: BudgetLedger) -> str:
    return ledger.export()


# ────────────────────────────────
#  COMPOSITION AUDIT
# ────────────────────────────────
@dataclass
class CompositionReport:
    total: float
    max_path_sum: float = 0.0
    worst_path: str = "root"
    path_sums: list[tuple[str, float]] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def summary(self) -> dict:
        return {
            "total_epsilon": self.total,
            "max_path_sum": self.max_path_sum,
            "worst_path": self.worst_path,
            "paths": len(self.path_sums),
            "passed": self.passed,
        }


def verify_composition(ledger: BudgetLedger, tree: PrefixTree, total: float,
                       tolerance: float = AUDIT_TOLERANCE) -> CompositionReport:
    total = check_epsilon(total, "total")
    per_scope = ledger.per_scope_totals()
    for scope in per_scope:
        if tree.find_scope(scope) is None:
            raise LedgerMismatchError(f"ledger scope {scope!r} names no node of the tree")

    base = ledger.global_total()
    report = CompositionReport(total=total)
    for path in tree.leaf_paths():
        spent = base + sum(per_scope.get(node.scope, 0.0) for node in path)
        leaf_scope = path[-1].scope
        report.path_sums.append((leaf_scope, spent))
        if spent > report.max_path_sum or len(report.path_sums) == 1:
            report.max_path_sum = spent
            report.worst_path = leaf_scope
        if spent > total + tolerance:
            report.failures.append(leaf_scope)

    if report.failures:
        logger.error(
            "composition audit failed on %d path(s); worst %s spends %.12g > %.12g",
            len(report.failures), report.worst_path, report.max_path_sum, total,
        )
    else:
        logger.debug("composition audit passed; max path sum %.12g of %.12g", report.max_path_sum, total)
    return report
