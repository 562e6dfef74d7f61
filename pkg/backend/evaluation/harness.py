"""
Mechanism dispatch and the (mechanism, epsilon, seed) sweep.

Sweep cells are independent: each runs with its own seed and the results
come back in task order whether or not a process pool is used.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from aptb.config import AptbConfig
from aptb.consistency import enforce_consistency, generate_dataset
from aptb.publisher import PublishResult, publish
from privacy.ledger import verify_composition
from privacy.mechanisms import RandomStream
from trajectories.dataset import Dataset
from trajectories.exceptions import PreconditionError

from .baseline import build_baseline_tree
from .metrics import QueryWorkload, avg_relative_error, length_distribution_l1, make_workload

logger = logging.getLogger(__name__)

MECHANISM_APTB = "aptb"
MECHANISM_BASELINE = "baseline"
MECHANISMS = (MECHANISM_APTB, MECHANISM_BASELINE)

METRIC_ARE = "avg_relative_error"
METRIC_LENGTH_L1 = "length_l1"
METRICS = (METRIC_ARE, METRIC_LENGTH_L1)


def run_mechanism(name: str, d: Dataset, cfg: AptbConfig) -> PublishResult:
    if name == MECHANISM_APTB:
        return publish(d, cfg)
    if name == MECHANISM_BASELINE:
        rng = RandomStream(cfg.seed, degenerate=cfg.zero_noise)
        noisy, ledger = build_baseline_tree(d, cfg.total_eps, cfg.h_user, rng, cfg)
        audit = verify_composition(ledger, noisy, cfg.total_eps)
        consistent = enforce_consistency(noisy)
        return PublishResult(noisy, consistent, generate_dataset(consistent), ledger, audit, None)
    raise PreconditionError(f"unknown mechanism {name!r}; expected one of {', '.join(MECHANISMS)}")


def parse_mechanisms(value: str) -> tuple[str, ...]:
    names = tuple(n.strip() for n in value.split(",") if n.strip())
    unknown = [n for n in names if n not in MECHANISMS]
    if not names or unknown:
        raise PreconditionError(f"mechanisms must be drawn from {', '.join(MECHANISMS)} (got {value!r})")
    return names


def parse_metrics(value: str) -> tuple[str, ...]:
    names = tuple(m.strip() for m in value.split(",") if m.strip())
    unknown = [m for m in names if m not in METRICS]
    if not names or unknown:
        raise PreconditionError(f"metrics must be drawn from {', '.join(METRICS)} (got {value!r})")
    return names


# ────────────────────────────────
#  SUMMARY ROWS
# ────────────────────────────────
@dataclass(frozen=True)
class SummaryRow:
    metric: str
    mechanism: str
    epsilon: float | None
    seed: int
    value: float

    def as_line(self) -> str:
        eps = "-" if self.epsilon is None else repr(self.epsilon)
        return f"{self.metric}\t{self.mechanism}\t{eps}\t{self.seed}\t{self.value!r}"


def measure(metric: str, original: Dataset, published: Dataset, workload: QueryWorkload) -> float:
    if metric == METRIC_ARE:
        return avg_relative_error(original, published, workload)
    if metric == METRIC_LENGTH_L1:
        try:
            return length_distribution_l1(original, published)
        except PreconditionError:
            logger.warning("length distribution undefined for an empty dataset; recording nan")
            return math.nan
    raise PreconditionError(f"unknown metric {metric!r}; expected one of {', '.join(METRICS)}")


def _run_cell(task) -> list[SummaryRow]:
    mechanism, cfg, d, workload, metrics = task
    result = run_mechanism(mechanism, d, cfg)
    if not result.audit.passed:
        raise PreconditionError(
            f"{mechanism} at eps={cfg.total_eps} seed={cfg.seed} failed the ledger audit"
        )
    return [
        SummaryRow(metric, mechanism, cfg.total_eps, cfg.seed, measure(metric, d, result.dataset, workload))
        for metric in metrics
    ]


def run_sweep(d: Dataset, mechanisms: Sequence[str], eps_values: Sequence[float],
              seeds: Iterable[int], base_cfg: AptbConfig,
              metrics: Sequence[str] = (METRIC_ARE,), workers: int = 1,
              workload: QueryWorkload | None = None) -> list[SummaryRow]:
    """
    One row per (metric, mechanism, epsilon, seed), ordered by mechanism,
    then epsilon, then seed, then metric. The query workload is drawn once
    from base_cfg.seed so every cell is scored on the same queries.
    """
    if workload is None:
        workload = make_workload(d, base_cfg.h_user, RandomStream(base_cfg.seed))
    seeds = list(seeds)
    tasks = [
        (mechanism, replace(base_cfg, total_eps=float(eps), seed=int(seed)), d, workload, tuple(metrics))
        for mechanism in mechanisms
        for eps in eps_values
        for seed in seeds
    ]
    logger.info("sweep: %d cells over %d worker(s), %d queries", len(tasks), max(workers, 1), len(workload.prefixes))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_cell, tasks))
    else:
        chunks = [_run_cell(task) for task in tasks]
    return [row for chunk in chunks for row in chunk]


def rows_for(rows: Sequence[SummaryRow], metric: str, mechanism: str, epsilon: float) -> list[float]:
    """Values in seed order, for pairing two mechanisms in a sign test."""
    picked = [r for r in rows if r.metric == metric and r.mechanism == mechanism and r.epsilon == epsilon]
    return [r.value for r in sorted(picked, key=lambda r: r.seed)]
