"""
Empirical differential-privacy check on tiny neighbouring datasets.

The full pipeline runs `trials` times on D and on D minus one trajectory,
each run with its own seed. Published datasets are reduced to their
order-free key and the two outcome distributions are compared key by key:
for every key observed often enough under either input,

    freq_D(key) <= e^eps * freq_D'(key) + slack     (and the same with D, D' swapped)

with slack a fixed number of binomial standard errors. Passing is a
necessary condition for eps-DP on that pair, never a proof.
"""
from __future__ import annotations

import logging
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from django.conf import settings

from aptb.config import AptbConfig
from trajectories.dataset import Dataset, remove_one
from trajectories.exceptions import PreconditionError

from .harness import MECHANISM_APTB, run_mechanism

logger = logging.getLogger(__name__)


@dataclass
class KeyVerdict:
    key: tuple[str, ...]
    freq_d: float
    freq_neighbour: float
    slack: float
    passed: bool


@dataclass
class DpCheckReport:
    epsilon_claimed: float
    max_observed_ratio: float
    trials: int
    outcome_space: str
    passed: bool
    mechanism: str = MECHANISM_APTB
    checked: list[KeyVerdict] = field(default_factory=list)

    def as_text(self) -> str:
        lines = [
            "[dpcheck]",
            f"mechanism = {self.mechanism}",
            f"epsilon_claimed = {self.epsilon_claimed!r}",
            f"trials = {self.trials}",
            f"outcome_space = {self.outcome_space}",
            f"max_observed_ratio = {self.max_observed_ratio!r}",
            f"bound = {math.exp(self.epsilon_claimed)!r}",
            f"pass = {'true' if self.passed else 'false'}",
            "",
            "[keys]",
        ]
        for v in self.checked:
            label = " | ".join(v.key) if v.key else "(empty)"
            lines.append(
                f"{label} = {v.freq_d:.6f} {v.freq_neighbour:.6f} slack {v.slack:.6f} "
                f"{'ok' if v.passed else 'FAIL'}"
            )
        return "\n".join(lines) + "\n"


def check_tiny(d: Dataset) -> None:
    conf = settings.TRAJPUB
    u = d.universe
    if len(d) > conf["TINY_MAX_TRAJECTORIES"]:
        raise PreconditionError(
            f"dpcheck needs at most {conf['TINY_MAX_TRAJECTORIES']} trajectories, got {len(d)}"
        )
    if u.cell_count > conf["TINY_MAX_CELLS"] or u.time_slots > conf["TINY_MAX_SLOTS"]:
        raise PreconditionError(
            f"dpcheck needs a universe of at most {conf['TINY_MAX_CELLS']} cells and "
            f"{conf['TINY_MAX_SLOTS']} slots, got {u.cell_count} cells and {u.time_slots} slots"
        )


def _published_keys(task) -> list[tuple[str, ...]]:
    mechanism, d, cfg, seeds = task
    return [run_mechanism(mechanism, d, replace(cfg, seed=s)).dataset.canonical_key() for s in seeds]


def _collect(mechanism: str, d: Dataset, cfg: AptbConfig, seeds: range, workers: int) -> Counter:
    if workers <= 1:
        return Counter(_published_keys((mechanism, d, cfg, seeds)))
    size = max(1, math.ceil(len(seeds) / (workers * 4)))
    batches = [seeds[i:i + size] for i in range(0, len(seeds), size)]
    counts: Counter = Counter()
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for keys in pool.map(_published_keys, [(mechanism, d, cfg, b) for b in batches]):
            counts.update(keys)
    return counts


def _ratio(a: float, b: float) -> float:
    if a == b:
        return 1.0
    if a == 0 or b == 0:
        return math.inf
    return max(a / b, b / a)


def empirical_dp_check(d: Dataset, removed_index: int, cfg: AptbConfig, trials: int,
                       mechanism: str = MECHANISM_APTB, workers: int = 1) -> DpCheckReport:
    conf = settings.TRAJPUB
    check_tiny(d)
    if trials < conf["DPCHECK_MIN_TRIALS"]:
        raise PreconditionError(f"dpcheck needs at least {conf['DPCHECK_MIN_TRIALS']} trials, got {trials}")
    neighbour = remove_one(d, removed_index)

    eps = cfg.total_eps
    # disjoint seed ranges: no trial on D shares a stream with a trial on D'
    counts_d = _collect(mechanism, d, cfg, range(cfg.seed, cfg.seed + trials), workers)
    counts_n = _collect(mechanism, neighbour, cfg, range(cfg.seed + trials, cfg.seed + 2 * trials), workers)

    bound = math.exp(eps)
    min_obs = conf["DPCHECK_MIN_OBS"]
    n_se = conf["DPCHECK_SLACK_SE"]
    verdicts = []
    max_ratio = 1.0
    for key in sorted(set(counts_d) | set(counts_n)):
        if counts_d[key] < min_obs and counts_n[key] < min_obs:
            continue
        p = counts_d[key] / trials
        q = counts_n[key] / trials
        slack = n_se * math.sqrt(p * (1 - p) / trials + bound * bound * q * (1 - q) / trials)
        slack_rev = n_se * math.sqrt(q * (1 - q) / trials + bound * bound * p * (1 - p) / trials)
        ok = p <= bound * q + slack and q <= bound * p + slack_rev
        verdicts.append(KeyVerdict(key, p, q, max(slack, slack_rev), ok))
        max_ratio = max(max_ratio, _ratio(p, q))

    passed = all(v.passed for v in verdicts)
    outcome_space = (
        f"{len(set(counts_d) | set(counts_n))} distinct published datasets, "
        f"{len(verdicts)} with >= {min_obs} observations"
    )
    logger.info(
        "dpcheck %s eps=%g: %d trials per input, max ratio %.4g vs bound %.4g, %s",
        mechanism, eps, trials, max_ratio, bound, "pass" if passed else "FAIL",
    )
    return DpCheckReport(eps, max_ratio, trials, outcome_space, passed, mechanism, verdicts)
