"""
Mechanism configuration.

AptbConfig is a plain frozen dataclass so the builders stay free of
Django. `config_errors()` is the single source of the invariants: the
dataclass raises on them directly and AptbConfigSerializer reports them as
field-keyed validation errors.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

from trajectories.exceptions import DatasetParseError, PreconditionError
from trajectories.prefix_tree import SONSET_MODES, SONSET_UNIVERSE

DELTA_AUTO = "auto"
SPLIT_TOLERANCE = 1e-9


@dataclass(frozen=True)
class AptbConfig:
    total_eps: float
    h_user: int
    pre_fraction: float = 0.1
    delta: float | str = DELTA_AUTO
    theta_floor: float = 1.0
    theta_override: float | None = None
    split_rank: float = 0.15
    split_select: float = 0.15
    split_count: float = 0.70
    seed: int = 0
    sonset_mode: str = SONSET_UNIVERSE
    # test hooks: the eps -> infinity limit, and an unledgered boost of the count budget
    zero_noise: bool = False
    unaccounted_eps_factor: float = 1.0

    def __post_init__(self):
        errors = config_errors(asdict(self))
        if errors:
            detail = "; ".join(f"{k}: {v}" for k, v in errors.items())
            raise PreconditionError(f"invalid mechanism configuration ({detail})")

    @property
    def auto_delta(self) -> bool:
        return self.delta == DELTA_AUTO

    def snapshot(self) -> dict:
        """Ordered, JSON-friendly view for manifests and logs (test hooks omitted)."""
        data = asdict(self)
        data.pop("zero_noise")
        data.pop("unaccounted_eps_factor")
        return data


def config_errors(data: dict) -> dict[str, str]:
    errors: dict[str, str] = {}

    eps = data.get("total_eps")
    if not isinstance(eps, (int, float)) or not (eps > 0 and math.isfinite(eps)):
        errors["total_eps"] = f"must be positive and finite (got {eps!r})"

    h = data.get("h_user")
    if not isinstance(h, int) or isinstance(h, bool) or h < 1:
        errors["h_user"] = f"must be an integer >= 1 (got {h!r})"

    pre = data.get("pre_fraction")
    if not isinstance(pre, (int, float)) or not 0 < pre < 1:
        errors["pre_fraction"] = f"must lie strictly between 0 and 1 (got {pre!r})"

    delta = data.get("delta")
    if delta != DELTA_AUTO and (not isinstance(delta, (int, float)) or delta < 0 or not math.isfinite(delta)):
        errors["delta"] = f"must be >= 0 or 'auto' (got {delta!r})"

    floor = data.get("theta_floor")
    if not isinstance(floor, (int, float)) or floor < 0:
        errors["theta_floor"] = f"must be >= 0 (got {floor!r})"

    override = data.get("theta_override")
    if override is not None and (not isinstance(override, (int, float)) or override < 0):
        errors["theta_override"] = f"must be >= 0 when set (got {override!r})"

    splits = [data.get(k) for k in ("split_rank", "split_select", "split_count")]
    if any(not isinstance(s, (int, float)) or not 0 <= s <= 1 for s in splits):
        errors["split_count"] = "node budget fractions must each lie in [0, 1]"
    elif abs(sum(splits) - 1.0) > SPLIT_TOLERANCE:
        errors["split_count"] = f"split_rank + split_select + split_count must equal 1 (got {sum(splits):.6g})"
    elif data.get("split_count") == 0:
        errors["split_count"] = "the count share must be positive"

    if data.get("sonset_mode") not in SONSET_MODES:
        errors["sonset_mode"] = f"must be one of {', '.join(SONSET_MODES)}"

    factor = data.get("unaccounted_eps_factor", 1.0)
    if not isinstance(factor, (int, float)) or factor <= 0:
        errors["unaccounted_eps_factor"] = "must be positive"
    return errors


CONFIG_KEYS = tuple(f.name for f in fields(AptbConfig) if f.name not in ("zero_noise", "unaccounted_eps_factor"))


def read_config_file(text: str) -> dict[str, str]:
    """`key = value` lines; blank lines and '#' comments are skipped. Values stay strings."""
    values: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise DatasetParseError("expected 'key = value'", line_no)
        if key not in CONFIG_KEYS:
            raise DatasetParseError(f"unknown config key {key!r}", line_no)
        values[key] = value
    return values
