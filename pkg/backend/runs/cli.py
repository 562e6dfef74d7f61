"""
Shared plumbing for the management commands: common flags, exit codes,
and the mapping from domain errors to CommandError return codes.
"""
from __future__ import annotations

from pathlib import Path

from django.core.management.base import CommandError
from rest_framework import serializers

from aptb.config import AptbConfig, read_config_file
from aptb.serializers import build_config
from trajectories.dataset import Dataset, Universe
from trajectories.exceptions import TrajpubError
from trajectories.fileformat import parse_dataset
from trajectories.serializers import UniverseSerializer

EXIT_CONFIG = 2
EXIT_PARSE = 3
EXIT_AUDIT = 4
EXIT_DPCHECK = 5


def format_validation_error(exc: serializers.ValidationError) -> str:
    detail = exc.detail
    if isinstance(detail, dict):
        parts = []
        for field, msgs in detail.items():
            msgs = msgs if isinstance(msgs, list) else [msgs]
            parts.append(f"{field}: {' '.join(str(m) for m in msgs)}")
        return "; ".join(parts)
    if isinstance(detail, list):
        return " ".join(str(m) for m in detail)
    return str(detail)


def config_error(message: str) -> CommandError:
    return CommandError(message, returncode=EXIT_CONFIG)


def parse_error(message: str) -> CommandError:
    return CommandError(message, returncode=EXIT_PARSE)


# ────────────────────────────────
#  FLAGS
# ────────────────────────────────
def add_universe_arguments(parser, required: bool = False) -> None:
    parser.add_argument("--rows", type=int, required=required, help="grid rows")
    parser.add_argument("--cols", type=int, required=required, help="grid columns")
    parser.add_argument("--slots", type=int, required=required, help="number of time slots")


def add_config_arguments(parser, seed_required: bool = True) -> None:
    parser.add_argument("--config", help="mechanism config file (key = value lines)")
    parser.add_argument("--eps", type=float, help="total privacy budget")
    parser.add_argument("--h", type=int, help="height limit of the prefix tree")
    parser.add_argument("--delta", help="outlier distance, a number or 'auto'")
    parser.add_argument("--theta", type=float, help="fixed expansion threshold (overrides the rule)")
    parser.add_argument("--pre-fraction", type=float, dest="pre_fraction",
                        help="share of eps spent on the length preprocessing")
    parser.add_argument("--seed", type=int, required=seed_required, help="master seed")
    parser.add_argument("--sonset", choices=("universe", "observed"), dest="sonset_mode",
                        help="candidate child labels (observed is not private)")


# ────────────────────────────────
#  INPUTS
# ────────────────────────────────
def read_text(path: str | None, what: str = "input") -> str:
    if not path:
        raise parse_error(f"no {what} file given")
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise parse_error(f"{what} file not found: {path}")
    except (OSError, UnicodeDecodeError) as exc:
        raise parse_error(f"cannot read {what} file {path}: {exc}")


def universe_from_options(options: dict) -> Universe | None:
    values = {k: options.get(k) for k in ("rows", "cols", "slots")}
    if all(v is None for v in values.values()):
        return None
    ser = UniverseSerializer(data=values)
    if not ser.is_valid():
        raise config_error(f"invalid universe: {format_validation_error(serializers.ValidationError(ser.errors))}")
    return ser.save()


def load_dataset(path: str | None, universe: Universe | None = None, what: str = "input") -> Dataset:
    text = read_text(path, what)
    try:
        return parse_dataset(text, universe)
    except TrajpubError as exc:
        raise parse_error(f"{path}: {exc}")


def config_from_options(options: dict, **fallbacks) -> AptbConfig:
    """
    Config file values, then flags. `fallbacks` fill fields that neither
    sets (for instance h from the universe in dpcheck).
    """
    file_values = {}
    if options.get("config"):
        text = read_text(options["config"], "config")
        try:
            file_values = read_config_file(text)
        except TrajpubError as exc:
            raise config_error(f"{options['config']}: {exc}")

    flags = {
        "total_eps": options.get("eps"),
        "h_user": options.get("h"),
        "delta": options.get("delta"),
        "theta_override": options.get("theta"),
        "pre_fraction": options.get("pre_fraction"),
        "seed": options.get("seed"),
        "sonset_mode": options.get("sonset_mode"),
    }
    for key, value in fallbacks.items():
        if flags.get(key) is None and key not in file_values:
            flags[key] = value
    try:
        return build_config(file_values, flags)
    except serializers.ValidationError as exc:
        raise config_error(f"invalid configuration: {format_validation_error(exc)}")
    except TrajpubError as exc:
        raise config_error(f"invalid configuration: {exc}")
