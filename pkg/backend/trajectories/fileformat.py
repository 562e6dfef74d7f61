"""
Text formats for datasets and raw traces.

Discretized dataset (UTF-8)::

    universe rows=<r> cols=<c> slots=<T>
    3:0 17:2 17:5
    ...

Raw traces: one ``x,y,t`` sample per line, a blank line between traces.
``t`` is seconds or an ISO-8601 timestamp.
"""
from __future__ import annotations

import re
from typing import Iterable

from dateutil import parser as date_parser
from dateutil import tz

from .dataset import Dataset, RawTrace, STPoint, Trajectory, Universe
from .exceptions import DatasetParseError, DomainError, OrderingError

_HEADER_RE = re.compile(r"^universe\s+rows=(\d+)\s+cols=(\d+)\s+slots=(\d+)\s*$")
_POINT_RE = re.compile(r"^(\d+):(\d+)$")


def read_universe_header(line: str, line_no: int = 1) -> Universe:
    m = _HEADER_RE.match(line.strip())
    if not m:
        raise DatasetParseError(
            "expected header 'universe rows=<r> cols=<c> slots=<T>'", line_no
        )
    try:
        return Universe(int(m.group(1)), int(m.group(2)), int(m.group(3)))
    except DomainError as exc:
        raise DomainError(str(exc), line_no) from exc


def _parse_line(line: str, line_no: int, universe: Universe) -> Trajectory:
    points = []
    for token in line.split(" "):
        m = _POINT_RE.match(token)
        if not m:
            raise DatasetParseError(f"malformed point {token!r} (expected cell:slot)", line_no)
        p = STPoint(int(m.group(1)), int(m.group(2)))
        if not universe.contains(p):
            raise DomainError(f"point {p} lies outside the universe", line_no)
        points.append(p)
    try:
        return Trajectory(tuple(points))
    except OrderingError as exc:
        raise OrderingError(str(exc), line_no) from exc


def parse_dataset(text: str | Iterable[str], universe: Universe | None = None) -> Dataset:
    """
    Parse a discretized dataset. The header declares the universe; a
    `universe` argument (from flags) is used when the header is absent and
    must agree with it when both are given.
    """
    lines = text.splitlines() if isinstance(text, str) else [l.rstrip("\n") for l in text]
    body_start = 0
    declared = None
    if lines and lines[0].strip().startswith("universe"):
        declared = read_universe_header(lines[0], 1)
        body_start = 1

    if declared and universe and declared != universe:
        raise DomainError(f"header declares {declared.header()!r} but {universe.header()!r} was requested", 1)
    universe = declared or universe
    if universe is None:
        raise DatasetParseError("no universe header and no universe given", 1)

    trajectories = []
    for idx in range(body_start, len(lines)):
        line = lines[idx].strip()
        if not line:
            continue
        trajectories.append(_parse_line(line, idx + 1, universe))
    return Dataset(universe, tuple(trajectories))


def serialize_dataset(d: Dataset) -> str:
    rows = [d.universe.header()]
    rows.extend(str(t) for t in d.trajectories)
    return "\n".join(rows) + "\n"


def _parse_timestamp(raw: str, line_no: int | None) -> float:
    try:
        return float(raw)
    except ValueError:
        pass
    try:
        stamp = date_parser.isoparse(raw)
    except (ValueError, OverflowError) as exc:
        raise DatasetParseError(f"unreadable timestamp {raw!r}", line_no) from exc
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=tz.UTC)
    return stamp.timestamp()


def parse_timestamp(raw: str) -> float:
    """Seconds since the epoch from a number or an ISO-8601 string (naive = UTC)."""
    return _parse_timestamp(raw.strip(), None)


def parse_raw_traces(text: str) -> list[RawTrace]:
    traces: list[RawTrace] = []
    current: list[tuple[float, float, float]] = []

    def flush(line_no):
        if current:
            try:
                traces.append(RawTrace(tuple(current)))
            except OrderingError as exc:
                raise OrderingError(str(exc), line_no) from exc
            current.clear()

    lines = text.splitlines()
    for idx, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            flush(idx)
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3:
            raise DatasetParseError("expected 'x,y,t'", idx)
        try:
            x, y = float(parts[0]), float(parts[1])
        except ValueError as exc:
            raise DatasetParseError(f"bad coordinate in {line!r}", idx) from exc
        current.append((x, y, _parse_timestamp(parts[2], idx)))
    flush(len(lines))
    return traces
