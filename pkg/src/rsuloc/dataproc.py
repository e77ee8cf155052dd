"""Measurement record parsing and per-vehicle epoch matching.

Record format, one per line, comma separated::

    <mac>, <timestamp>, <rsu>, <rssi_dbm>

``timestamp`` is ISO 8601 (``2021-07-10T10:20:30.100000``) or
``M/D/YYYY H:MM:SS[.ffffff]``; ``rsu`` is ``RSU_<id>`` or a bare integer.
Timestamps become seconds relative to a reference datetime.

Matching groups records by (mac, grid time) where grid time is the nearest
multiple of ``dt``; records within ``dt/2`` of a grid point are treated as
simultaneous.
"""

from __future__ import annotations

import csv
import re
from collections import OrderedDict
from dataclasses import dataclass
from datetime import datetime
from typing import Iterable, Mapping, Sequence

import numpy as np

from rsuloc.channel import LOG_EPOCH, RssMeasurement
from rsuloc.errors import RecordParseError
from rsuloc.scenario import RsuNode

_RSU_RE = re.compile(r"^(?:RSU_?)?(\d+)$", re.IGNORECASE)
_SLASH_FORMATS = ("%m/%d/%Y %H:%M:%S", "%m/%d/%Y %H:%M:%S.%f", "%m/%d/%Y %H:%M")


@dataclass(frozen=True)
class MatchedEpoch:
    """All measurements of one vehicle at one grid time, sorted by RSU id."""

    mac: str
    t: float
    entries: tuple[tuple[RsuNode, float], ...]

    def __len__(self):
        return len(self.entries)

    @property
    def rsus(self) -> list[RsuNode]:
        return [r for r, _ in self.entries]

    @property
    def positions(self) -> np.ndarray:
        return np.array([r.position for r, _ in self.entries], dtype=float).reshape(-1, 2)

    @property
    def powers(self) -> np.ndarray:
        return np.array([p for _, p in self.entries], dtype=float)

    @property
    def rsu_ids(self) -> list[int]:
        return [r.id for r, _ in self.entries]


@dataclass
class MatchDiagnostics:
    """Where every input record went that did not end up in an epoch."""

    dropped_groups: int = 0
    dropped_records: int = 0
    duplicate_records: int = 0
    unknown_rsu_records: int = 0


def _parse_time(text: str, epoch: datetime) -> float:
    try:
        stamp = datetime.fromisoformat(text)
    except ValueError:
        for fmt in _SLASH_FORMATS:
            try:
                stamp = datetime.strptime(text, fmt)
                break
            except ValueError:
                continue
        else:
            raise
    return (stamp - epoch).total_seconds()


def parse_record(
    line: str,
    line_no: int | None = None,
    epoch: datetime = LOG_EPOCH,
    dt: float | None = None,
) -> RssMeasurement:
    """Parse one record line.

    Raises:
        RecordParseError: naming the offending field and line number.
    """
    text = line.strip()
    if not text:
        raise RecordParseError("empty record", line_no)
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 4:
        raise RecordParseError(f"expected 4 fields, got {len(parts)}", line_no)
    mac, stamp, rsu, power = parts
    if not mac:
        raise RecordParseError("empty mac field", line_no, "mac")
    try:
        t = _parse_time(stamp, epoch)
    except ValueError:
        raise RecordParseError(f"bad timestamp field {stamp!r}", line_no, "timestamp") from None
    m = _RSU_RE.match(rsu)
    if m is None:
        raise RecordParseError(f"bad rsu field {rsu!r}", line_no, "rsu")
    try:
        value = float(power)
    except ValueError:
        raise RecordParseError(f"bad power field {power!r}", line_no, "power") from None
    if not np.isfinite(value):
        raise RecordParseError(f"non-finite power field {power!r}", line_no, "power")
    if dt is not None:
        t = snap_time(t, dt)
    return RssMeasurement(mac, t, int(m.group(1)), value)


def read_log(path, epoch: datetime = LOG_EPOCH) -> list[RssMeasurement]:
    """Parse a whole log file, skipping blank lines and ``#`` comments."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            out.append(parse_record(line, i, epoch))
    return out


def snap_time(t: float, dt: float) -> float:
    k = int(np.floor(t / dt + 0.5))
    return round(k * dt, 9)


def match_epochs(
    records: Iterable[RssMeasurement],
    rsus: Mapping[int, RsuNode] | Sequence[RsuNode],
    min_rsus: int = 3,
    dt: float = 0.1,
) -> tuple[list[MatchedEpoch], MatchDiagnostics]:
    """Group records into per-vehicle epochs.

    Duplicate (mac, grid time, rsu) records keep the last occurrence.
    Groups with fewer than ``min_rsus`` distinct RSUs are dropped.

    Returns:
        Epochs sorted by (t, mac) and the diagnostics counters.
    """
    if not isinstance(rsus, Mapping):
        rsus = {r.id: r for r in rsus}
    diag = MatchDiagnostics()
    groups: dict[tuple[str, int], OrderedDict[int, float]] = {}
    for rec in records:
        if rec.rsu_id not in rsus:
            diag.unknown_rsu_records += 1
            continue
        k = int(np.floor(rec.timestamp / dt + 0.5))
        group = groups.setdefault((rec.mac, k), OrderedDict())
        if rec.rsu_id in group:
            diag.duplicate_records += 1
        group[rec.rsu_id] = rec.power

    epochs = []
    for (mac, k), group in groups.items():
        if len(group) < min_rsus:
            diag.dropped_groups += 1
            diag.dropped_records += len(group)
            continue
        entries = tuple((rsus[i], group[i]) for i in sorted(group))
        epochs.append(MatchedEpoch(mac, round(k * dt, 9), entries))
    epochs.sort(key=lambda e: (e.t, e.mac))
    return epochs, diag


def write_epochs_csv(epochs: Iterable[MatchedEpoch], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["mac", "t", "rsu_id", "power"])
        for e in epochs:
            for rsu, power in e.entries:
                w.writerow([e.mac, f"{e.t:.3f}", rsu.id, f"{power:.6f}"])
