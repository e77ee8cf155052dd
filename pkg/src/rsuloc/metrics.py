"""Error statistics over estimated versus true positions.

Conventions:

* ALE and MAE are both the mean 2D error magnitude; RMSE is the root mean
  square of the same magnitudes.
* MAPE divides each error magnitude by the distance of the true position
  from the origin; samples whose truth is at the origin are skipped and
  counted in ``mape_excluded``.
* Longitudinal error is ``|dx|`` along the road axis (first coordinate).
* Percentiles use linear interpolation between closest ranks: for sorted
  values ``v[0..n-1]`` and fraction ``p`` the rank is ``h = (n - 1) * p``
  and the result ``v[floor(h)] + (h - floor(h)) * (v[floor(h)+1] - v[floor(h)])``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from rsuloc.errors import DomainError

CSV_COLUMNS = ("method", "scenario", "run", "ale", "rmse", "mae", "mape", "p50_long", "p90_long")


@dataclass(frozen=True)
class ErrorReport:
    ale: float
    rmse: float
    mae: float
    mape: float
    longitudinal_errors: tuple[float, ...]
    n: int
    mape_excluded: int = 0

    def percentile(self, p: float) -> float:
        return percentile(self.longitudinal_errors, p)


def error_magnitudes(estimates, truths) -> np.ndarray:
    est, tru = _pair(estimates, truths)
    return np.linalg.norm(est - tru, axis=1)


def _pair(estimates, truths):
    est = np.asarray(estimates, dtype=float).reshape(-1, 2)
    tru = np.asarray(truths, dtype=float).reshape(-1, 2)
    if est.shape != tru.shape:
        raise DomainError(f"length mismatch: {est.shape[0]} estimates vs {tru.shape[0]} truths")
    if est.shape[0] == 0:
        raise DomainError("no samples")
    return est, tru


def compute_report(estimates, truths) -> ErrorReport:
    """Summarize paired 2D estimates and truths.

    Raises:
        DomainError: on length mismatch or empty input.
    """
    est, tru = _pair(estimates, truths)
    err = np.linalg.norm(est - tru, axis=1)
    norms = np.linalg.norm(tru, axis=1)
    keep = norms > 0
    mape = float(np.mean(err[keep] / norms[keep])) if keep.any() else math.nan
    mean = float(err.mean())
    return ErrorReport(
        ale=mean,
        rmse=float(np.sqrt(np.mean(err**2))),
        mae=mean,
        mape=mape,
        longitudinal_errors=tuple(np.sort(np.abs(est[:, 0] - tru[:, 0])).tolist()),
        n=int(err.size),
        mape_excluded=int((~keep).sum()),
    )


def percentile(values: Sequence[float], p: float) -> float:
    """Linear-interpolated order statistic (see module docstring).

    Raises:
        DomainError: if ``values`` is empty or ``p`` is outside [0, 1].
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise DomainError("percentile of an empty list")
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p must lie in [0, 1], got {p}")
    return float(np.quantile(v, p, method="linear"))


def empirical_cdf(values: Sequence[float], x: float) -> float:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise DomainError("cdf of an empty list")
    return float(np.count_nonzero(v <= x) / v.size)


def report_row(report: ErrorReport, method: str, scenario: str, run, extra: dict | None = None) -> dict:
    row = {
        "method": method,
        "scenario": scenario,
        "run": run,
        "ale": report.ale,
        "rmse": report.rmse,
        "mae": report.mae,
        "mape": report.mape,
        "p50_long": report.percentile(0.5),
        "p90_long": report.percentile(0.9),
    }
    if extra:
        row.update(extra)
    return row


def format_value(value) -> str:
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else str(value)
    return str(value)


def write_report_csv(rows: Iterable[dict], path, extra_columns: Sequence[str] = ()) -> int:
    """Write report rows; columns are :data:`CSV_COLUMNS` then ``extra_columns``.

    Floats are written with ``repr`` so identical inputs give identical bytes.

    Returns:
        Number of rows written.
    """
    columns = list(CSV_COLUMNS) + list(extra_columns)
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([format_value(row.get(c, "")) for c in columns])
            n += 1
    return n
