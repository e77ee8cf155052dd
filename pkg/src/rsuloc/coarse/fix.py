"""Coarse position fixes: build and solve the relaxation, package the result."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from rsuloc.coarse import ipm
from rsuloc.coarse.estimator import EstimatorInputs
from rsuloc.coarse.sdp import SdpSolution, build_sdp, solve_sdp_batch

# Normalized rank-1 gap above which a fix is treated as low confidence.
DEFAULT_GAP_THRESHOLD = 1e-2


@dataclass(frozen=True)
class PositionFix:
    """One coarse fix. ``theta_hat`` is returned as solved even when the
    relaxation is loose; ``low_confidence`` tells the filter to trust it less.
    """

    theta_hat: np.ndarray
    objective: float
    rank1_gap: float
    status: str
    t: float | None = None
    low_confidence: bool = False
    iterations: int = 0
    condition: float = float("nan")

    @property
    def usable(self) -> bool:
        return self.status in (ipm.OPTIMAL, ipm.MAX_ITER) and bool(np.all(np.isfinite(self.theta_hat)))


def geometry_condition(positions) -> float:
    """Smallest singular value of the centred RSU coordinates (m).

    Near zero for collinear RSUs, where the fix is ambiguous across the line.
    """
    p = np.asarray(positions, dtype=float)
    return float(np.linalg.svd(p - p.mean(axis=0), compute_uv=False)[-1])


def _to_fix(inputs: EstimatorInputs, sol: SdpSolution, gap_threshold: float) -> PositionFix:
    low = sol.status != ipm.OPTIMAL or sol.rank1_gap > gap_threshold
    return PositionFix(
        theta_hat=sol.theta_hat,
        objective=sol.objective,
        rank1_gap=sol.rank1_gap,
        status=sol.status,
        t=inputs.epoch.t,
        low_confidence=bool(low),
        iterations=sol.iterations,
        condition=geometry_condition(inputs.positions),
    )


def coarse_fix_batch(
    inputs: Sequence[EstimatorInputs],
    tol: float = 1e-7,
    max_iter: int = 100,
    gap_threshold: float = DEFAULT_GAP_THRESHOLD,
) -> list[PositionFix]:
    """Fixes for many epochs; problems of equal size are solved together."""
    problems = [build_sdp(x) for x in inputs]
    sols = solve_sdp_batch(problems, tol=tol, max_iter=max_iter)
    return [_to_fix(x, s, gap_threshold) for x, s in zip(inputs, sols)]


def coarse_fix(
    inputs: EstimatorInputs,
    tol: float = 1e-7,
    max_iter: int = 100,
    gap_threshold: float = DEFAULT_GAP_THRESHOLD,
) -> PositionFix:
    """Single-epoch fix."""
    return coarse_fix_batch([inputs], tol, max_iter, gap_threshold)[0]
