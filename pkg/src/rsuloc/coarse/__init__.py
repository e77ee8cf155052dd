"""Coarse positioning: ratio-residual estimator, its SDP relaxation and solver."""

from rsuloc.coarse.estimator import (
    EstimatorInputs,
    GridBox,
    Penalty,
    beta_squared,
    grid_oracle,
    log_objective,
    nonconvex_objective,
    residual_tilde,
)
from rsuloc.coarse.fix import PositionFix, coarse_fix, coarse_fix_batch, geometry_condition
from rsuloc.coarse.sdp import SdpProblem, SdpSolution, build_sdp, solve_sdp, solve_sdp_batch

__all__ = [
    "EstimatorInputs",
    "GridBox",
    "Penalty",
    "PositionFix",
    "SdpProblem",
    "SdpSolution",
    "beta_squared",
    "build_sdp",
    "coarse_fix",
    "coarse_fix_batch",
    "geometry_condition",
    "grid_oracle",
    "log_objective",
    "nonconvex_objective",
    "residual_tilde",
    "solve_sdp",
    "solve_sdp_batch",
]
