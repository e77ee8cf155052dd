"""Alternate backend: hand an assembled relaxation to cvxpy.

cvxpy is optional (``pip install artifact[cvxpy]``) and imported on first
use. The LMI is passed block by block so each PSD constraint stays small.
"""

from __future__ import annotations

import numpy as np

from rsuloc.coarse import ipm
from rsuloc.coarse.sdp import SdpProblem, SdpSolution, _extract


def _blocks(problem: SdpProblem):
    o = 0
    for size in problem.block_sizes:
        yield slice(o, o + size)
        o += size


def solve_sdp_external(problem: SdpProblem, solver: str | None = None, **solver_opts) -> SdpSolution:
    """Solve with cvxpy; same output contract as :func:`rsuloc.coarse.sdp.solve_sdp`.

    Raises:
        ImportError: if cvxpy is not installed.
    """
    import cvxpy as cp

    y = cp.Variable(problem.n_vars)
    constraints = []
    for sl in _blocks(problem):
        f0 = problem.f0[sl, sl]
        fj = problem.f[:, sl, sl]
        used = [j for j in range(problem.n_vars) if np.any(fj[j])]
        expr = f0 + sum(y[j] * fj[j] for j in used)
        if f0.shape[0] == 1:
            constraints.append(expr[0, 0] >= 0)
        else:
            constraints.append(expr >> 0)
    prob = cp.Problem(cp.Minimize(problem.c @ y), constraints)
    try:
        prob.solve(solver=solver, **solver_opts)
    except cp.error.SolverError:
        return _extract(problem, np.full(problem.n_vars, np.nan), ipm.FAILED, 0)
    status = {
        cp.OPTIMAL: ipm.OPTIMAL,
        cp.OPTIMAL_INACCURATE: ipm.MAX_ITER,
        cp.INFEASIBLE: ipm.INFEASIBLE,
        cp.INFEASIBLE_INACCURATE: ipm.INFEASIBLE,
    }.get(prob.status, ipm.FAILED)
    value = y.value if y.value is not None else np.full(problem.n_vars, np.nan)
    iters = prob.solver_stats.num_iters if prob.solver_stats and prob.solver_stats.num_iters else 0
    return _extract(problem, np.asarray(value, dtype=float), status, iters)
