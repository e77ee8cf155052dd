from __future__ import annotations

import numpy as np
import pytest

from helpers import TRIANGLE, make_epoch
from rsuloc.channel import ChannelParams
from rsuloc.coarse import ipm
from rsuloc.coarse.estimator import EstimatorInputs, GridBox, grid_argmin, nonconvex_objective
from rsuloc.coarse.fix import coarse_fix, coarse_fix_batch, geometry_condition
from rsuloc.coarse.sdp import X11, build_sdp, lmi_value, solve_sdp

P0 = -30.0


def _inputs(vehicle, positions=TRIANGLE, noise=None, penalty="chebyshev", gamma=3.0):
    return EstimatorInputs(make_epoch(positions, vehicle, gamma=gamma, noise=noise), P0, 1.0, gamma, penalty)


def test_problem_structure_three_rsus():
    prob = build_sdp(_inputs((50.0, 3.0)))
    assert prob.n_epigraph_vars == 1
    assert prob.n_affine == 3 and prob.n_lmi2 == 3 and prob.n_lmi3 == 1
    assert prob.block_sizes == (1, 1, 1) + (1, 1, 1) + (2, 2, 2) + (3,)


def test_problem_structure_four_rsus():
    pos = TRIANGLE + ((60.0, -1.0),)
    prob = build_sdp(_inputs((50.0, 3.0), pos))
    assert prob.n_affine == 4 and prob.n_lmi2 == 4 and prob.n_lmi3 == 1
    assert prob.block_sizes.count(2) == 4 and prob.block_sizes.count(3) == 1


def test_noiseless_recovery():
    truth = np.array([47.0, 5.25])
    sol = solve_sdp(build_sdp(_inputs(truth)))
    assert sol.status == ipm.OPTIMAL
    assert np.linalg.norm(sol.theta_hat - truth) < 1e-2
    assert sol.rank1_gap <= 1e-4
    assert sol.objective == pytest.approx(1.0, abs=1e-5)


def test_contradictory_constraint_is_infeasible():
    # X11 >= theta_1^2 >= 0 cannot also satisfy X11 <= -1
    prob = build_sdp(_inputs((50.0, 3.0))).with_linear_constraint({X11: -1.0}, -1.0)
    sol = solve_sdp(prob)
    assert sol.status == ipm.INFEASIBLE


@pytest.mark.parametrize("seed", range(10))
def test_solution_feasible_and_lower_bound(seed):
    rng = np.random.default_rng(seed)
    truth = (rng.uniform(5, 115), rng.uniform(0, 7))
    x = _inputs(truth, noise=rng.normal(0, 2, 3))
    prob = build_sdp(x)
    sol = solve_sdp(prob)
    assert sol.status == ipm.OPTIMAL
    assert np.linalg.eigvalsh(lmi_value(prob, sol.y)).min() >= -1e-6
    # X >= theta theta'
    gap = sol.x_hat - np.outer(sol.theta_hat, sol.theta_hat)
    assert np.linalg.eigvalsh(gap).min() >= -1e-6 * prob.scale**2
    _, best = grid_argmin(nonconvex_objective, x, GridBox(0, 120, 0, 14), 0.5)
    assert sol.objective <= best + 1e-5


@pytest.mark.parametrize("penalty", ["lp(1)", "lp(2)"])
def test_lp_penalties_recover_noiseless(penalty):
    truth = np.array([80.0, 1.75])
    sol = solve_sdp(build_sdp(_inputs(truth, penalty=penalty)))
    assert sol.status == ipm.OPTIMAL
    assert np.linalg.norm(sol.theta_hat - truth) < 1e-2


@pytest.mark.parametrize("seed", range(4))
def test_matches_cvxpy(seed):
    pytest.importorskip("cvxpy")
    from rsuloc.coarse.external import solve_sdp_external

    rng = np.random.default_rng(100 + seed)
    x = _inputs((rng.uniform(5, 115), rng.uniform(0, 7)), noise=rng.normal(0, 2, 3))
    prob = build_sdp(x)
    ours = solve_sdp(prob, tol=1e-9)
    ref = solve_sdp_external(prob, solver="CLARABEL")
    assert ref.status == ipm.OPTIMAL
    assert ours.objective == pytest.approx(ref.objective, rel=1e-5)


def test_external_reports_infeasible():
    pytest.importorskip("cvxpy")
    from rsuloc.coarse.external import solve_sdp_external

    prob = build_sdp(_inputs((50.0, 3.0))).with_linear_constraint({X11: -1.0}, -1.0)
    assert solve_sdp_external(prob, solver="CLARABEL").status == ipm.INFEASIBLE


def test_symmetric_layout_lands_on_bisector():
    fix = coarse_fix(_inputs((60.0, 4.0)))
    assert abs(fix.theta_hat[0] - 60.0) < 1e-2


def test_fix_metadata():
    x = _inputs((30.0, 2.0))
    fix = coarse_fix(x)
    assert fix.usable and not fix.low_confidence
    assert fix.t == x.epoch.t
    assert fix.condition == pytest.approx(geometry_condition(TRIANGLE))


def test_collinear_flagged_by_condition():
    pos = ((0.0, -1.0), (60.0, -1.0), (120.0, -1.0))
    fix = coarse_fix(_inputs((50.0, 3.0), pos))
    assert fix.condition < 1e-9
    assert geometry_condition(TRIANGLE) > 1.0


def test_batch_equals_single(rng):
    xs = [_inputs((rng.uniform(0, 120), rng.uniform(0, 7)), noise=rng.normal(0, 2, 3)) for _ in range(6)]
    batch = coarse_fix_batch(xs)
    for x, b in zip(xs, batch):
        s = coarse_fix(x)
        assert np.allclose(s.theta_hat, b.theta_hat, atol=1e-6)


def test_noisy_error_magnitude(rng):
    params = ChannelParams(sigma=2.0)
    errs = []
    xs, truths = [], []
    for _ in range(100):
        truth = np.array([rng.uniform(0, 120), rng.uniform(0, 7)])
        xs.append(EstimatorInputs(make_epoch(TRIANGLE, truth, params, noise=rng.normal(0, 2, 3)), P0, 1.0, 3.0))
        truths.append(truth)
    for f, truth in zip(coarse_fix_batch(xs), truths):
        errs.append(np.linalg.norm(f.theta_hat - truth))
    # coarse fixes are metre-level, not centimetre and not tens of metres
    assert 1.0 < np.mean(errs) < 10.0
