from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import TRIANGLE, make_epoch
from rsuloc.channel import ChannelParams, noiseless_rss
from rsuloc.coarse.estimator import (
    EstimatorInputs,
    GridBox,
    Penalty,
    beta_squared,
    grid_argmin,
    grid_oracle,
    log_objective,
    nonconvex_objective,
    residual_tilde,
)
from rsuloc.errors import DomainError, UnderdeterminedError

P0 = -30.0


def test_beta_squared_examples():
    assert beta_squared(P0, P0, 3.0) == 1.0
    assert beta_squared(P0 + 5 * 3.0, P0, 3.0) == pytest.approx(10.0)
    p = float(noiseless_rss(ChannelParams(gamma=3.3), 27.0))
    assert beta_squared(p, P0, 3.3) == pytest.approx(27.0**2, rel=1e-12)
    assert beta_squared(P0, P0, 3.0, d0=2.0) == 4.0
    with pytest.raises(DomainError):
        beta_squared(P0, P0, 0.0)


def test_residual_examples():
    assert residual_tilde((3, 4), (0, 0), 25.0) == 1.0
    assert residual_tilde((2, 0), (0, 0), 1.0) == 4.0
    assert residual_tilde((1, 0), (0, 0), 4.0) == 4.0
    with pytest.raises(DomainError):
        residual_tilde((1, 1), (1, 1), 1.0)


@given(
    theta=st.tuples(st.floats(-100, 100), st.floats(-100, 100)),
    phi=st.tuples(st.floats(-100, 100), st.floats(-100, 100)),
    beta2=st.floats(1e-2, 1e4),
)
@settings(max_examples=200, deadline=None)
def test_residual_log_identity(theta, phi, beta2):
    d2 = (theta[0] - phi[0]) ** 2 + (theta[1] - phi[1]) ** 2
    if d2 < 1e-6:
        return
    r = residual_tilde(theta, phi, beta2)
    assert r >= 1.0
    assert np.log10(r) == pytest.approx(abs(np.log10(d2 / beta2)), abs=1e-9)


def test_inputs_validation():
    epoch = make_epoch(TRIANGLE[:2], (50, 2))
    with pytest.raises(UnderdeterminedError):
        EstimatorInputs(epoch, P0, 1.0, 3.0)
    epoch = make_epoch(TRIANGLE, (50, 2))
    with pytest.raises(DomainError):
        EstimatorInputs(epoch, P0, 1.0, [3.0, 3.0])
    with pytest.raises(DomainError):
        EstimatorInputs(epoch, P0, 1.0, 7.0)


def test_objective_at_truth_is_one():
    x = EstimatorInputs(make_epoch(TRIANGLE, (40.0, 3.0)), P0, 1.0, 3.0)
    assert nonconvex_objective((40.0, 3.0), x) == pytest.approx(1.0, abs=1e-12)
    assert log_objective((40.0, 3.0), x) == pytest.approx(0.0, abs=1e-10)
    assert nonconvex_objective((400.0, 300.0), x) > 1.0


@pytest.mark.parametrize("text, kind, p", [("chebyshev", "chebyshev", None), ("lp(1)", "lp", 1.0), ("l2", "lp", 2.0)])
def test_penalty_parse(text, kind, p):
    pen = Penalty.parse(text)
    assert pen.kind == kind and pen.p == p


def test_penalty_rejects_unknown():
    with pytest.raises(DomainError):
        Penalty.parse("huber")
    with pytest.raises(DomainError):
        Penalty("lp", 3)


def test_grid_oracle_noiseless_within_step():
    truth = np.array([37.3, 4.1])
    x = EstimatorInputs(make_epoch(TRIANGLE, truth), P0, 1.0, 3.0)
    pt = grid_oracle(x, GridBox(0, 120, 0, 14), 0.25)
    assert np.all(np.abs(pt - truth) <= 0.25)


def test_grid_oracle_beats_random_probes(rng):
    noise = rng.normal(0, 2.0, 3)
    x = EstimatorInputs(make_epoch(TRIANGLE, (70.0, 5.0), noise=noise), P0, 1.0, 3.0)
    box = GridBox(0, 120, 0, 14)
    _, best = grid_argmin(nonconvex_objective, x, box, 0.25)
    probes = np.column_stack([rng.uniform(0, 120, 1000), rng.uniform(0, 14, 1000)])
    assert best <= nonconvex_objective(probes, x).min() + 0.05


def test_grid_rejects_empty():
    with pytest.raises(DomainError):
        GridBox(1, 0, 0, 1).points(0.5)
    with pytest.raises(DomainError):
        GridBox(0, 1, 0, 1).points(0.0)


def test_grid_skips_rsu_positions():
    x = EstimatorInputs(make_epoch(((0, 0), (2, 0), (0, 2)), (1, 1)), P0, 1.0, 3.0)
    pt, _ = grid_argmin(nonconvex_objective, x, GridBox(0, 2, 0, 2), 1.0)
    assert pt.tolist() == [1.0, 1.0]


@pytest.mark.parametrize("seed", range(5))
def test_log_and_ratio_forms_share_argmin(seed):
    rng = np.random.default_rng(seed)
    truth = (rng.uniform(0, 120), rng.uniform(0, 7))
    x = EstimatorInputs(make_epoch(TRIANGLE, truth, noise=rng.normal(0, 2, 3)), P0, 1.0, 3.0)
    box = GridBox(0, 120, 0, 14)
    a, _ = grid_argmin(nonconvex_objective, x, box, 0.5)
    b, _ = grid_argmin(log_objective, x, box, 0.5)
    assert a.tolist() == b.tolist()
