from __future__ import annotations

from types import SimpleNamespace

import numpy as np
import pytest

from rsuloc.errors import ConfigurationError, SequencingError
from rsuloc.tracking import (
    H,
    CvlcState,
    UkfConfig,
    cvlc_predict,
    filtered_position,
    run_filter,
    sigma_weights,
    transition_matrix,
    ukf_init,
    ukf_predict,
    ukf_step,
    ukf_update,
)


def kalman_step(mean, cov, z, dt, q, r):
    """Textbook linear Kalman predict + update (independent oracle)."""
    f = transition_matrix(dt)
    m = f @ mean
    p = f @ cov @ f.T + q
    s = H @ p @ H.T + r
    k = p @ H.T @ np.linalg.inv(s)
    m = m + k @ (z - H @ m)
    p = (np.eye(4) - k @ H) @ p
    return m, p


def test_cvlc_predict_examples():
    assert cvlc_predict(CvlcState(0, 0, 0, 6.944), 0.1) == CvlcState(0, 0, pytest.approx(0.6944), 6.944)
    s = CvlcState(3.0, 0.0, 2.0, 0.0)
    assert cvlc_predict(s, 0.1) == s


def test_init_examples():
    track = ukf_init((10.0, 3.5))
    assert track.mean.tolist() == [10.0, 0.0, 3.5, 0.0]
    assert np.array_equal(filtered_position(track), [10.0, 3.5])
    with pytest.raises(ConfigurationError):
        ukf_init((0, 0), z0=np.diag([1.0, -1.0, 1.0, 1.0]))


def test_filtered_position():
    track = ukf_init((0, 0))
    track = type(track)(np.array([1.0, 0.0, 2.0, 0.0]), track.covariance, 0.0, track.config)
    assert filtered_position(track).tolist() == [1.0, 2.0]


def test_config_accepts_diagonals():
    cfg = UkfConfig(q=[1, 2, 3, 4], r=[5, 6, 7, 8], z0=[1, 1, 1, 1])
    assert np.array_equal(cfg.q, np.diag([1.0, 2, 3, 4]))
    assert np.array_equal(cfg.r_meas, np.diag([5.0, 6.0]))
    with pytest.raises(ConfigurationError):
        UkfConfig(z0=np.zeros((4, 4)))


@pytest.mark.parametrize("alpha, kappa", [(1e-3, 0.0), (0.5, 1.0), (1.0, 0.0)])
def test_sigma_weights_sum_to_one(alpha, kappa):
    wm, wc, _ = sigma_weights(4, alpha, 2.0, kappa)
    assert wm.sum() == pytest.approx(1.0, abs=1e-9)
    assert wc.sum() == pytest.approx(1.0 + (1.0 - alpha**2 + 2.0), rel=1e-9)


def test_matches_kalman_filter(rng):
    cfg = UkfConfig(q=np.diag([0.1, 0.5, 0.1, 0.5]), r=np.diag([2.0, 1.5, 1.0, 1.0]), z0=np.diag([4.0, 9.0, 1.0, 1.0]))
    track = ukf_init((0.0, 1.75), config=cfg, t=0.0)
    m, p = track.mean.copy(), track.covariance.copy()
    worst = 0.0
    for _ in range(1000):
        dt = float(rng.uniform(0.05, 0.2))
        z = rng.normal([m[0], m[2]], 3.0)
        track = ukf_step(track, z, dt)
        m, p = kalman_step(m, p, z, dt, cfg.q, cfg.r_meas)
        worst = max(worst, np.abs(track.mean - m).max(), np.abs(track.covariance - p).max())
    assert worst <= 1e-9


def test_zero_noise_converges_to_truth():
    cfg = UkfConfig(q=np.zeros((4, 4)), r=np.zeros((4, 4)), z0=np.eye(4))
    track = ukf_init((0.0, 1.75), t=0.0, config=cfg)
    for k in range(1, 11):
        t = 0.1 * k
        track = ukf_step(track, (10.0 * t, 1.75 + 0.5 * t), 0.1)
    assert np.allclose(filtered_position(track), (10.0, 2.25), atol=1e-6)


def test_missing_fix_grows_trace():
    track = ukf_init((0.0, 0.0), t=0.0)
    before = np.trace(track.covariance)
    after = ukf_step(track, None, 0.1)
    assert np.trace(after.covariance) > before
    assert after.misses == 1


def test_predict_never_shrinks_trace(rng):
    track = ukf_init((0.0, 0.0), t=0.0, config=UkfConfig(q=np.zeros((4, 4))))
    for _ in range(50):
        nxt = ukf_predict(track, float(rng.uniform(0.01, 1.0)))
        assert np.trace(nxt.covariance) >= np.trace(track.covariance) - 1e-12
        track = nxt


def test_covariance_stays_positive_definite(rng):
    track = ukf_init((0.0, 0.0), t=0.0)
    for _ in range(10_000):
        z = None if rng.random() < 0.1 else rng.normal(filtered_position(track), 2.0)
        track = ukf_step(track, z, 0.1)
        if track.misses >= track.config.reset_after:
            track = ukf_step(track, filtered_position(track), 0.1)
        assert np.linalg.eigvalsh(track.covariance).min() > 0


def test_sequencing_errors():
    track = ukf_init((0.0, 0.0), t=1.0)
    with pytest.raises(SequencingError):
        ukf_step(track, (1.0, 0.0), 0.0)
    with pytest.raises(SequencingError):
        ukf_step(track, (1.0, 0.0), -0.1)
    stale = SimpleNamespace(theta_hat=np.array([1.0, 0.0]), t=0.9)
    with pytest.raises(SequencingError):
        ukf_step(track, stale, 0.1)


def test_low_confidence_fix_moves_less():
    base = ukf_init((0.0, 0.0), t=0.0)
    predicted = ukf_predict(base, 0.1)
    sure = ukf_update(predicted, (5.0, 0.0))
    unsure = ukf_update(predicted, (5.0, 0.0), low_confidence=True)
    assert abs(unsure.mean[0]) < abs(sure.mean[0])


def test_reset_after_misses():
    cfg = UkfConfig(reset_after=3)
    track = ukf_init((0.0, 0.0), t=0.0, config=cfg)
    for _ in range(3):
        track = ukf_step(track, None, 0.1)
    track = ukf_step(track, (100.0, 5.0), 0.1)
    assert track.mean.tolist() == [100.0, 0.0, 5.0, 0.0]
    assert track.t == pytest.approx(0.4)


def test_run_filter_nan_before_first_fix():
    times = np.arange(5) * 0.1
    fixes = [None, None, (1.0, 1.0), (1.1, 1.0), None]
    out = run_filter(fixes, times)
    assert np.isnan(out[:2]).all()
    assert np.isfinite(out[2:]).all()
    assert out[2].tolist() == [1.0, 1.0]
