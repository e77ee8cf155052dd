"""Constant-velocity lane-changing (CVLC) model and unscented Kalman filter.

State order is ``[x, vx, y, vy]``: each position is followed by its own
velocity, and the two positions are the two coordinates of a position fix,
in fix order. The transition is the constant-velocity matrix with ``dt``
coupling each position to its velocity; the observation is position only.

Measurement noise: the configured ``r`` is 4x4 (one entry per state); its
leading 2x2 block is used for the 2D position observation.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from rsuloc.errors import ConfigurationError, SequencingError

Z0_DEFAULT = np.diag([0.25, 0.4, 0.2, 0.01])
R_DEFAULT = np.diag([2.2, 1.2, 0.9, 0.5])
Q_DEFAULT = np.eye(4)
H = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]])


def _as_matrix(value, name: str) -> np.ndarray:
    m = np.asarray(value, dtype=float)
    if m.ndim == 1:
        m = np.diag(m)
    if m.shape != (4, 4):
        raise ConfigurationError(f"{name} must be 4x4 or a length-4 diagonal, got shape {m.shape}")
    return m


def _check_psd(m: np.ndarray, name: str, strict: bool) -> None:
    if not np.allclose(m, m.T, atol=1e-12):
        raise ConfigurationError(f"{name} must be symmetric")
    lam = np.linalg.eigvalsh(m)
    if (strict and lam.min() <= 0) or lam.min() < 0:
        raise ConfigurationError(f"{name} must be positive {'definite' if strict else 'semidefinite'}")


@dataclass(frozen=True)
class UkfConfig:
    """Filter tuning.

    ``alpha``, ``beta``, ``kappa`` shape the sigma-point set; ``inflation``
    scales the measurement covariance of low-confidence fixes; the track is
    re-initialized on the first fix after ``reset_after`` consecutive misses.
    """

    q: np.ndarray = field(default_factory=lambda: Q_DEFAULT.copy())
    r: np.ndarray = field(default_factory=lambda: R_DEFAULT.copy())
    z0: np.ndarray = field(default_factory=lambda: Z0_DEFAULT.copy())
    alpha: float = 1e-3
    beta: float = 2.0
    kappa: float = 0.0
    inflation: float = 10.0
    reset_after: int = 10
    speed_cap: float = 70.0

    def __post_init__(self):
        for name in ("q", "r", "z0"):
            object.__setattr__(self, name, _as_matrix(getattr(self, name), name))
        _check_psd(self.q, "q", strict=False)
        _check_psd(self.r, "r", strict=False)
        _check_psd(self.z0, "z0", strict=True)
        if not self.alpha > 0:
            raise ConfigurationError("alpha must be > 0")
        if not self.inflation >= 1:
            raise ConfigurationError("inflation must be >= 1")

    @property
    def r_meas(self) -> np.ndarray:
        return self.r[:2, :2]


@dataclass(frozen=True)
class CvlcState:
    x: float
    vx: float
    y: float
    vy: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.vx, self.y, self.vy])

    @classmethod
    def from_array(cls, a) -> "CvlcState":
        a = np.asarray(a, dtype=float)
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))


def transition_matrix(dt: float) -> np.ndarray:
    f = np.eye(4)
    f[0, 1] = dt
    f[2, 3] = dt
    return f


def cvlc_predict(state: CvlcState, dt: float) -> CvlcState:
    """Advance positions by velocity * dt; velocities unchanged."""
    return CvlcState(state.x + state.vx * dt, state.vx, state.y + state.vy * dt, state.vy)


@dataclass(frozen=True)
class TrackState:
    mean: np.ndarray
    covariance: np.ndarray
    t: float
    config: UkfConfig = field(default_factory=UkfConfig)
    misses: int = 0

    @property
    def state(self) -> CvlcState:
        return CvlcState.from_array(self.mean)

    @property
    def q(self) -> np.ndarray:
        return self.config.q

    @property
    def r_meas(self) -> np.ndarray:
        return self.config.r_meas


def ukf_init(first_fix, z0=None, t: float | None = None, config: UkfConfig | None = None) -> TrackState:
    """Start a track at a fix with zero velocity and covariance ``z0``."""
    config = config or UkfConfig()
    if z0 is not None:
        z0 = _as_matrix(z0, "z0")
        _check_psd(z0, "z0", strict=True)
        config = replace(config, z0=z0)
    pos = _fix_position(first_fix)
    if t is None:
        t = float(getattr(first_fix, "t", 0.0))
    mean = np.array([pos[0], 0.0, pos[1], 0.0])
    return TrackState(mean, config.z0.copy(), float(t), config)


def _fix_position(fix) -> np.ndarray:
    pos = getattr(fix, "theta_hat", fix)
    return np.asarray(pos, dtype=float).reshape(2)


def _sqrt_psd(p: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(p)
    except np.linalg.LinAlgError:
        lam, vec = np.linalg.eigh(0.5 * (p + p.T))
        return vec * np.sqrt(np.clip(lam, 0.0, None))


def sigma_weights(n: int, alpha: float, beta: float, kappa: float):
    """Scaled sigma-point weights (mean, covariance) and spread factor."""
    lam = alpha * alpha * (n + kappa) - n
    c = n + lam
    wm = np.full(2 * n + 1, 0.5 / c)
    wc = wm.copy()
    wm[0] = lam / c
    wc[0] = lam / c + (1.0 - alpha * alpha + beta)
    return wm, wc, c


def unscented_transform(
    mean,
    cov,
    fn: Callable[[np.ndarray], np.ndarray],
    config: UkfConfig,
    increment: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
):
    """Propagate (mean, cov) through ``fn``.

    Outputs are handled as deviations from ``fn(mean)``; with a tiny
    ``alpha`` the weights are of order ``1/alpha**2`` and a plain weighted
    sum of outputs would cancel catastrophically. ``increment(mean, offset)``
    may return ``fn(mean + offset) - fn(mean)`` directly; for linear models
    this is ``fn(offset)`` and avoids rounding ``mean + offset``.

    Returns:
        (output mean, output covariance, input offsets, output deviations, wc)
    """
    n = mean.size
    wm, wc, c = sigma_weights(n, config.alpha, config.beta, config.kappa)
    root = _sqrt_psd(c * cov)
    offsets = np.concatenate([np.zeros((1, n)), root.T, -root.T])
    out0 = fn(mean)
    if increment is None:
        dev0 = np.array([fn(mean + d) for d in offsets[1:]]) - out0
    else:
        dev0 = np.array([increment(mean, d) for d in offsets[1:]])
    shift = wm[1:] @ dev0
    y_dev = np.concatenate([[np.zeros_like(out0)], dev0]) - shift
    y_cov = (wc[:, None] * y_dev).T @ y_dev
    return out0 + shift, 0.5 * (y_cov + y_cov.T), offsets, y_dev, wc


def _solve_gain(pxz: np.ndarray, s: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(s.T, pxz.T).T
    except np.linalg.LinAlgError:
        return pxz @ np.linalg.pinv(s)


def ukf_predict(track: TrackState, dt: float) -> TrackState:
    if not dt > 0:
        raise SequencingError(f"dt must be > 0, got {dt}")
    f = transition_matrix(dt)
    mean, cov, *_ = unscented_transform(
        track.mean, track.covariance, lambda s: f @ s, track.config, lambda _, d: f @ d
    )
    cov = cov + track.config.q
    return replace(track, mean=mean, covariance=0.5 * (cov + cov.T), t=track.t + dt)


def ukf_update(track: TrackState, z, low_confidence: bool = False) -> TrackState:
    cfg = track.config
    r = cfg.r_meas * (cfg.inflation if low_confidence else 1.0)
    z_mean, s, x_dev, z_dev, wc = unscented_transform(
        track.mean, track.covariance, lambda s_: H @ s_, cfg, lambda _, d: H @ d
    )
    s = s + r
    # Sigma offsets are symmetric, so they are already deviations from the mean.
    pxz = (wc[:, None] * x_dev).T @ z_dev
    k = _solve_gain(pxz, s)
    mean = track.mean + k @ (np.asarray(z, dtype=float) - z_mean)
    cov = track.covariance - k @ s @ k.T
    cov = 0.5 * (cov + cov.T)
    mean = _cap_speed(mean, cfg.speed_cap)
    return replace(track, mean=mean, covariance=cov, misses=0)


def _cap_speed(mean: np.ndarray, cap: float) -> np.ndarray:
    mean = mean.copy()
    mean[[1, 3]] = np.clip(mean[[1, 3]], -cap, cap)
    return mean


def ukf_step(track: TrackState, fix, dt: float) -> TrackState:
    """One filter cycle: predict over ``dt`` then update with ``fix``.

    ``fix`` may be ``None`` (no usable measurement: predict only), a bare
    2D position, or any object with ``theta_hat`` and optionally ``t`` and
    ``low_confidence``.

    Raises:
        SequencingError: if the fix timestamp is not ``track.t + dt``.
    """
    if not dt > 0:
        raise SequencingError(f"non-monotone step dt={dt}")
    if fix is not None and getattr(fix, "t", None) is not None:
        if abs(fix.t - (track.t + dt)) > 1e-6 * max(1.0, abs(fix.t)):
            raise SequencingError(f"fix at t={fix.t} does not follow track t={track.t} + dt={dt}")
    if fix is None:
        predicted = ukf_predict(track, dt)
        return replace(predicted, misses=track.misses + 1)
    if track.misses >= track.config.reset_after:
        return ukf_init(fix, t=track.t + dt, config=track.config)
    predicted = ukf_predict(track, dt)
    return ukf_update(predicted, _fix_position(fix), bool(getattr(fix, "low_confidence", False)))


def filtered_position(track: TrackState) -> np.ndarray:
    return np.array([track.mean[0], track.mean[2]])


def run_filter(
    fixes: Sequence,
    times: Sequence[float],
    config: UkfConfig | None = None,
) -> np.ndarray:
    """Filter a fix sequence aligned with ``times``; ``None`` marks a miss.

    Returns:
        (K, 2) filtered positions; rows before the first fix are NaN.
    """
    config = config or UkfConfig()
    out = np.full((len(times), 2), np.nan)
    track = None
    for k, (fix, t) in enumerate(zip(fixes, times)):
        if track is None:
            if fix is None:
                continue
            track = ukf_init(fix, t=t, config=config)
        else:
            track = ukf_step(track, fix, t - track.t)
        out[k] = filtered_position(track)
    return out
