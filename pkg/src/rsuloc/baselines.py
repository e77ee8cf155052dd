"""Reference position estimators: ML (Gauss-Newton), WCL, LLS and WLLS.

All estimators read powers in the model convention of :mod:`rsuloc.channel`
and use a single assumed exponent (or a per-RSU array in epoch order).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from rsuloc.channel import ChannelParams
from rsuloc.dataproc import MatchedEpoch
from rsuloc.errors import DomainError
from rsuloc.plecal import biased_distance_estimate, crlb_distance_variance

ML_TRUE, WCL, LLS, WLLS = "ml_true", "wcl", "lls", "wlls"
# Ratio of smallest to largest singular value below which RSUs count as collinear.
COLLINEAR_RCOND = 1e-6


@dataclass(frozen=True)
class BaselineFix:
    method: str
    theta_hat: np.ndarray
    iterations: int = 0
    converged: bool = True
    t: float | None = None


def _gammas(epoch: MatchedEpoch, params: ChannelParams, gamma) -> np.ndarray:
    g = params.gamma if gamma is None else gamma
    return np.broadcast_to(np.asarray(g, dtype=float), (len(epoch),)).copy()


def ml_objective(theta, epoch: MatchedEpoch, params: ChannelParams, gamma=None) -> float:
    """Sum of squared log-model residuals."""
    r = _ml_residuals(np.asarray(theta, float), epoch.positions, epoch.powers, params, _gammas(epoch, params, gamma))
    return float(r @ r)


def _ml_residuals(theta, phi, powers, params, g):
    d = np.linalg.norm(theta - phi, axis=1)
    return powers - params.p0 - 10.0 * g * np.log10(d / params.d0)


def ml_true(
    epoch: MatchedEpoch,
    params: ChannelParams,
    init,
    gamma=None,
    max_iter: int = 50,
    tol: float = 1e-9,
) -> BaselineFix:
    """Gauss-Newton on the squared log-model residuals, with step halving.

    Experiments initialize at the true position, so this baseline is
    oracle-initialized.

    Raises:
        DomainError: if ``init`` coincides with an RSU.
    """
    phi, powers = epoch.positions, epoch.powers
    g = _gammas(epoch, params, gamma)
    theta = np.asarray(init, dtype=float).reshape(2).copy()
    if np.any(np.linalg.norm(theta - phi, axis=1) == 0):
        raise DomainError("init coincides with an RSU position")
    r = _ml_residuals(theta, phi, powers, params, g)
    cost = r @ r
    for it in range(max_iter):
        diff = theta - phi
        d2 = np.einsum("ij,ij->i", diff, diff)
        jac = -(10.0 * g / math.log(10.0))[:, None] * diff / d2[:, None]
        if np.linalg.matrix_rank(jac) < 2:
            return BaselineFix(ML_TRUE, theta, it, False, epoch.t)
        step = np.linalg.lstsq(jac, -r, rcond=None)[0]
        if np.linalg.norm(step) <= tol * (1.0 + np.linalg.norm(theta)):
            return BaselineFix(ML_TRUE, theta, it, True, epoch.t)
        alpha = 1.0
        while alpha > 1e-6:
            cand = theta + alpha * step
            if np.all(np.linalg.norm(cand - phi, axis=1) > 0):
                rc = _ml_residuals(cand, phi, powers, params, g)
                if rc @ rc <= cost:
                    break
            alpha *= 0.5
        else:
            return BaselineFix(ML_TRUE, theta, it + 1, True, epoch.t)
        theta, r, cost = cand, rc, rc @ rc
    return BaselineFix(ML_TRUE, theta, max_iter, False, epoch.t)


def wcl(epoch: MatchedEpoch, params: ChannelParams | None = None, gamma=None) -> BaselineFix:
    """Weighted centroid with weights ``1 / d_hat``."""
    params = params or ChannelParams()
    d = np.atleast_1d(biased_distance_estimate(epoch.powers, params.p0, params.d0, _gammas(epoch, params, gamma)))
    w = 1.0 / d
    theta = (w[:, None] * epoch.positions).sum(axis=0) / w.sum()
    return BaselineFix(WCL, theta, 0, True, epoch.t)


def _linearize(epoch: MatchedEpoch, params: ChannelParams, gamma):
    """Subtract the nearest RSU's circle equation from the others.

    With ``u = theta - phi_r`` and ``psi_i = phi_i - phi_r`` the circles give
    ``2 psi_i' u = |psi_i|^2 + d_r^2 - d_i^2``.
    """
    phi = epoch.positions
    g = _gammas(epoch, params, gamma)
    d = np.atleast_1d(biased_distance_estimate(epoch.powers, params.p0, params.d0, g))
    ref = int(np.argmin(d))
    others = [i for i in range(len(d)) if i != ref]
    psi = phi[others] - phi[ref]
    a = 2.0 * psi
    b = np.einsum("ij,ij->i", psi, psi) + d[ref] ** 2 - d[others] ** 2
    return a, b, d, g, ref, others


def _collinear(a: np.ndarray) -> bool:
    if a.shape[0] < 2:
        return True
    sv = np.linalg.svd(a, compute_uv=False)
    return bool(sv[-1] <= COLLINEAR_RCOND * sv[0])


def _failed(method: str, epoch: MatchedEpoch) -> BaselineFix:
    return BaselineFix(method, np.full(2, np.nan), 0, False, epoch.t)


def lls(epoch: MatchedEpoch, params: ChannelParams, gamma=None) -> BaselineFix:
    """Linear least squares on the differenced range circles."""
    a, b, _, _, ref, _ = _linearize(epoch, params, gamma)
    if _collinear(a):
        return _failed(LLS, epoch)
    u = np.linalg.lstsq(a, b, rcond=None)[0]
    return BaselineFix(LLS, epoch.positions[ref] + u, 0, True, epoch.t)


def wlls(epoch: MatchedEpoch, params: ChannelParams, weights=None, gamma=None) -> BaselineFix:
    """Generalized least squares on the differenced range circles.

    By default the covariance of the right-hand side is built from the
    range CRLB: ``var(d_i^2) ~ 4 d_i^2 var(d_i)``, and differencing against
    the reference adds its variance to every row. ``weights`` (one per
    RSU, inverse variances of ``d_i^2``) overrides the CRLB values. With
    exactly three RSUs the system is square and WLLS equals LLS.
    """
    a, b, d, g, ref, others = _linearize(epoch, params, gamma)
    if _collinear(a):
        return _failed(WLLS, epoch)
    if weights is None:
        v = np.array([4.0 * d[i] ** 2 * crlb_distance_variance(params.sigma or 1.0, d[i], g[i]) for i in range(len(d))])
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != d.shape or np.any(w <= 0):
            raise DomainError("weights must be positive, one per RSU")
        v = 1.0 / w
    cov = np.diag(v[others]) + v[ref]
    ci_a = np.linalg.solve(cov, a)
    ci_b = np.linalg.solve(cov, b)
    u = np.linalg.solve(a.T @ ci_a, a.T @ ci_b)
    return BaselineFix(WLLS, epoch.positions[ref] + u, 0, True, epoch.t)
