"""Logarithm-free non-convex position estimator and its grid oracle.

A measured power is turned into a squared range estimate
``beta^2 = d0^2 * 10**((P - P0) / (5*gamma))`` and each RSU contributes the
residual ratio ``max(|theta-phi|^2 / beta^2, beta^2 / |theta-phi|^2)``. The
Chebyshev penalty takes the maximum over RSUs; minimizing it has the same
minimizers as minimizing the worst absolute log-model residual when all RSUs
share one exponent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from rsuloc.dataproc import MatchedEpoch
from rsuloc.errors import DomainError, UnderdeterminedError

CHEBYSHEV = "chebyshev"


@dataclass(frozen=True)
class Penalty:
    """Convex penalty on the residual vector: Chebyshev or an l_p norm."""

    kind: str = CHEBYSHEV
    p: float | None = None

    def __post_init__(self):
        if self.kind == CHEBYSHEV:
            return
        if self.kind != "lp" or self.p not in (1, 2):
            raise DomainError(f"unsupported penalty {self.kind!r} p={self.p}; use chebyshev, lp(1) or lp(2)")

    def __call__(self, values, axis=-1):
        values = np.asarray(values, dtype=float)
        if self.kind == CHEBYSHEV:
            return values.max(axis=axis)
        return np.linalg.norm(values, ord=self.p, axis=axis)

    @classmethod
    def parse(cls, text: "str | Penalty") -> "Penalty":
        if isinstance(text, Penalty):
            return text
        text = text.strip().lower()
        if text in (CHEBYSHEV, "linf", "l_inf"):
            return cls()
        if text.startswith("lp(") and text.endswith(")"):
            return cls("lp", float(text[3:-1]))
        if text in ("l1", "l2"):
            return cls("lp", float(text[1]))
        raise DomainError(f"unknown penalty {text!r}")


@dataclass(frozen=True)
class EstimatorInputs:
    """Everything the coarse estimator needs for one epoch.

    ``gamma_per_rsu`` follows the order of ``epoch.entries``.
    """

    epoch: MatchedEpoch
    p0: float
    d0: float
    gamma_per_rsu: np.ndarray
    penalty: Penalty = field(default_factory=Penalty)

    def __post_init__(self):
        g = np.asarray(self.gamma_per_rsu, dtype=float).reshape(-1)
        if g.size == 1 and len(self.epoch) > 1:
            g = np.full(len(self.epoch), g[0])
        object.__setattr__(self, "gamma_per_rsu", g)
        if len(self.epoch) < 3:
            raise UnderdeterminedError(f"need at least 3 RSUs, epoch has {len(self.epoch)}")
        if g.size != len(self.epoch):
            raise DomainError("gamma_per_rsu length does not match epoch")
        if np.any(g < 2.0) or np.any(g > 6.0):
            raise DomainError(f"path-loss exponents must lie in [2, 6], got {g}")
        if not self.d0 > 0:
            raise DomainError("d0 must be > 0")
        object.__setattr__(self, "penalty", Penalty.parse(self.penalty))

    @property
    def positions(self) -> np.ndarray:
        return self.epoch.positions

    @property
    def beta2(self) -> np.ndarray:
        return beta_squared(self.epoch.powers, self.p0, self.gamma_per_rsu, self.d0)


def beta_squared(power, p0: float, gamma, d0: float = 1.0):
    """Squared range estimate ``d0^2 * 10**((power - p0) / (5 gamma))`` in m^2."""
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma <= 0):
        raise DomainError(f"gamma must be > 0, got {gamma}")
    if not d0 > 0:
        raise DomainError(f"d0 must be > 0, got {d0}")
    out = d0**2 * np.power(10.0, (np.asarray(power, dtype=float) - p0) / (5.0 * gamma))
    return float(out) if out.ndim == 0 else out


def residual_tilde(theta, phi, beta2):
    """Ratio residual ``max(r, 1/r)`` with ``r = |theta - phi|^2 / beta2``.

    Broadcasts over leading dimensions of ``theta``/``phi``.
    """
    diff = np.asarray(theta, dtype=float) - np.asarray(phi, dtype=float)
    d2 = np.einsum("...i,...i->...", diff, diff)
    beta2 = np.asarray(beta2, dtype=float)
    if np.any(d2 == 0):
        raise DomainError("theta coincides with an RSU position")
    if np.any(beta2 <= 0):
        raise DomainError("beta2 must be > 0")
    ratio = d2 / beta2
    out = np.maximum(ratio, 1.0 / ratio)
    return float(out) if out.ndim == 0 else out


def _residuals(theta, inputs: EstimatorInputs) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    return residual_tilde(theta[..., None, :], inputs.positions, inputs.beta2)


def nonconvex_objective(theta, inputs: EstimatorInputs):
    """Penalty of the ratio-residual vector at ``theta`` (vectorized)."""
    out = inputs.penalty(np.asarray(_residuals(theta, inputs)), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def log_objective(theta, inputs: EstimatorInputs):
    """Worst absolute log-model residual ``max_i |10 g_i log10(d_i/d0) - (P_i - P0)|``."""
    theta = np.asarray(theta, dtype=float)
    d = np.linalg.norm(theta[..., None, :] - inputs.positions, axis=-1)
    if np.any(d == 0):
        raise DomainError("theta coincides with an RSU position")
    r = 10.0 * inputs.gamma_per_rsu * np.log10(d / inputs.d0) - (inputs.epoch.powers - inputs.p0)
    out = np.abs(r).max(axis=-1)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GridBox:
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def points(self, step: float) -> np.ndarray:
        """Grid points ordered by x then y (the tie-break order)."""
        if not step > 0:
            raise DomainError("grid step must be > 0")
        if self.x_max < self.x_min or self.y_max < self.y_min:
            raise DomainError("empty grid")
        xs = self.x_min + step * np.arange(int(np.floor((self.x_max - self.x_min) / step + 1e-9)) + 1)
        ys = self.y_min + step * np.arange(int(np.floor((self.y_max - self.y_min) / step + 1e-9)) + 1)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        return np.stack([gx.ravel(), gy.ravel()], axis=1)


def grid_argmin(objective, inputs: EstimatorInputs, bounds: GridBox, step: float, chunk: int = 200_000):
    """Exhaustive argmin of ``objective(points, inputs)`` over a grid.

    Grid points that coincide with an RSU are skipped; ties resolve to the
    smallest x, then smallest y.

    Returns:
        (point, value)
    """
    pts = bounds.points(step)
    on_rsu = (pts[:, None, :] == inputs.positions[None]).all(axis=-1).any(axis=1)
    pts = pts[~on_rsu]
    if pts.shape[0] == 0:
        raise DomainError("empty grid")
    best_val = np.inf
    best_pt = None
    for start in range(0, pts.shape[0], chunk):
        block = pts[start : start + chunk]
        vals = np.asarray(objective(block, inputs))
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best_val = float(vals[k])
            best_pt = block[k]
    return best_pt.copy(), best_val


def grid_oracle(inputs: EstimatorInputs, bounds: GridBox, step: float) -> np.ndarray:
    """Grid minimizer of :func:`nonconvex_objective`."""
    point, _ = grid_argmin(nonconvex_objective, inputs, bounds, step)
    return point
