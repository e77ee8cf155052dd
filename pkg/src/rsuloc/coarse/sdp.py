"""Semidefinite relaxation of the ratio-residual estimator.

For RSUs ``phi_i`` with squared range estimates ``beta_i^2`` the relaxed
problem (Chebyshev penalty) is::

    minimize    t
    subject to  mu_i <= t
                tr(X) - 2 phi_i' theta + k_i <= beta_i^2 mu_i
                [[tr(X) - 2 phi_i' theta + k_i, beta_i], [beta_i, mu_i]] >= 0
                [[X, theta], [theta', 1]] >= 0

with ``k_i = |phi_i|^2`` and ``beta_i`` the positive root. Before solving, the
geometry is translated to the RSU centroid and divided by a length scale.
That change of variables maps feasible sets onto each other exactly (the
lifted matrix ``X - theta theta'`` is invariant under translation and scales
with the square of the length), so it only improves conditioning.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from rsuloc.coarse import ipm
from rsuloc.coarse.estimator import CHEBYSHEV, EstimatorInputs, Penalty
from rsuloc.errors import UnderdeterminedError

THETA = (0, 1)
X11, X12, X22 = 2, 3, 4
MU0 = 5


@dataclass(frozen=True)
class SdpProblem:
    """An LMI problem ``min c.y  s.t.  F0 + sum_j y_j F_j >= 0`` plus its geometry.

    Variables (normalized units): ``theta`` (2), ``X11, X12, X22``, ``mu`` (N)
    and, except for the l1 penalty, one epigraph scalar ``t``.
    ``block_sizes`` lists the diagonal blocks of the assembled LMI in order:
    epigraph block(s), N affine 1x1 blocks, N 2x2 blocks, the 3x3 block,
    then any extra 1x1 constraints.
    """

    c: np.ndarray
    f0: np.ndarray
    f: np.ndarray
    block_sizes: tuple[int, ...]
    n_rsus: int
    penalty: Penalty
    center: np.ndarray
    scale: float
    phi: np.ndarray
    beta2: np.ndarray
    n_extra: int = 0

    @property
    def n_vars(self) -> int:
        return self.c.size

    @property
    def n_epigraph_vars(self) -> int:
        return self.n_vars - MU0 - self.n_rsus

    @property
    def n_epigraph_constraints(self) -> int:
        if self.penalty.kind == CHEBYSHEV:
            return self.n_rsus
        return 0 if self.penalty.p == 1 else 1

    @property
    def n_affine(self) -> int:
        return self.n_rsus

    @property
    def n_lmi2(self) -> int:
        return self.n_rsus

    @property
    def n_lmi3(self) -> int:
        return 1

    def shape_key(self) -> tuple:
        return (self.block_sizes, self.n_vars)

    def with_linear_constraint(self, coeffs: dict[int, float], const: float) -> "SdpProblem":
        """Append ``const + sum coeffs[j] * y_j >= 0`` (normalized variables)."""
        n = self.f0.shape[0]
        f0 = np.zeros((n + 1, n + 1))
        f0[:n, :n] = self.f0
        f0[n, n] = const
        f = np.zeros((self.n_vars, n + 1, n + 1))
        f[:, :n, :n] = self.f
        for j, a in coeffs.items():
            f[j, n, n] = a
        return replace(
            self,
            f0=f0,
            f=f,
            block_sizes=self.block_sizes + (1,),
            n_extra=self.n_extra + 1,
        )


@dataclass(frozen=True)
class SdpSolution:
    """Relaxed-problem output in original (metre) units.

    ``rank1_gap`` is the spectral norm of ``X - theta theta'`` in the
    normalized frame (divided by the squared length scale), so it is
    dimensionless and comparable across geometries.
    """

    theta_hat: np.ndarray
    x_hat: np.ndarray
    mu_hat: np.ndarray
    objective: float
    rank1_gap: float
    status: str
    iterations: int = 0
    t_hat: float | None = None
    y: np.ndarray = field(default=None, repr=False)


def _normalization(phi: np.ndarray, beta2: np.ndarray) -> tuple[np.ndarray, float]:
    center = phi.mean(axis=0)
    spread = np.linalg.norm(phi - center, axis=1).max()
    scale = float(max(spread, np.sqrt(beta2.max()), 1e-9))
    return center, scale


def build_sdp(inputs: EstimatorInputs) -> SdpProblem:
    """Assemble the relaxed problem for one epoch."""
    phi_m = inputs.positions
    n = phi_m.shape[0]
    if n < 3:
        raise UnderdeterminedError(f"need at least 3 RSUs, got {n}")
    beta2_m = np.asarray(inputs.beta2, dtype=float)
    center, scale = _normalization(phi_m, beta2_m)
    phi = (phi_m - center) / scale
    beta2 = beta2_m / scale**2
    beta = np.sqrt(beta2)
    k = np.einsum("ij,ij->i", phi, phi)
    penalty = inputs.penalty

    if penalty.kind == CHEBYSHEV:
        epi_sizes = (1,) * n
        n_vars = MU0 + n + 1
    elif penalty.p == 1:
        epi_sizes = ()
        n_vars = MU0 + n
    else:
        epi_sizes = (n + 1,)
        n_vars = MU0 + n + 1
    t_idx = MU0 + n
    sizes = epi_sizes + (1,) * n + (2,) * n + (3,)
    dim = sum(sizes)
    f0 = np.zeros((dim, dim))
    f = np.zeros((n_vars, dim, dim))
    c = np.zeros(n_vars)

    o = 0
    if penalty.kind == CHEBYSHEV:
        c[t_idx] = 1.0
        for i in range(n):
            f[t_idx, o, o] = 1.0
            f[MU0 + i, o, o] = -1.0
            o += 1
    elif penalty.p == 1:
        c[MU0 : MU0 + n] = 1.0
    else:
        c[t_idx] = 1.0
        for i in range(n + 1):
            f[t_idx, o + i, o + i] = 1.0
        for i in range(n):
            f[MU0 + i, o + i, o + n] = 1.0
            f[MU0 + i, o + n, o + i] = 1.0
        o += n + 1

    for i in range(n):
        f0[o, o] = -k[i]
        f[X11, o, o] = -1.0
        f[X22, o, o] = -1.0
        f[THETA[0], o, o] = 2.0 * phi[i, 0]
        f[THETA[1], o, o] = 2.0 * phi[i, 1]
        f[MU0 + i, o, o] = beta2[i]
        o += 1

    for i in range(n):
        a, b = o, o + 1
        f0[a, a] = k[i]
        f0[a, b] = f0[b, a] = beta[i]
        f[X11, a, a] = 1.0
        f[X22, a, a] = 1.0
        f[THETA[0], a, a] = -2.0 * phi[i, 0]
        f[THETA[1], a, a] = -2.0 * phi[i, 1]
        f[MU0 + i, b, b] = 1.0
        o += 2

    g = o
    f0[g + 2, g + 2] = 1.0
    f[X11, g, g] = 1.0
    f[X12, g, g + 1] = f[X12, g + 1, g] = 1.0
    f[X22, g + 1, g + 1] = 1.0
    f[THETA[0], g, g + 2] = f[THETA[0], g + 2, g] = 1.0
    f[THETA[1], g + 1, g + 2] = f[THETA[1], g + 2, g + 1] = 1.0

    return SdpProblem(
        c=c,
        f0=f0,
        f=f,
        block_sizes=sizes,
        n_rsus=n,
        penalty=penalty,
        center=center,
        scale=scale,
        phi=phi_m,
        beta2=beta2_m,
    )


def _extract(problem: SdpProblem, y: np.ndarray, status: str, iterations: int) -> SdpSolution:
    n = problem.n_rsus
    th = y[list(THETA)]
    xn = np.array([[y[X11], y[X12]], [y[X12], y[X22]]])
    mu = y[MU0 : MU0 + n].copy()
    gap_mat = xn - np.outer(th, th)
    rank1_gap = float(np.abs(np.linalg.eigvalsh(gap_mat)).max())
    s, c = problem.scale, problem.center
    theta = c + s * th
    x_hat = s * s * xn + s * (np.outer(c, th) + np.outer(th, c)) + np.outer(c, c)
    t_hat = float(y[MU0 + n]) if y.size > MU0 + n else None
    return SdpSolution(
        theta_hat=theta,
        x_hat=x_hat,
        mu_hat=mu,
        objective=float(problem.penalty(mu)),
        rank1_gap=rank1_gap,
        status=str(status),
        iterations=int(iterations),
        t_hat=t_hat,
        y=y.copy(),
    )


def solve_sdp_batch(problems: list[SdpProblem], tol: float = 1e-7, max_iter: int = 100) -> list[SdpSolution]:
    """Solve many problems, batching those that share a shape."""
    out: list[SdpSolution | None] = [None] * len(problems)
    groups: dict[tuple, list[int]] = {}
    for i, p in enumerate(problems):
        groups.setdefault(p.shape_key(), []).append(i)
    for idx in groups.values():
        c = np.stack([problems[i].c for i in idx])
        f0 = np.stack([problems[i].f0 for i in idx])
        f = np.stack([problems[i].f for i in idx])
        res = ipm.solve_lmi_batch(c, f0, f, tol=tol, max_iter=max_iter)
        for j, i in enumerate(idx):
            out[i] = _extract(problems[i], res.y[j], res.status[j], res.iterations[j])
    return out


def solve_sdp(problem: SdpProblem, tol: float = 1e-7, max_iter: int = 100) -> SdpSolution:
    """Solve one relaxed problem with the embedded interior-point method.

    Never raises on numerical trouble; the status reports it instead.
    """
    return solve_sdp_batch([problem], tol=tol, max_iter=max_iter)[0]


def lmi_value(problem: SdpProblem, y: np.ndarray) -> np.ndarray:
    """Assembled ``F0 + sum y_j F_j`` at normalized variables ``y``."""
    return problem.f0 + np.einsum("j,jab->ab", y, problem.f)
