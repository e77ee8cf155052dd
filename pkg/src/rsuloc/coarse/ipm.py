"""Dense primal-dual interior-point solver for small block-diagonal SDPs.

Problems are given in linear-matrix-inequality form::

    minimize    c @ y
    subject to  F0 + sum_j y[j] * F[j]  >= 0      (positive semidefinite)

where every ``F`` matrix shares one block-diagonal pattern (1x1 blocks play
the role of linear inequalities). Internally this is the dual of the
standard-form SDP ``min F0 . Z  s.t.  F[j] . Z = c[j], Z >= 0`` and is solved
with the HKM search direction and Mehrotra predictor-corrector steps from an
infeasible start.

The solver is vectorized over a batch of problems with identical shapes so
that a whole trajectory of epochs costs one pass of numpy calls per
iteration instead of one per epoch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OPTIMAL = "optimal"
MAX_ITER = "max_iter"
INFEASIBLE = "infeasible"
FAILED = "failed"

_STEP_FRACTION = 0.95
# Farkas ratio below which the LMI is declared infeasible.
_INFEASIBILITY_RATIO = 1e-8


@dataclass
class ConicResult:
    """Solver output for a batch.

    ``y`` holds the LMI-form variables, ``z`` the standard-form matrix
    (the Lagrange multiplier of the LMI) and ``s`` the LMI slack.
    """

    y: np.ndarray
    z: np.ndarray
    s: np.ndarray
    status: np.ndarray
    iterations: np.ndarray
    primal_objective: np.ndarray
    gap: np.ndarray
    residual: np.ndarray


def _max_step(m: np.ndarray, dm: np.ndarray) -> np.ndarray:
    """Largest alpha with ``m + alpha*dm`` PSD, for a stack of PD matrices."""
    chol = np.linalg.cholesky(m)
    inv = np.linalg.inv(chol)
    w = inv @ dm @ np.swapaxes(inv, -1, -2)
    w = 0.5 * (w + np.swapaxes(w, -1, -2))
    lam = np.linalg.eigvalsh(w)[..., 0]
    with np.errstate(divide="ignore"):
        return np.where(lam < 0.0, -1.0 / lam, np.inf)


def _inner(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...ij->...", a, b)


def _sym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def solve_lmi_batch(
    c: np.ndarray,
    f0: np.ndarray,
    f: np.ndarray,
    tol: float = 1e-7,
    max_iter: int = 100,
) -> ConicResult:
    """Solve a batch of LMI problems sharing one shape.

    Args:
        c: Objective vectors, shape (B, m).
        f0: Constant LMI terms, shape (B, n, n), symmetric.
        f: LMI coefficient matrices, shape (B, m, n, n), symmetric.
        tol: Relative duality-gap and residual tolerance.
        max_iter: Iteration cap.

    Returns:
        A :class:`ConicResult`; problems that hit ``max_iter`` keep their
        last iterate, numerical breakdown yields status ``failed``.
    """
    c = np.asarray(c, dtype=float)
    f0 = np.asarray(f0, dtype=float)
    f = np.asarray(f, dtype=float)
    batch, m = c.shape
    n = f0.shape[-1]
    eye = np.eye(n)

    a = -f
    a_flat = a.reshape(batch, m, n * n)
    b = -c
    norm_b = 1.0 + np.linalg.norm(b, axis=1)
    norm_c = 1.0 + np.linalg.norm(f0.reshape(batch, -1), axis=1)

    z = np.broadcast_to(eye, (batch, n, n)).copy()
    s = z.copy()
    y = np.zeros((batch, m))

    status = np.full(batch, MAX_ITER, dtype=object)
    iterations = np.zeros(batch, dtype=int)
    active = np.ones(batch, dtype=bool)
    gap = np.full(batch, np.inf)
    resid = np.full(batch, np.inf)

    for it in range(max_iter + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        zi, si, yi = z[idx], s[idx], y[idx]
        ai, af = a[idx], a_flat[idx]
        f0i, bi = f0[idx], b[idx]

        rp = bi - np.einsum("bmk,bk->bm", af, zi.reshape(idx.size, -1))
        rd = f0i - si - np.einsum("bm,bmij->bij", yi, ai)
        xs = _inner(zi, si)
        dobj = np.einsum("bm,bm->b", bi, yi)
        pobj = _inner(f0i, zi)
        rel_gap = np.abs(xs) / (1.0 + np.abs(dobj) + np.abs(pobj))
        pres = np.linalg.norm(rp, axis=1) / norm_b[idx]
        dres = np.linalg.norm(rd.reshape(idx.size, -1), axis=1) / norm_c[idx]
        gap[idx] = rel_gap
        resid[idx] = np.maximum(pres, dres)

        done = (rel_gap <= tol) & (pres <= tol) & (dres <= tol)
        # Farkas certificate: Z >= 0, A(Z) ~ 0, F0 . Z < 0.
        farkas = -pobj
        az = np.linalg.norm(bi - rp, axis=1)
        infeasible = (farkas > 0) & (az <= _INFEASIBILITY_RATIO * farkas) & ~done
        status[idx[done]] = OPTIMAL
        status[idx[infeasible]] = INFEASIBLE
        stop = done | infeasible
        active[idx[stop]] = False
        if it == max_iter:
            break
        keep = ~stop
        if not keep.any():
            break
        idx = idx[keep]
        zi, si, yi, ai, af = zi[keep], si[keep], yi[keep], ai[keep], af[keep]
        rp, rd, xs = rp[keep], rd[keep], xs[keep]
        iterations[idx] = it + 1

        try:
            s_inv = _sym(np.linalg.inv(si))
            za = zi[:, None] @ ai  # (k, m, n, n)
            p = za @ s_inv[:, None]
            mat = np.einsum("bjk,blk->bjl", af, p.reshape(idx.size, m, -1))
            mat = 0.5 * (mat + np.swapaxes(mat, -1, -2))
            x_rd_sinv = zi @ rd @ s_inv

            def direction(rc_sinv: np.ndarray):
                rhs = rp - np.einsum("bmk,bk->bm", af, (rc_sinv - x_rd_sinv).reshape(idx.size, -1))
                dy = np.linalg.solve(mat, rhs[..., None])[..., 0]
                ds = rd - np.einsum("bm,bmij->bij", dy, ai)
                dz = _sym(rc_sinv - zi @ ds @ s_inv)
                return dz, dy, ds

            mu = xs / n
            # Predictor (affine scaling).
            dz_a, dy_a, ds_a = direction(-zi)
            ap = np.minimum(1.0, _max_step(zi, dz_a))
            ad = np.minimum(1.0, _max_step(si, ds_a))
            mu_aff = _inner(zi + ap[:, None, None] * dz_a, si + ad[:, None, None] * ds_a) / n
            sigma = np.clip((mu_aff / mu) ** 3, 0.0, 1.0)
            # Corrector with second-order term.
            rc_sinv = (
                (sigma * mu)[:, None, None] * s_inv
                - zi
                - dz_a @ ds_a @ s_inv
            )
            dz, dy, ds = direction(rc_sinv)
            ap = np.minimum(1.0, _STEP_FRACTION * _max_step(zi, dz))
            ad = np.minimum(1.0, _STEP_FRACTION * _max_step(si, ds))
        except np.linalg.LinAlgError:
            _per_problem_fallback(idx, z, s, y, a, a_flat, f0, b, status, active)
            continue

        z[idx] = _sym(zi + ap[:, None, None] * dz)
        s[idx] = _sym(si + ad[:, None, None] * ds)
        y[idx] = yi + ad[:, None] * dy

    primal_objective = np.einsum("bm,bm->b", c, y)
    return ConicResult(
        y=y,
        z=z,
        s=s,
        status=status,
        iterations=iterations,
        primal_objective=primal_objective,
        gap=gap,
        residual=resid,
    )


def _per_problem_fallback(idx, z, s, y, a, a_flat, f0, b, status, active) -> None:
    """Mark problems whose linear algebra broke down.

    Only reached when a batched factorization raises; each member is checked
    individually so a single degenerate epoch does not poison its batch.
    """
    for k in idx:
        try:
            np.linalg.cholesky(z[k])
            np.linalg.cholesky(s[k])
            np.linalg.inv(s[k])
        except np.linalg.LinAlgError:
            status[k] = FAILED
            active[k] = False
    # Anything left active stalled for a different reason (singular Schur
    # complement); it cannot make progress either.
    for k in idx:
        if active[k]:
            status[k] = FAILED
            active[k] = False


def solve_lmi(c, f0, f, tol: float = 1e-7, max_iter: int = 100) -> ConicResult:
    """Single-problem convenience wrapper around :func:`solve_lmi_batch`."""
    c = np.asarray(c, dtype=float)[None]
    f0 = np.asarray(f0, dtype=float)[None]
    f = np.asarray(f, dtype=float)[None]
    return solve_lmi_batch(c, f0, f, tol=tol, max_iter=max_iter)
