"""Path-loss exponent correction from RSU-to-RSU (anchor) measurements.

RSU positions are known exactly, so each received anchor power inverts the
path-loss model directly::

    gamma_il = (P_il - P0) / (10 * log10(d_il / d0))

with ``d_il`` the geometric RSU-anchor distance. The per-RSU estimate is the
mean over its ``L`` nearest anchors, clipped to the physical range [2, 6].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from rsuloc.channel import ChannelParams, noiseless_rss, to_model_convention
from rsuloc.errors import DomainError, GammaUnavailableError
from rsuloc.scenario import RsuNode, rsu_positions

GAMMA_MIN, GAMMA_MAX = 2.0, 6.0
# Anchors within this many decades of d0 make the log denominator vanish.
NEAR_D0_DECADES = 0.01


@dataclass(frozen=True)
class AnchorObservation:
    rsu_id: int
    anchor_id: int
    power: float
    anchor_pos: np.ndarray

    def __post_init__(self):
        if self.rsu_id == self.anchor_id:
            raise DomainError("an RSU cannot be its own anchor")
        object.__setattr__(self, "anchor_pos", np.asarray(self.anchor_pos, dtype=float).reshape(2))


@dataclass(frozen=True)
class GammaEstimate:
    rsu_id: int
    gamma_hat: float
    per_anchor: tuple[float, ...]
    n_anchors: int
    clipped: bool = False


def anchor_distance(phi_i, phi_l) -> float:
    d = float(np.hypot(*(np.asarray(phi_l, float) - np.asarray(phi_i, float))))
    if d == 0.0:
        raise DomainError("RSU and anchor positions coincide")
    return d


def estimate_gamma_pair(obs: AnchorObservation, p0: float, phi_i, d0: float = 1.0) -> float:
    """Single-anchor exponent estimate.

    Raises:
        DomainError: if the anchor lies within ``NEAR_D0_DECADES`` decades of
            ``d0``, where the estimate is numerically meaningless.
    """
    d = anchor_distance(phi_i, obs.anchor_pos)
    decades = math.log10(d / d0)
    if abs(decades) <= NEAR_D0_DECADES:
        raise DomainError(f"anchor distance {d} too close to d0={d0}")
    return (obs.power - p0) / (10.0 * decades)


def estimate_gamma(
    rsu_id: int,
    observations: Sequence[AnchorObservation],
    p0: float,
    phi_i,
    d0: float = 1.0,
) -> GammaEstimate:
    """Average the usable pair estimates for one RSU and clip to [2, 6].

    Raises:
        GammaUnavailableError: when no observation survives the guards; the
            caller falls back to its configured exponent.
    """
    vals = []
    for obs in observations:
        if obs.rsu_id != rsu_id:
            continue
        try:
            vals.append(estimate_gamma_pair(obs, p0, phi_i, d0))
        except DomainError:
            continue
    if not vals:
        raise GammaUnavailableError(f"no usable anchors for RSU {rsu_id}")
    mean = float(np.mean(vals))
    clipped = float(np.clip(mean, GAMMA_MIN, GAMMA_MAX))
    return GammaEstimate(rsu_id, clipped, tuple(vals), len(vals), clipped != mean)


def crlb_distance_variance(sigma: float, d: float, gamma: float) -> float:
    """Cramer-Rao bound on the variance of an unbiased RSS range estimate (m^2)."""
    if not gamma > 0:
        raise DomainError(f"gamma must be > 0, got {gamma}")
    return (sigma * d * math.log(10.0) / (10.0 * gamma)) ** 2


def biased_distance_estimate(power, p0: float, d0: float, gamma):
    """Range from the inverted model ``d0 * 10**((power - p0) / (10 gamma))``."""
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma <= 0):
        raise DomainError(f"gamma must be > 0, got {gamma}")
    out = d0 * np.power(10.0, (np.asarray(power, dtype=float) - p0) / (10.0 * gamma))
    return float(out) if out.ndim == 0 else out


def ml_distance_estimate_corrected(power, p0: float, d0: float, gamma: float, sigma: float):
    """Range estimate with the multiplicative correction factor as published.

    The factor ``exp(-10 gamma / (sigma ln 10))`` is kept verbatim; it does not
    reduce to the usual log-normal bias correction and is not used by the
    pipeline.
    """
    if not sigma > 0:
        raise DomainError("sigma must be > 0")
    return biased_distance_estimate(power, p0, d0, gamma) * math.exp(-10.0 * gamma / (sigma * math.log(10.0)))


def select_anchors(rsus: Sequence[RsuNode], rsu_id: int, n_anchors: int = 4, comm_range: float = math.inf) -> list[RsuNode]:
    """The ``n_anchors`` nearest other RSUs within ``comm_range`` (ties by id)."""
    by_id = {r.id: r for r in rsus}
    me = by_id[rsu_id]
    others = [r for r in rsus if r.id != rsu_id]
    if not others:
        return []
    d = np.linalg.norm(rsu_positions(others) - me.position, axis=1)
    order = np.lexsort((np.array([r.id for r in others]), d))
    return [others[i] for i in order if d[i] <= comm_range][:n_anchors]


def simulate_anchor_observations(
    rsus: Sequence[RsuNode],
    rsu_id: int,
    params: ChannelParams,
    rng: np.random.Generator,
    n_anchors: int = 4,
    gammas: dict[int, float] | None = None,
    anchor_sigma: float | None = None,
) -> list[AnchorObservation]:
    """Fresh anchor powers received by RSU ``rsu_id``, in model convention.

    Anchor links use the receiving RSU's local exponent and, unless
    ``anchor_sigma`` overrides it, the vehicle-link shadowing deviation.
    Packet loss applies to anchor messages too.
    """
    me = next(r for r in rsus if r.id == rsu_id)
    sigma = params.sigma if anchor_sigma is None else anchor_sigma
    g = params.gamma if gammas is None else gammas.get(rsu_id, params.gamma)
    out = []
    for anchor in select_anchors(rsus, rsu_id, n_anchors, params.comm_range):
        u_loss = rng.random()
        z = rng.standard_normal()
        if u_loss < params.packet_loss_prob:
            continue
        d = max(anchor_distance(me.position, anchor.position), params.d0)
        p = float(noiseless_rss(params, d, g)) + sigma * z
        p = float(to_model_convention(p, params.p0, params.negate_path_loss))
        out.append(AnchorObservation(rsu_id, anchor.id, p, anchor.position))
    return out
