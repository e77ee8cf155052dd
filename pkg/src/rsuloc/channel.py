"""Log-distance path loss with log-normal shadowing.

Received power follows::

    P = P0 + 10 * gamma * log10(d / d0) + m,    m ~ N(0, sigma^2)

with the path-loss term *added* to ``P0``. Generation and every estimator in
the package share this convention, so relative geometry is unaffected. Set
``negate_path_loss=True`` to generate in the physical convention (power
falls with distance); :func:`to_model_convention` maps such powers back
before estimation.

Packet loss is an independent Bernoulli drop per message. On top of it a
vehicle only hears RSUs inside ``comm_range`` and, when ``max_rsus`` is set,
only the ``max_rsus`` nearest of those.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Callable, Iterable, Sequence

import numpy as np

from rsuloc.errors import ConfigurationError
from rsuloc.scenario import RsuNode, rsu_positions

# Reference wall-clock time for exported logs (t = 0).
LOG_EPOCH = datetime(2021, 7, 10, 10, 20, 30)
DEFAULT_MAC = "00:16:EA:AE:3C:30"


@dataclass(frozen=True)
class ChannelParams:
    """Channel model parameters.

    RSUs are not synchronized with the epoch grid: each RSU samples the
    vehicle at ``t - sample_delay + sample_jitter * u`` with ``u`` uniform on
    [-1, 1]. ``sample_delay`` is the mean measurement age (s) and
    ``sample_jitter`` the half-width of the spread, so a moving vehicle is
    seen behind and at slightly different places within one epoch.
    """

    p0: float = -30.0
    d0: float = 1.0
    gamma: float = 3.0
    sigma: float = 2.0
    comm_range: float = math.inf
    packet_loss_prob: float = 0.0
    max_rsus: int | None = 3
    sample_jitter: float = 0.0
    sample_delay: float = 0.0
    negate_path_loss: bool = False

    def __post_init__(self):
        if not self.d0 > 0:
            raise ConfigurationError(f"d0 must be > 0, got {self.d0}")
        if not 2.0 <= self.gamma <= 6.0:
            raise ConfigurationError(f"gamma must lie in [2, 6], got {self.gamma}")
        if not self.sigma >= 0:
            raise ConfigurationError(f"sigma must be >= 0, got {self.sigma}")
        if not self.comm_range > self.d0:
            raise ConfigurationError(f"comm_range must exceed d0, got {self.comm_range}")
        if not 0.0 <= self.packet_loss_prob <= 1.0:
            raise ConfigurationError(f"packet_loss_prob must lie in [0, 1], got {self.packet_loss_prob}")
        if self.max_rsus is not None and self.max_rsus < 1:
            raise ConfigurationError("max_rsus must be >= 1 or None")
        if self.sample_jitter < 0:
            raise ConfigurationError("sample_jitter must be >= 0")
        if self.sample_delay < 0:
            raise ConfigurationError("sample_delay must be >= 0")


@dataclass
class ChannelDiagnostics:
    clamped: int = 0


@dataclass(frozen=True)
class RssMeasurement:
    mac: str
    timestamp: float
    rsu_id: int
    power: float


def noiseless_rss(params: ChannelParams, distance, gamma: float | None = None):
    """Mean received power at ``distance`` (no clamping)."""
    g = params.gamma if gamma is None else gamma
    term = 10.0 * g * np.log10(np.asarray(distance, dtype=float) / params.d0)
    return params.p0 - term if params.negate_path_loss else params.p0 + term


def rss_sample(
    params: ChannelParams,
    rsu_pos,
    veh_pos,
    rng: np.random.Generator,
    gamma: float | None = None,
    diagnostics: ChannelDiagnostics | None = None,
) -> float:
    """Draw one received-power value in dBm.

    Distances below ``d0`` are clamped to ``d0`` and counted in
    ``diagnostics``. ``gamma`` overrides the parameter-set exponent for a
    single link (per-RSU environments).
    """
    d = float(np.linalg.norm(np.asarray(veh_pos, float) - np.asarray(rsu_pos, float)))
    if d < params.d0:
        d = params.d0
        if diagnostics is not None:
            diagnostics.clamped += 1
    return float(noiseless_rss(params, d, gamma)) + params.sigma * float(rng.standard_normal())


def to_model_convention(power, p0: float, negate_path_loss: bool):
    """Map a measured power onto the additive convention used by the estimators."""
    power = np.asarray(power, dtype=float)
    return 2.0 * p0 - power if negate_path_loss else power


def heard_rsus(rsus: Sequence[RsuNode], veh_pos, params: ChannelParams) -> list[RsuNode]:
    """RSUs within range of ``veh_pos``, nearest ``max_rsus`` of them, in id order."""
    if not rsus:
        return []
    pos = rsu_positions(rsus)
    d = np.linalg.norm(pos - np.asarray(veh_pos, float), axis=1)
    order = np.lexsort((np.array([r.id for r in rsus]), d))
    chosen = [i for i in order if d[i] <= params.comm_range]
    if params.max_rsus is not None:
        chosen = chosen[: params.max_rsus]
    return sorted((rsus[i] for i in chosen), key=lambda r: r.id)


def simulate_epoch(
    rsus: Sequence[RsuNode],
    vehicle: Callable[[float], np.ndarray] | np.ndarray,
    t: float,
    params: ChannelParams,
    rng: np.random.Generator,
    mac: str = DEFAULT_MAC,
    gammas: dict[int, float] | None = None,
    diagnostics: ChannelDiagnostics | None = None,
) -> list[RssMeasurement]:
    """Measurements received by the heard RSUs at nominal time ``t``.

    Args:
        rsus: Deployed RSUs.
        vehicle: Either a fixed position or a callable ``t -> position``;
            with a callable and a nonzero ``sample_delay`` or
            ``sample_jitter`` each RSU samples the vehicle at its own instant.
        t: Nominal epoch time in seconds.
        params: Channel parameters.
        rng: Random source; three variates are consumed per heard RSU
            whatever the parameters, so paired runs stay aligned.
        mac: Vehicle identifier.
        gammas: Optional per-RSU path-loss exponents.

    Returns:
        Measurements that survived packet loss, stamped with the nominal
        epoch time ``t`` (the report time, not the sampling instant).
    """
    position_at = vehicle if callable(vehicle) else (lambda _t, p=np.asarray(vehicle, float): p)
    nominal = np.asarray(position_at(t), dtype=float)
    out = []
    for rsu in heard_rsus(rsus, nominal, params):
        u_loss, u_jit = rng.random(2)
        z = float(rng.standard_normal())
        if u_loss < params.packet_loss_prob:
            continue
        ts = t - params.sample_delay + params.sample_jitter * (2.0 * u_jit - 1.0)
        pos = nominal if ts == t else np.asarray(position_at(ts), dtype=float)
        d = float(np.linalg.norm(pos - rsu.position))
        if d < params.d0:
            d = params.d0
            if diagnostics is not None:
                diagnostics.clamped += 1
        g = params.gamma if gammas is None else gammas.get(rsu.id, params.gamma)
        power = float(noiseless_rss(params, d, g)) + params.sigma * z
        out.append(RssMeasurement(mac, float(t), rsu.id, power))
    return out


def format_record(m: RssMeasurement, epoch: datetime = LOG_EPOCH) -> str:
    """One log line: ``mac, iso-timestamp, rsu_id, rssi_dbm``."""
    stamp = (epoch + timedelta(seconds=m.timestamp)).isoformat(timespec="microseconds")
    return f"{m.mac}, {stamp}, RSU_{m.rsu_id}, {m.power:.6f}"


def export_log(measurements: Iterable[RssMeasurement], path, epoch: datetime = LOG_EPOCH) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for m in measurements:
            fh.write(format_record(m, epoch) + "\n")
            n += 1
    return n
