"""Experiment configuration: a versioned YAML schema.

Schema (version 1); every block is optional and falls back to defaults::

    version: 1
    name: env_i_25kmh           # scenario label written to every CSV row
    seed: 2024
    runs: 100
    road:       {segment_length, lane_width, lanes_per_direction, dr1, dr2, dr3, staggered}
    trajectory: {kind, speed_kmh, dt, lane, maneuver_window: [x0, x1], x_range: [x0, x1]}
    channel:    {environment: i|ii|iii|iv, p0, d0, gamma, sigma, comm_range,
                 packet_loss_prob, max_rsus, sample_jitter, sample_delay,
                 negate_path_loss, gamma_spread}
    estimator:  {penalty, tol, max_iter, gap_threshold, gamma_correction,
                 n_anchors, assumed_gamma}
    tracking:   {q, r, z0 (4-vectors = diagonals, or 4x4), alpha, beta, kappa,
                 inflation, reset_after, speed_cap}
    methods:    [cv2x_loca, sdp, ml_true, wcl, lls, wlls]
    sweep:      {parameter, values}
    geometry:   {layout: centroid|near_one|outside_hull, n_samples}

``channel.environment`` selects a preset whose fields the explicit keys
override. ``comm_range: null`` means unlimited. When ``geometry`` is given
the road and trajectory blocks are replaced by the fixed three-RSU layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from rsuloc.channel import ChannelParams
from rsuloc.coarse.estimator import Penalty
from rsuloc.errors import ConfigurationError, DomainError
from rsuloc.scenario import RoadConfig, TrajectoryKind
from rsuloc.tracking import UkfConfig

SCHEMA_VERSION = 1
METHODS = ("cv2x_loca", "sdp", "ml_true", "wcl", "lls", "wlls")
LAYOUTS = ("centroid", "near_one", "outside_hull")

# Illustrative channel presets for the four road environments. Only the
# nominal settings of environment (i) are published; the others are chosen
# to be progressively harsher (higher and more heterogeneous exponent,
# more packet loss).
ENVIRONMENTS: dict[str, dict[str, Any]] = {
    "i": {"gamma": 3.0, "sigma": 2.0, "packet_loss_prob": 0.0, "gamma_spread": 0.0},
    "ii": {"gamma": 3.3, "sigma": 2.0, "packet_loss_prob": 0.05, "gamma_spread": 0.2},
    "iii": {"gamma": 3.6, "sigma": 2.0, "packet_loss_prob": 0.1, "gamma_spread": 0.3},
    "iv": {"gamma": 4.0, "sigma": 2.0, "packet_loss_prob": 0.1, "gamma_spread": 0.4},
}

# name -> (validator description, predicate)
SWEEP_PARAMETERS: dict[str, tuple[str, Any]] = {
    "speed_kmh": ("0 < v <= 250", lambda v: 0 < float(v) <= 250),
    "sigma": ("0 <= sigma <= 20", lambda v: 0 <= float(v) <= 20),
    "comm_range": ("> d0 or null", lambda v: v is None or float(v) > 1.0),
    "dr1": ("1 <= dr1 <= segment length", lambda v: float(v) >= 1),
    "gamma": ("2 <= gamma <= 6", lambda v: 2 <= float(v) <= 6),
    "packet_loss_prob": ("0 <= p < 1", lambda v: 0 <= float(v) < 1),
    "geometry": (f"one of {LAYOUTS}", lambda v: v in LAYOUTS),
    "trajectory_kind": (
        f"one of {[k.value for k in TrajectoryKind]}",
        lambda v: v in {k.value for k in TrajectoryKind},
    ),
}


@dataclass(frozen=True)
class TrajectorySpec:
    kind: TrajectoryKind = TrajectoryKind.STRAIGHT
    speed_kmh: float = 25.0
    dt: float = 0.1
    lane: int = 0
    maneuver_window: tuple[float, float] = (400.0, 580.0)
    x_range: tuple[float, float] | None = None

    @property
    def speed(self) -> float:
        return self.speed_kmh / 3.6


@dataclass(frozen=True)
class EstimatorSpec:
    penalty: Penalty = field(default_factory=Penalty)
    tol: float = 1e-7
    max_iter: int = 100
    gap_threshold: float = 1e-2
    gamma_correction: bool = True
    n_anchors: int = 4
    # Exponent used when correction is off, when it fails for an RSU, and
    # by the baselines; ``None`` means the channel's nominal exponent.
    assumed_gamma: float | None = None


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple


@dataclass(frozen=True)
class GeometrySpec:
    layout: str = "centroid"
    n_samples: int = 50


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "default"
    seed: int = 0
    runs: int = 100
    road: RoadConfig = field(default_factory=RoadConfig)
    trajectory: TrajectorySpec = field(default_factory=TrajectorySpec)
    channel: ChannelParams = field(default_factory=ChannelParams)
    gamma_spread: float = 0.0
    estimator: EstimatorSpec = field(default_factory=EstimatorSpec)
    tracking: UkfConfig = field(default_factory=UkfConfig)
    methods: tuple[str, ...] = ("cv2x_loca",)
    sweep: SweepSpec | None = None
    geometry: GeometrySpec | None = None
    version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.runs < 1:
            raise ConfigurationError(f"runs must be >= 1, got {self.runs}")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ConfigurationError(f"unknown methods {bad}; choose from {METHODS}")
        if self.gamma_spread < 0:
            raise ConfigurationError("gamma_spread must be >= 0")
        if self.geometry is not None and self.geometry.layout not in LAYOUTS:
            raise ConfigurationError(f"geometry layout must be one of {LAYOUTS}")
        if self.sweep is not None:
            if self.sweep.parameter not in SWEEP_PARAMETERS:
                raise ConfigurationError(
                    f"unknown sweep parameter {self.sweep.parameter!r}; choose from {sorted(SWEEP_PARAMETERS)}"
                )
            rule, ok = SWEEP_PARAMETERS[self.sweep.parameter]
            for v in self.sweep.values:
                try:
                    valid = ok(v)
                except (TypeError, ValueError):
                    valid = False
                if not valid:
                    raise ConfigurationError(f"sweep value {v!r} for {self.sweep.parameter} violates {rule}")

    @property
    def baseline_gamma(self) -> float:
        g = self.estimator.assumed_gamma
        return self.channel.gamma if g is None else g

    def with_override(self, parameter: str, value) -> "ExperimentConfig":
        """The config with one sweep parameter set to ``value``."""
        if parameter == "speed_kmh":
            return replace(self, trajectory=replace(self.trajectory, speed_kmh=float(value)))
        if parameter == "trajectory_kind":
            return replace(self, trajectory=replace(self.trajectory, kind=TrajectoryKind(value)))
        if parameter == "dr1":
            return replace(self, road=replace(self.road, dr1=float(value)))
        if parameter == "geometry":
            base = self.geometry or GeometrySpec()
            return replace(self, geometry=replace(base, layout=str(value)))
        if parameter == "comm_range":
            value = math.inf if value is None else float(value)
            return replace(self, channel=replace(self.channel, comm_range=value))
        if parameter in ("sigma", "gamma", "packet_loss_prob"):
            return replace(self, channel=replace(self.channel, **{parameter: float(value)}))
        raise ConfigurationError(f"unknown sweep parameter {parameter!r}")


def _take(block: dict, cls, name: str, rename: dict | None = None) -> dict:
    """Split ``block`` into keyword arguments of ``cls``; unknown keys fail."""
    allowed = {f.name for f in fields(cls)} | set(rename or {})
    unknown = set(block) - allowed
    if unknown:
        raise ConfigurationError(f"unknown keys in {name}: {sorted(unknown)}")
    return {(rename or {}).get(k, k): v for k, v in block.items()}


def _block(raw: dict, key: str) -> dict:
    value = raw.get(key) or {}
    if not isinstance(value, dict):
        raise ConfigurationError(f"{key} must be a mapping")
    return dict(value)


def _matrix(value):
    return None if value is None else np.asarray(value, dtype=float)


def parse_config(raw: dict) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from a parsed YAML mapping.

    Raises:
        ConfigurationError: on schema, type or range violations.
    """
    if not isinstance(raw, dict):
        raise ConfigurationError("config must be a mapping")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigurationError(f"unknown top-level keys: {sorted(unknown)}")
    version = raw.get("version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigurationError(f"unsupported config version {version}; expected {SCHEMA_VERSION}")
    try:
        return _parse(raw)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(str(exc)) from exc


def _parse(raw: dict) -> ExperimentConfig:
    road = RoadConfig(**_take(_block(raw, "road"), RoadConfig, "road"))

    traj = _take(_block(raw, "trajectory"), TrajectorySpec, "trajectory")
    if "kind" in traj:
        traj["kind"] = TrajectoryKind(traj["kind"])
    for key in ("maneuver_window", "x_range"):
        if traj.get(key) is not None:
            traj[key] = tuple(float(v) for v in traj[key])
    trajectory = TrajectorySpec(**traj)
    if not trajectory.speed_kmh > 0 or not trajectory.dt > 0:
        raise ConfigurationError("trajectory speed_kmh and dt must be > 0")

    ch = _block(raw, "channel")
    env = ch.pop("environment", None)
    merged: dict[str, Any] = {}
    if env is not None:
        if str(env) not in ENVIRONMENTS:
            raise ConfigurationError(f"unknown environment {env!r}; choose from {sorted(ENVIRONMENTS)}")
        merged.update(ENVIRONMENTS[str(env)])
    merged.update(ch)
    gamma_spread = float(merged.pop("gamma_spread", 0.0))
    if "comm_range" in merged and merged["comm_range"] is None:
        merged["comm_range"] = math.inf
    channel = ChannelParams(**_take(merged, ChannelParams, "channel"))

    est = _take(_block(raw, "estimator"), EstimatorSpec, "estimator")
    if "penalty" in est:
        try:
            est["penalty"] = Penalty.parse(est["penalty"])
        except DomainError as exc:
            raise ConfigurationError(str(exc)) from exc
    estimator = EstimatorSpec(**est)
    if estimator.assumed_gamma is not None and not 2 <= estimator.assumed_gamma <= 6:
        raise ConfigurationError("assumed_gamma must lie in [2, 6]")

    trk = _take(_block(raw, "tracking"), UkfConfig, "tracking")
    for key in ("q", "r", "z0"):
        if key in trk:
            trk[key] = _matrix(trk[key])
    tracking = UkfConfig(**trk)

    sweep = None
    if raw.get("sweep"):
        sw = _block(raw, "sweep")
        if set(sw) != {"parameter", "values"}:
            raise ConfigurationError("sweep needs exactly 'parameter' and 'values'")
        if not isinstance(sw["values"], (list, tuple)) or not sw["values"]:
            raise ConfigurationError("sweep values must be a nonempty list")
        sweep = SweepSpec(str(sw["parameter"]), tuple(sw["values"]))

    geometry = None
    if raw.get("geometry"):
        geometry = GeometrySpec(**_take(_block(raw, "geometry"), GeometrySpec, "geometry"))

    methods = raw.get("methods", ["cv2x_loca"])
    if isinstance(methods, str):
        methods = [m.strip() for m in methods.split(",") if m.strip()]

    return ExperimentConfig(
        name=str(raw.get("name", "default")),
        seed=int(raw.get("seed", 0)),
        runs=int(raw.get("runs", 100)),
        road=road,
        trajectory=trajectory,
        channel=channel,
        gamma_spread=gamma_spread,
        estimator=estimator,
        tracking=tracking,
        methods=tuple(methods),
        sweep=sweep,
        geometry=geometry,
    )


def load_config(path) -> ExperimentConfig:
    """Read and validate a YAML config file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"invalid YAML in {path}: {exc}") from exc
    return parse_config(raw or {})


def reference_scale_config(**overrides) -> ExperimentConfig:
    """Nominal simulation settings on a shortened segment.

    RSUs on both road edges at every station, three heard RSUs, 0.1 s
    epochs, 25 km/h, four anchors for exponent correction; RSU sampling
    lags the report by up to one epoch. The filter is tuned to the coarse
    fix statistics of this layout: the coarse error is several metres and
    nearly white from epoch to epoch while the motion is smooth, so Q is
    small, R large and the initial velocity uncertainty wide.
    """
    cfg = ExperimentConfig(
        name="reference_scale_env_i",
        seed=2024,
        runs=100,
        road=RoadConfig(segment_length=300.0, staggered=False),
        trajectory=TrajectorySpec(speed_kmh=25.0, dt=0.1),
        channel=ChannelParams(gamma=3.0, sigma=2.0, max_rsus=3, sample_jitter=0.05, sample_delay=0.05),
        estimator=EstimatorSpec(n_anchors=4),
        tracking=UkfConfig(
            q=np.diag([1e-6, 1e-5, 1e-6, 1e-5]),
            r=np.diag([10.0, 30.0, 30.0, 1.0]),
            z0=np.diag([10.0, 1000.0, 30.0, 1.0]),
        ),
        methods=("cv2x_loca", "sdp"),
    )
    return replace(cfg, **overrides)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Plain-data view of a config (for echoing into output directories)."""

    def diag_or_full(m):
        m = np.asarray(m)
        return np.diag(m).tolist() if np.count_nonzero(m - np.diag(np.diag(m))) == 0 else m.tolist()

    ch = {f.name: getattr(cfg.channel, f.name) for f in fields(ChannelParams)}
    if math.isinf(ch["comm_range"]):
        ch["comm_range"] = None
    ch["gamma_spread"] = cfg.gamma_spread
    pen = cfg.estimator.penalty
    est = {f.name: getattr(cfg.estimator, f.name) for f in fields(EstimatorSpec)}
    est["penalty"] = pen.kind if pen.kind == "chebyshev" else f"lp({int(pen.p)})"
    trk = {f.name: getattr(cfg.tracking, f.name) for f in fields(UkfConfig)}
    for k in ("q", "r", "z0"):
        trk[k] = diag_or_full(trk[k])
    traj = {f.name: getattr(cfg.trajectory, f.name) for f in fields(TrajectorySpec)}
    traj["kind"] = cfg.trajectory.kind.value
    for k in ("maneuver_window", "x_range"):
        if traj[k] is not None:
            traj[k] = list(traj[k])
    out = {
        "version": cfg.version,
        "name": cfg.name,
        "seed": cfg.seed,
        "runs": cfg.runs,
        "road": {f.name: getattr(cfg.road, f.name) for f in fields(RoadConfig)},
        "trajectory": traj,
        "channel": ch,
        "estimator": est,
        "tracking": trk,
        "methods": list(cfg.methods),
    }
    if cfg.sweep is not None:
        out["sweep"] = {"parameter": cfg.sweep.parameter, "values": list(cfg.sweep.values)}
    if cfg.geometry is not None:
        out["geometry"] = {"layout": cfg.geometry.layout, "n_samples": cfg.geometry.n_samples}
    return out
