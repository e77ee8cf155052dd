"""Road geometry, RSU deployment and ground-truth vehicle trajectories.

Coordinates: X runs along the lanes (longitudinal), Y across them (lateral),
with the origin at the near road edge at the start of the segment. The road
occupies ``0 <= Y <= dr3``. Only one direction of travel is simulated, in +X,
on the lower carriageway ``0 <= Y <= dr3/2``; lane 0 is the rightmost lane
(centre at ``lane_width/2``).

RSU layout
----------
RSUs sit at longitudinal stations ``k * dr1`` for ``k = 0 .. floor(L/dr1)``.
With ``staggered=True`` (the default) stations alternate sides: even ``k`` on
the near side at ``Y = -dr2``, odd ``k`` on the far side at ``Y = dr3 + dr2``.
Same-side neighbours are therefore ``2*dr1`` apart and opposite-side
neighbours ``dr1`` apart longitudinally. With ``staggered=False`` every
station carries one RSU on each side (near side first in id order).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from rsuloc.errors import ConfigurationError


class Side(str, enum.Enum):
    NEAR = "near"
    FAR = "far"


class TrajectoryKind(str, enum.Enum):
    STRAIGHT = "straight"
    LANE_CHANGE_RIGHT_TO_LEFT = "lane_change_right_to_left"
    LANE_CHANGE_LEFT_TO_RIGHT = "lane_change_left_to_right"


@dataclass(frozen=True)
class RoadConfig:
    """Two-way road segment with RSUs on both edges (all lengths in metres)."""

    segment_length: float = 2000.0
    lane_width: float = 3.5
    lanes_per_direction: int = 2
    dr1: float = 60.0
    dr2: float = 1.0
    dr3: float = 14.0
    staggered: bool = True

    def __post_init__(self):
        for name in ("segment_length", "lane_width", "dr2", "dr3"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.lanes_per_direction < 1:
            raise ConfigurationError("lanes_per_direction must be >= 1")
        if not self.dr1 >= 1:
            raise ConfigurationError(f"dr1 must be >= 1, got {self.dr1}")
        expected = 2 * self.lanes_per_direction * self.lane_width
        if abs(self.dr3 - expected) > 1e-9:
            raise ConfigurationError(
                f"dr3={self.dr3} inconsistent with 2*{self.lanes_per_direction}*{self.lane_width}={expected}"
            )

    def lane_center(self, lane: int) -> float:
        """Lateral coordinate of a travel-direction lane centre (0 = rightmost)."""
        if not 0 <= lane < self.lanes_per_direction:
            raise ConfigurationError(f"lane {lane} outside 0..{self.lanes_per_direction - 1}")
        return (lane + 0.5) * self.lane_width

    @property
    def carriageway_center(self) -> float:
        """Centreline of the simulated direction's carriageway."""
        return self.lanes_per_direction * self.lane_width / 2.0


@dataclass(frozen=True)
class RsuNode:
    id: int
    position: np.ndarray = field(compare=False)
    side: Side = Side.NEAR

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(2)
        pos.setflags(write=False)
        object.__setattr__(self, "position", pos)

    def __eq__(self, other):
        if not isinstance(other, RsuNode):
            return NotImplemented
        return (
            self.id == other.id
            and self.side == other.side
            and bool(np.array_equal(self.position, other.position))
        )

    def __hash__(self):
        return hash((self.id, self.side, tuple(self.position)))


def deploy_rsus(config: RoadConfig) -> list[RsuNode]:
    """Place RSUs along both road edges; see the module docstring for the pattern."""
    n_stations = int(math.floor(config.segment_length / config.dr1 + 1e-9)) + 1
    near_y = -config.dr2
    far_y = config.dr3 + config.dr2
    rsus: list[RsuNode] = []
    for k in range(n_stations):
        x = k * config.dr1
        if config.staggered:
            side = Side.NEAR if k % 2 == 0 else Side.FAR
            y = near_y if side is Side.NEAR else far_y
            rsus.append(RsuNode(len(rsus) + 1, np.array([x, y]), side))
        else:
            rsus.append(RsuNode(len(rsus) + 1, np.array([x, near_y]), Side.NEAR))
            rsus.append(RsuNode(len(rsus) + 1, np.array([x, far_y]), Side.FAR))
    return rsus


def rsu_positions(rsus) -> np.ndarray:
    return np.array([r.position for r in rsus], dtype=float).reshape(-1, 2)


def _smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


def _smoothstep_rate(s):
    inside = (s > 0.0) & (s < 1.0)
    return np.where(inside, 6.0 * s * (1.0 - s), 0.0)


@dataclass(frozen=True)
class Trajectory:
    """Constant-speed ground truth sampled every ``dt`` seconds.

    ``times``, ``positions`` (K, 2) and ``velocities`` (K, 2) are the samples;
    :meth:`position_at` evaluates the same analytic path at any time, which
    the channel uses for asynchronous per-RSU sampling.
    """

    kind: TrajectoryKind
    speed: float
    dt: float
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    x_start: float
    lateral_from: float
    lateral_to: float
    maneuver_window: tuple[float, float]

    def __len__(self):
        return len(self.times)

    def _lateral(self, x):
        x0, x1 = self.maneuver_window
        if self.kind is TrajectoryKind.STRAIGHT or self.lateral_from == self.lateral_to:
            return np.full_like(x, self.lateral_from), np.zeros_like(x)
        s = (x - x0) / (x1 - x0)
        delta = self.lateral_to - self.lateral_from
        y = self.lateral_from + delta * _smoothstep(s)
        dy_dx = delta * _smoothstep_rate(s) / (x1 - x0)
        return y, dy_dx

    def position_at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        x = self.x_start + self.speed * t
        y, _ = self._lateral(x)
        return np.stack([x, y], axis=-1)

    def velocity_at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        x = self.x_start + self.speed * t
        _, dy_dx = self._lateral(x)
        return np.stack([np.full_like(x, self.speed), dy_dx * self.speed], axis=-1)


def generate_trajectory(
    kind: TrajectoryKind | str,
    speed: float,
    dt: float,
    config: RoadConfig,
    maneuver_window: tuple[float, float] = (400.0, 580.0),
    lane: int = 0,
    x_range: tuple[float, float] | None = None,
) -> Trajectory:
    """Generate a ground-truth trajectory along the segment.

    Args:
        kind: straight or one of the two lane-change kinds.
        speed: Longitudinal speed in m/s.
        dt: Sampling interval in seconds.
        config: Road geometry.
        maneuver_window: Longitudinal span [x0, x1] of a lane change; the
            lateral offset follows a cubic blend that is continuous in
            position and lateral velocity.
        lane: Lane kept by a straight trajectory.
        x_range: Longitudinal start/end; defaults to the whole segment.
    """
    kind = TrajectoryKind(kind)
    if not speed > 0:
        raise ConfigurationError(f"speed must be > 0, got {speed}")
    if not dt > 0:
        raise ConfigurationError(f"dt must be > 0, got {dt}")
    x0, x1 = x_range if x_range is not None else (0.0, config.segment_length)
    if not 0 <= x0 < x1 <= config.segment_length:
        raise ConfigurationError(f"x_range {x_range} outside segment [0, {config.segment_length}]")
    w0, w1 = maneuver_window
    if kind is not TrajectoryKind.STRAIGHT and not (0 <= w0 < w1 <= config.segment_length):
        raise ConfigurationError(
            f"maneuver window {maneuver_window} outside segment [0, {config.segment_length}]"
        )
    if config.lanes_per_direction < 2 and kind is not TrajectoryKind.STRAIGHT:
        raise ConfigurationError("lane change needs at least two lanes per direction")

    if kind is TrajectoryKind.STRAIGHT:
        y_from = y_to = config.lane_center(lane)
    elif kind is TrajectoryKind.LANE_CHANGE_RIGHT_TO_LEFT:
        y_from, y_to = config.lane_center(0), config.lane_center(1)
    else:
        y_from, y_to = config.lane_center(1), config.lane_center(0)

    n = int(math.floor((x1 - x0) / (speed * dt) + 1e-9)) + 1
    times = np.arange(n) * dt
    traj = Trajectory(
        kind=kind,
        speed=float(speed),
        dt=float(dt),
        times=times,
        positions=np.empty((0, 2)),
        velocities=np.empty((0, 2)),
        x_start=float(x0),
        lateral_from=float(y_from),
        lateral_to=float(y_to),
        maneuver_window=(float(w0), float(w1)),
    )
    object.__setattr__(traj, "positions", traj.position_at(times))
    object.__setattr__(traj, "velocities", traj.velocity_at(times))
    return traj


def kmh(speed_kmh: float) -> float:
    """km/h to m/s."""
    return speed_kmh / 3.6


def static_trajectory(position, n_samples: int, dt: float) -> Trajectory:
    """A parked vehicle: ``n_samples`` epochs at a fixed position.

    Used by the geometric-layout study where the vehicle location relative to
    a fixed RSU triangle is the variable of interest.
    """
    position = np.asarray(position, dtype=float).reshape(2)
    times = np.arange(n_samples) * dt
    traj = Trajectory(
        kind=TrajectoryKind.STRAIGHT,
        speed=0.0,
        dt=float(dt),
        times=times,
        positions=np.tile(position, (n_samples, 1)),
        velocities=np.zeros((n_samples, 2)),
        x_start=float(position[0]),
        lateral_from=float(position[1]),
        lateral_to=float(position[1]),
        maneuver_window=(0.0, 1.0),
    )
    return traj
