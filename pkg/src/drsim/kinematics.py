"""Ground-truth trajectories and dead-reckoning extrapolation.

Trajectories are analytic: position, velocity and acceleration at any time
come from closed-form expressions, so they can serve as exact oracles for
the extrapolators. Extrapolation itself is the zeroth/first/second order
polynomial advance of a frozen kinematic state.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateFitError, DomainError, InsufficientDataError

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, slots=True)
class Vec3:
    """3-vector in meters (or m/s, m/s^2 depending on context)."""

    x: float
    y: float
    z: float

    def __add__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def scaled(self, k: float) -> "Vec3":
        return Vec3(self.x * k, self.y * k, self.z * k)

    def dot(self, other: "Vec3") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


ZERO3 = Vec3(0.0, 0.0, 0.0)


def wrap_angle(theta: float) -> float:
    """Wrap an angle into [-pi, pi]."""
    wrapped = math.fmod(theta + math.pi, _TWO_PI)
    if wrapped < 0.0:
        wrapped += _TWO_PI
    return wrapped - math.pi


def heading_gap(a: float, b: float) -> float:
    """Shortest wrapped angular difference between two headings, in [0, pi]."""
    return abs(wrap_angle(a - b))


@dataclass(frozen=True, slots=True)
class KinematicState:
    """Entity state sample: position, velocity, acceleration, heading, time."""

    position: Vec3
    velocity: Vec3
    acceleration: Vec3
    orientation: float  # heading, rad, in [-pi, pi]
    timestamp: float  # s

    def __post_init__(self):
        if not math.isfinite(self.timestamp):
            raise DomainError(f"timestamp must be finite, got {self.timestamp}")
        if not -math.pi <= self.orientation <= math.pi:
            raise DomainError(
                f"orientation must lie in [-pi, pi], got {self.orientation}"
            )


def _heading_of(velocity: Vec3) -> float:
    if velocity.x == 0.0 and velocity.y == 0.0:
        return 0.0
    return math.atan2(velocity.y, velocity.x)


class Trajectory:
    """Analytic trajectory over [0, duration]."""

    duration: float

    def state_at(self, t: float) -> tuple[Vec3, Vec3, Vec3]:
        """Exact (position, velocity, acceleration) at local time t."""
        raise NotImplementedError

    def max_speed(self) -> float:
        """Largest |velocity| attained on [0, duration]."""
        raise NotImplementedError

    def max_accel(self) -> float:
        """Largest |acceleration| attained on [0, duration]."""
        raise NotImplementedError


@dataclass(frozen=True)
class Circular(Trajectory):
    """Planar circle: x = r cos(w t), y = r sin(w t). |v| = r w, |a| = r w^2."""

    radius: float
    angular_rate: float
    duration: float = math.inf

    def state_at(self, t):
        r, w = self.radius, self.angular_rate
        c, s = math.cos(w * t), math.sin(w * t)
        return (
            Vec3(r * c, r * s, 0.0),
            Vec3(-r * w * s, r * w * c, 0.0),
            Vec3(-r * w * w * c, -r * w * w * s, 0.0),
        )

    def max_speed(self):
        return abs(self.radius * self.angular_rate)

    def max_accel(self):
        return abs(self.radius * self.angular_rate**2)


@dataclass(frozen=True)
class Sinusoidal(Trajectory):
    """Drifting sine: x = v_d t, y = A sin(w t)."""

    amplitude: float
    angular_rate: float
    drift_velocity: float = 0.0
    duration: float = math.inf

    def state_at(self, t):
        a, w, vd = self.amplitude, self.angular_rate, self.drift_velocity
        return (
            Vec3(vd * t, a * math.sin(w * t), 0.0),
            Vec3(vd, a * w * math.cos(w * t), 0.0),
            Vec3(0.0, -a * w * w * math.sin(w * t), 0.0),
        )

    def max_speed(self):
        return math.hypot(self.drift_velocity, self.amplitude * self.angular_rate)

    def max_accel(self):
        return abs(self.amplitude * self.angular_rate**2)


@dataclass(frozen=True)
class Linear(Trajectory):
    """Constant velocity from the origin."""

    v0: Vec3 = ZERO3
    duration: float = math.inf

    def state_at(self, t):
        return (self.v0.scaled(t), self.v0, ZERO3)

    def max_speed(self):
        return self.v0.norm()

    def max_accel(self):
        return 0.0


@dataclass(frozen=True)
class ConstantAccel(Trajectory):
    """Uniform acceleration from the origin."""

    v0: Vec3 = ZERO3
    a0: Vec3 = ZERO3
    duration: float = math.inf

    def state_at(self, t):
        pos = self.v0.scaled(t) + self.a0.scaled(0.5 * t * t)
        vel = self.v0 + self.a0.scaled(t)
        return (pos, vel, self.a0)

    def max_speed(self):
        # |v(t)| is convex in t, so the max sits at an endpoint.
        end = self.duration if math.isfinite(self.duration) else 0.0
        return max(self.v0.norm(), (self.v0 + self.a0.scaled(end)).norm())

    def max_accel(self):
        return self.a0.norm()


@dataclass(frozen=True)
class Piecewise(Trajectory):
    """Chained segments; positions are offset so the path stays continuous."""

    segments: tuple[Trajectory, ...]
    duration: float = field(init=False)

    def __post_init__(self):
        if not self.segments:
            raise DomainError("Piecewise needs at least one segment")
        for seg in self.segments:
            if not math.isfinite(seg.duration) or seg.duration <= 0.0:
                raise DomainError("every Piecewise segment needs a finite positive duration")
        object.__setattr__(self, "duration", sum(s.duration for s in self.segments))
        # Cumulative start times and position offsets for continuity.
        starts, offsets = [], []
        t0, off = 0.0, ZERO3
        for i, seg in enumerate(self.segments):
            if i > 0:
                seg_start, _, _ = seg.state_at(0.0)
                off = off - seg_start
            starts.append(t0)
            offsets.append(off)
            end_pos, _, _ = seg.state_at(seg.duration)
            off = off + end_pos
            t0 += seg.duration
        object.__setattr__(self, "_starts", tuple(starts))
        object.__setattr__(self, "_offsets", tuple(offsets))

    def state_at(self, t):
        idx = len(self.segments) - 1
        for i, start in enumerate(self._starts):
            if t < start:
                idx = i - 1
                break
        seg = self.segments[idx]
        local = min(t - self._starts[idx], seg.duration)
        pos, vel, acc = seg.state_at(local)
        return (self._offsets[idx] + pos, vel, acc)

    def max_speed(self):
        return max(s.max_speed() for s in self.segments)

    def max_accel(self):
        return max(s.max_accel() for s in self.segments)


def sample_state(traj: Trajectory, t: float) -> KinematicState:
    """Exact trajectory state at time t; heading follows the velocity."""
    slack = 1e-9 * max(1.0, abs(traj.duration)) if math.isfinite(traj.duration) else 0.0
    if t < -slack or t > traj.duration + slack:
        raise DomainError(f"t={t} outside [0, {traj.duration}]")
    t = min(max(t, 0.0), traj.duration)
    pos, vel, acc = traj.state_at(t)
    return KinematicState(pos, vel, acc, _heading_of(vel), t)


def extrapolate(base: KinematicState, t: float, order: int, literal_accel: bool = False) -> Vec3:
    """Dead-reckon `base` forward to time t.

    order 0: hold position; order 1: add V*dt; order 2: add 0.5*A*dt^2 as well.
    `literal_accel` drops the 1/2 on the acceleration term (the non-physical
    quadratic variant kept for comparison runs).
    """
    dt = t - base.timestamp
    if dt < -1e-12:
        raise DomainError(f"cannot extrapolate backwards (dt={dt})")
    if order == 0:
        return base.position
    p = base.position
    v = base.velocity
    if order == 1:
        return Vec3(p.x + v.x * dt, p.y + v.y * dt, p.z + v.z * dt)
    if order == 2:
        a = base.acceleration
        k = dt * dt if literal_accel else 0.5 * dt * dt
        return Vec3(
            p.x + v.x * dt + a.x * k,
            p.y + v.y * dt + a.y * k,
            p.z + v.z * dt + a.z * k,
        )
    raise DomainError(f"extrapolation order must be 0, 1 or 2, got {order}")


class PositionHistory:
    """Ring of (timestamp, position) pairs with strictly increasing times."""

    def __init__(self, capacity: int = 8):
        if capacity < 3:
            raise DomainError("history capacity must be at least 3")
        self._ring: deque[tuple[float, Vec3]] = deque(maxlen=capacity)

    def push(self, timestamp: float, position: Vec3) -> None:
        if self._ring and timestamp <= self._ring[-1][0]:
            raise DomainError(
                f"timestamps must increase strictly ({timestamp} after {self._ring[-1][0]})"
            )
        self._ring.append((timestamp, position))

    def __len__(self) -> int:
        return len(self._ring)

    def last(self, n: int) -> list[tuple[float, Vec3]]:
        if n > len(self._ring):
            raise InsufficientDataError(f"history holds {len(self._ring)} < {n} samples")
        return list(self._ring)[-n:]


def fit_history_quadratic(history: PositionHistory) -> KinematicState:
    """Fit the unique quadratic through the last 3 samples, componentwise.

    The returned state is anchored at the newest sample: its position,
    velocity and acceleration are the curve's value and first/second
    derivatives there, so order-2 extrapolation of the result reproduces
    all three samples exactly.
    """
    if len(history) < 3:
        raise InsufficientDataError("need at least 3 samples for a quadratic fit")
    samples = history.last(3)
    t_new = samples[-1][0]
    taus = [t - t_new for t, _ in samples]
    if len({t for t, _ in samples}) < 3:
        raise DegenerateFitError("duplicate timestamps in history")
    # p(tau) = P + V tau + 0.5 A tau^2 through the three points.
    m = np.array([[1.0, tau, 0.5 * tau * tau] for tau in taus])
    rhs = np.array([[p.x, p.y, p.z] for _, p in samples])
    try:
        coef = np.linalg.solve(m, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateFitError(f"singular history fit: {exc}") from exc
    pos = Vec3(*coef[0])
    vel = Vec3(*coef[1])
    acc = Vec3(*coef[2])
    return KinematicState(pos, vel, acc, _heading_of(vel), t_new)
