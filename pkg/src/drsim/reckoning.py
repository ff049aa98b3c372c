"""Sender and receiver dead-reckoning state machines.

The sender samples its trajectory every tick, compares the truth against
what the receivers are extrapolating, and emits an update packet when the
gap crosses the active threshold or the heartbeat timer expires. Receivers
mirror the extrapolation and optionally blend smoothly onto each update.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

from .anfis import AnfisNetwork, forward
from .errors import DomainError, NotInitializedError
from .kinematics import (
    ZERO3,
    KinematicState,
    PositionHistory,
    Trajectory,
    Vec3,
    extrapolate,
    fit_history_quadratic,
    heading_gap,
    sample_state,
)

PDU_FORMAT = "<II11d"
PDU_SIZE_BYTES = struct.calcsize(PDU_FORMAT)  # 96


def position_error(actual: Vec3, estimated: Vec3) -> float:
    """Euclidean gap between the true and the dead-reckoned position."""
    return (actual - estimated).norm()


@dataclass(frozen=True)
class EntityStatePdu:
    """Update packet: who, in what order, when, and the full state."""

    entity_id: int
    sequence: int
    send_time: float
    state: KinematicState

    def __post_init__(self):
        for name, value in (("entity_id", self.entity_id), ("sequence", self.sequence)):
            if not 0 <= value < 2**32:
                raise DomainError(f"{name} must fit in u32, got {value}")
        if self.state.timestamp != self.send_time:
            raise DomainError("PDU state must be timestamped at send_time")

    def encode(self) -> bytes:
        s = self.state
        return struct.pack(
            PDU_FORMAT,
            self.entity_id,
            self.sequence,
            self.send_time,
            *s.position.as_tuple(),
            *s.velocity.as_tuple(),
            *s.acceleration.as_tuple(),
            s.orientation,
        )

    @classmethod
    def decode(cls, data: bytes) -> "EntityStatePdu":
        if len(data) != PDU_SIZE_BYTES:
            raise DomainError(f"PDU must be {PDU_SIZE_BYTES} bytes, got {len(data)}")
        fields = struct.unpack(PDU_FORMAT, data)
        entity_id, sequence, send_time = fields[0], fields[1], fields[2]
        vecs = fields[3:12]
        state = KinematicState(
            position=Vec3(*vecs[0:3]),
            velocity=Vec3(*vecs[3:6]),
            acceleration=Vec3(*vecs[6:9]),
            orientation=fields[12],
            timestamp=send_time,
        )
        return cls(entity_id, sequence, send_time, state)


@dataclass
class DeadReckonMirror:
    """Shared extrapolation state: the last accepted base plus its history."""

    extrapolation_order: int = 1
    use_history_fit: bool = False
    literal_accel: bool = False
    base: KinematicState | None = None
    history: PositionHistory = field(default_factory=PositionHistory)

    def __post_init__(self):
        if self.extrapolation_order not in (0, 1, 2):
            raise DomainError(f"extrapolation order must be 0, 1 or 2, got {self.extrapolation_order}")

    def update(self, state: KinematicState) -> None:
        if self.base is not None and state.timestamp < self.base.timestamp:
            raise DomainError("mirror base timestamp must never decrease")
        if self.base is None or state.timestamp > self.base.timestamp:
            self.history.push(state.timestamp, state.position)
        self.base = state

    def basis_state(self) -> KinematicState:
        """The state estimates extrapolate from (history fit when enabled)."""
        if self.base is None:
            raise NotInitializedError("no state applied to mirror yet")
        if self.use_history_fit and len(self.history) >= 3:
            return fit_history_quadratic(self.history)
        return self.base

    def estimate(self, t: float) -> Vec3:
        return extrapolate(self.basis_state(), t, self.extrapolation_order, self.literal_accel)


@dataclass(frozen=True)
class FixedThreshold:
    """Constant position/orientation thresholds."""

    th_pos: float
    th_or: float = math.inf

    def __post_init__(self):
        if not self.th_pos > 0 or not self.th_or > 0:
            raise DomainError("thresholds must be positive")


@dataclass(frozen=True)
class MultiLevelThreshold:
    """Viewer-distance bands: closer viewers get tighter thresholds.

    bands are (distance_upper_bound, th_pos) pairs sorted by distance;
    viewers beyond the last bound fall into the last band.
    """

    bands: tuple[tuple[float, float], ...]
    th_or: float = math.inf

    def __post_init__(self):
        if not self.bands:
            raise DomainError("MultiLevel needs at least one band")
        object.__setattr__(self, "bands", tuple((float(d), float(th)) for d, th in self.bands))
        dists = [d for d, _ in self.bands]
        ths = [th for _, th in self.bands]
        if any(b <= a for a, b in zip(dists, dists[1:])):
            raise DomainError("band distance bounds must increase strictly")
        if any(th <= 0 for th in ths):
            raise DomainError("thresholds must be positive")
        if any(b < a for a, b in zip(ths, ths[1:])):
            raise DomainError("band thresholds must be nondecreasing with distance")
        if not self.th_or > 0:
            raise DomainError("thresholds must be positive")


@dataclass(frozen=True)
class AnfisThreshold:
    """Adaptive position threshold from a fuzzy network, clamped to a range.

    The network reads (position-error magnitude, speed, acceleration
    magnitude); its output is clipped into [th_min, th_max] so the policy
    can never emit a nonpositive or runaway threshold.
    """

    network: AnfisNetwork
    th_min: float
    th_max: float
    th_or: float = math.inf

    def __post_init__(self):
        if not 0 < self.th_min <= self.th_max:
            raise DomainError(f"need 0 < th_min <= th_max, got {self.th_min}, {self.th_max}")
        if not self.th_or > 0:
            raise DomainError("thresholds must be positive")


ThresholdPolicy = FixedThreshold | MultiLevelThreshold | AnfisThreshold


@dataclass(frozen=True)
class ThresholdContext:
    """Signals a policy may consult when picking the active threshold."""

    viewer_distance: float = 0.0
    position_error: float = 0.0
    speed: float = 0.0
    accel_magnitude: float = 0.0

    def __post_init__(self):
        if self.viewer_distance < 0:
            raise DomainError("viewer_distance must be >= 0")
        for v in (self.viewer_distance, self.position_error, self.speed, self.accel_magnitude):
            if not math.isfinite(v):
                raise DomainError("context fields must be finite")


def current_threshold(policy: ThresholdPolicy, context: ThresholdContext) -> tuple[float, float]:
    """Active (th_pos, th_or) pair for this instant."""
    if isinstance(policy, FixedThreshold):
        return (policy.th_pos, policy.th_or)
    if isinstance(policy, MultiLevelThreshold):
        for bound, th in policy.bands:
            if context.viewer_distance <= bound:
                return (th, policy.th_or)
        return (policy.bands[-1][1], policy.th_or)
    if isinstance(policy, AnfisThreshold):
        trace = forward(
            policy.network, context.position_error, context.speed, context.accel_magnitude
        )
        th = min(max(trace.output, policy.th_min), policy.th_max)
        return (th, policy.th_or)
    raise DomainError(f"unknown threshold policy {type(policy).__name__}")


@dataclass(frozen=True)
class Snap:
    """Jump straight onto each new update."""


@dataclass(frozen=True)
class LinearBlend:
    """Fade from the old estimate onto the new one over a fixed window."""

    window: float = 0.2

    def __post_init__(self):
        if not self.window > 0:
            raise DomainError(f"blend window must be positive, got {self.window}")


Convergence = Snap | LinearBlend


class SenderSite:
    """Owns the true trajectory and decides when updates go out.

    Each tick compares the truth against the mirrored extrapolation and
    emits a PDU when the position or orientation gap crosses the policy's
    threshold, or when the heartbeat timer expires. The mirror resets to
    the truth on every emission, so the local error restarts from zero.
    """

    def __init__(
        self,
        trajectory: Trajectory,
        mirror: DeadReckonMirror,
        policy: ThresholdPolicy,
        *,
        tick_dt: float,
        heartbeat_period: float = 5.0,
        entity_id: int = 1,
        viewer_position: Vec3 = ZERO3,
    ):
        if not tick_dt > 0:
            raise DomainError(f"tick_dt must be positive, got {tick_dt}")
        if not heartbeat_period > 0:
            raise DomainError(f"heartbeat_period must be positive, got {heartbeat_period}")
        self.trajectory = trajectory
        self.mirror = mirror
        self.policy = policy
        self.tick_dt = tick_dt
        self.heartbeat_period = heartbeat_period
        self.entity_id = entity_id
        self.viewer_position = viewer_position
        self.last_send_time = -math.inf
        self.sequence = 0
        self.packets_sent = 0
        self.initial_sends = 0
        self.threshold_sends = 0
        self.heartbeat_sends = 0
        self._last_tick = -math.inf
        # Diagnostics refreshed every tick, read by the harness.
        self.last_e_pos = 0.0
        self.last_e_or = 0.0
        self.last_th_pos = math.nan
        self.last_th_or = math.nan
        self.last_signed_error = 0.0

    def sender_tick(self, t: float) -> EntityStatePdu | None:
        """Advance to time t; returns the PDU to transmit, if any."""
        if t < self._last_tick:
            raise DomainError(f"ticks must not go backwards ({t} after {self._last_tick})")
        self._last_tick = t
        actual = sample_state(self.trajectory, t)
        fresh = self.mirror.base is None
        if fresh:
            e_pos, e_or, signed = math.inf, math.inf, 0.0
        else:
            est = self.mirror.estimate(t)
            err = actual.position - est
            e_pos = err.norm()
            e_or = heading_gap(actual.orientation, self.mirror.basis_state().orientation)
            speed = actual.velocity.norm()
            signed = err.dot(actual.velocity) / speed if speed > 0 else e_pos
        context = ThresholdContext(
            viewer_distance=(actual.position - self.viewer_position).norm(),
            position_error=0.0 if fresh else e_pos,
            speed=actual.velocity.norm(),
            accel_magnitude=actual.acceleration.norm(),
        )
        th_pos, th_or = current_threshold(self.policy, context)
        self.last_e_pos = 0.0 if fresh else e_pos
        self.last_e_or = 0.0 if fresh else e_or
        self.last_th_pos = th_pos
        self.last_th_or = th_or
        self.last_signed_error = signed
        if fresh:
            self.initial_sends += 1
        elif e_pos > th_pos or e_or > th_or:
            self.threshold_sends += 1
        elif t - self.last_send_time >= self.heartbeat_period:
            self.heartbeat_sends += 1
        else:
            return None
        self.sequence += 1
        self.packets_sent += 1
        self.mirror.update(actual)
        self.last_send_time = t
        self.last_e_pos = 0.0
        self.last_e_or = 0.0
        return EntityStatePdu(self.entity_id, self.sequence, t, actual)


class ReceiverSite:
    """Mirrors the sender's extrapolation from whatever packets arrive."""

    def __init__(self, mirror: DeadReckonMirror, convergence: Convergence = Snap()):
        self.mirror = mirror
        self.convergence = convergence
        self.highest_sequence_applied = 0
        self.applied_count = 0
        self.stale_discarded = 0
        self._pending: tuple[KinematicState, float] | None = None

    def receiver_apply(self, pdu: EntityStatePdu, t_arrive: float) -> None:
        """Accept one arrived packet; stale sequences are dropped silently."""
        if t_arrive < pdu.send_time:
            raise DomainError(f"packet cannot arrive at {t_arrive} before send {pdu.send_time}")
        if pdu.sequence <= self.highest_sequence_applied:
            self.stale_discarded += 1
            return
        if isinstance(self.convergence, LinearBlend) and self.mirror.base is not None:
            old = self._rebased_state(t_arrive)
            self._pending = (old, t_arrive + self.convergence.window)
        self.mirror.update(pdu.state)
        self.highest_sequence_applied = pdu.sequence
        self.applied_count += 1

    def _rebased_state(self, t: float) -> KinematicState:
        """Current estimate repackaged as a state anchored at time t.

        Exact when no earlier blend is still active (re-expanding the
        quadratic about t); during an overlapping blend the value is still
        continuous but the curve's derivatives come from the newest base.
        """
        basis = self.mirror.basis_state()
        order = self.mirror.extrapolation_order
        dt = t - basis.timestamp
        vel = acc = ZERO3
        if order >= 1:
            vel = basis.velocity
        if order == 2:
            acc = basis.acceleration
            slope = 2.0 * dt if self.mirror.literal_accel else dt
            vel = vel + acc.scaled(slope)
        return KinematicState(self.receiver_estimate(t), vel, acc, basis.orientation, t)

    def receiver_estimate(self, t: float) -> Vec3:
        """Best position estimate at time t (blend-aware)."""
        if self.mirror.base is None:
            raise NotInitializedError("receiver has not applied any packet yet")
        new = self.mirror.estimate(t)
        if self._pending is not None:
            old_state, end_time = self._pending
            if t >= end_time:
                self._pending = None
                return new
            window = end_time - old_state.timestamp
            s = max(0.0, (t - old_state.timestamp) / window)
            old = extrapolate(old_state, t, self.mirror.extrapolation_order, self.mirror.literal_accel)
            return old.scaled(1.0 - s) + new.scaled(s)
        return new
