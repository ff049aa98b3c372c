"""Deterministic lossy channel and the event loop driving a scenario.

The channel draws loss and delay from two independent seeded streams, so
repeat runs are bit-identical and measurement never perturbs delivery.
The event loop orders simultaneous events as tick, then arrivals, then
measurement, which makes the zero-delay channel degenerate exactly to the
sender's own error series.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .analysis import emax_bound
from .errors import DomainError
from .kinematics import ZERO3, Trajectory, Vec3, sample_state
from .metrics import MetricsReport
from .reckoning import (
    Convergence,
    DeadReckonMirror,
    EntityStatePdu,
    ReceiverSite,
    SenderSite,
    Snap,
    ThresholdPolicy,
    position_error,
)


@dataclass(frozen=True)
class QoSProfile:
    """Delivery limits a run is judged against."""

    coupling: str
    dt_max_s: float
    loss_max: float

    def __post_init__(self):
        if self.coupling not in ("tight", "loose"):
            raise DomainError(f"coupling must be 'tight' or 'loose', got {self.coupling!r}")
        if not (self.dt_max_s > 0 and 0 <= self.loss_max <= 1):
            raise DomainError("need dt_max_s > 0 and loss_max in [0, 1]")

    @classmethod
    def tight(cls) -> "QoSProfile":
        return cls("tight", 0.100, 0.02)

    @classmethod
    def loose(cls) -> "QoSProfile":
        return cls("loose", 0.300, 0.05)


@dataclass(frozen=True)
class UniformJitter:
    """Delay noise uniform in [-half_width, +half_width]."""

    half_width: float

    def __post_init__(self):
        if self.half_width < 0:
            raise DomainError(f"half_width must be >= 0, got {self.half_width}")

    def sample(self, rng: np.random.Generator) -> float:
        return float(rng.uniform(-self.half_width, self.half_width))


@dataclass(frozen=True)
class TruncatedNormalJitter:
    """Gaussian delay noise; the total delay is floored at zero."""

    sigma: float

    def __post_init__(self):
        if self.sigma < 0:
            raise DomainError(f"sigma must be >= 0, got {self.sigma}")

    def sample(self, rng: np.random.Generator) -> float:
        return float(rng.normal(0.0, self.sigma))


Jitter = UniformJitter | TruncatedNormalJitter


class NetworkModel:
    """Seeded delay/jitter/loss channel between one sender and one receiver."""

    def __init__(
        self,
        base_delay_s: float = 0.0,
        jitter: Jitter | None = None,
        loss_prob: float = 0.0,
        seed: int = 0,
        enforce_fifo: bool = False,
    ):
        if base_delay_s < 0:
            raise DomainError(f"base delay must be >= 0, got {base_delay_s}")
        if not 0 <= loss_prob <= 1:
            raise DomainError(f"loss probability must be in [0, 1], got {loss_prob}")
        self.base_delay_s = base_delay_s
        self.jitter = jitter
        self.loss_prob = loss_prob
        self.seed = seed
        self.enforce_fifo = enforce_fifo
        self.reset()

    def reset(self) -> None:
        """Rewind both random streams and the FIFO watermark."""
        self._loss_rng = np.random.default_rng([self.seed, 0])
        self._delay_rng = np.random.default_rng([self.seed, 1])
        self._last_arrival = -math.inf

    def transmit(self, pdu: EntityStatePdu, t_send: float) -> tuple[EntityStatePdu, float] | None:
        """Route one packet; None means it was lost."""
        if t_send < 0:
            raise DomainError(f"t_send must be >= 0, got {t_send}")
        if self._loss_rng.uniform() < self.loss_prob:
            return None
        delay = self.base_delay_s
        if self.jitter is not None:
            delay += self.jitter.sample(self._delay_rng)
        t_arrive = t_send + max(0.0, delay)
        if self.enforce_fifo and t_arrive < self._last_arrival:
            t_arrive = self._last_arrival
        self._last_arrival = t_arrive
        return (pdu, t_arrive)


def transmit(net: NetworkModel, pdu: EntityStatePdu, t_send: float):
    return net.transmit(pdu, t_send)


# Same-time events settle in this order, so a zero-delay arrival is
# applied after the tick that produced it and before that instant's
# measurement.
TICK, ARRIVAL, MEASURE = 0, 1, 2


class EventQueue:
    """Min-heap of (time, priority, insertion order, payload)."""

    def __init__(self):
        self._heap = []
        self._counter = 0

    def push(self, time: float, priority: int, payload) -> None:
        heapq.heappush(self._heap, (time, priority, self._counter, payload))
        self._counter += 1

    def pop(self):
        time, priority, _, payload = heapq.heappop(self._heap)
        return time, priority, payload

    def __len__(self) -> int:
        return len(self._heap)


@dataclass
class Scenario:
    """One complete experiment: motion, policy, channel, limits, sampling."""

    trajectory: Trajectory
    policy: ThresholdPolicy
    network: NetworkModel
    duration_s: float
    tick_dt: float = 0.01
    measurement_dt: float | None = None  # defaults to tick_dt
    extrapolation_order: int = 2
    use_history_fit: bool = False
    literal_accel: bool = False
    heartbeat_period: float = 5.0
    convergence: Convergence = Snap()
    qos: QoSProfile | None = None
    viewer_position: Vec3 = ZERO3
    entity_id: int = 1

    def __post_init__(self):
        if self.measurement_dt is None:
            self.measurement_dt = self.tick_dt
        if not self.duration_s > 0:
            raise DomainError(f"duration must be positive, got {self.duration_s}")
        if not 0 < self.measurement_dt <= self.tick_dt:
            raise DomainError("measurement_dt must be in (0, tick_dt]")
        if self.duration_s > self.trajectory.duration + 1e-9:
            raise DomainError(
                f"duration {self.duration_s} exceeds trajectory duration {self.trajectory.duration}"
            )


def _grid_count(duration: float, dt: float) -> int:
    return int(math.floor(duration / dt + 1e-9))


def run_scenario(sc: Scenario) -> MetricsReport:
    """Drive sender, channel and receiver over the scenario's duration.

    Sender ticks every tick_dt; produced packets go through the channel
    and are applied on arrival (arrivals past the end stay in flight).
    Every measurement_dt the true position is compared against both
    mirrors. Deterministic given the network seed.
    """
    sender = SenderSite(
        sc.trajectory,
        DeadReckonMirror(sc.extrapolation_order, sc.use_history_fit, sc.literal_accel),
        sc.policy,
        tick_dt=sc.tick_dt,
        heartbeat_period=sc.heartbeat_period,
        entity_id=sc.entity_id,
        viewer_position=sc.viewer_position,
    )
    receiver = ReceiverSite(
        DeadReckonMirror(sc.extrapolation_order, sc.use_history_fit, sc.literal_accel),
        sc.convergence,
    )
    sc.network.reset()

    queue = EventQueue()
    queue.push(0.0, TICK, 0)
    queue.push(0.0, MEASURE, 0)
    n_ticks = _grid_count(sc.duration_s, sc.tick_dt)
    n_measures = _grid_count(sc.duration_s, sc.measurement_dt)

    times, e_s_series, e_r_series, th_series = [], [], [], []
    delays = []
    delivered = dropped = in_flight = 0

    while queue:
        t, priority, payload = queue.pop()
        if priority == TICK:
            pdu = sender.sender_tick(t)
            if pdu is not None:
                routed = sc.network.transmit(pdu, t)
                if routed is None:
                    dropped += 1
                else:
                    routed_pdu, t_arrive = routed
                    if t_arrive <= sc.duration_s:
                        queue.push(t_arrive, ARRIVAL, routed_pdu)
                    else:
                        in_flight += 1
            if payload < n_ticks:
                queue.push((payload + 1) * sc.tick_dt, TICK, payload + 1)
        elif priority == ARRIVAL:
            receiver.receiver_apply(payload, t)
            delivered += 1
            delays.append(t - payload.send_time)
        else:
            actual = sample_state(sc.trajectory, t)
            e_s = position_error(actual.position, sender.mirror.estimate(t))
            if receiver.mirror.base is None:
                e_r = math.nan
            else:
                e_r = position_error(actual.position, receiver.receiver_estimate(t))
            times.append(t)
            e_s_series.append(e_s)
            e_r_series.append(e_r)
            th_series.append(sender.last_th_pos)
            if payload < n_measures:
                queue.push((payload + 1) * sc.measurement_dt, MEASURE, payload + 1)

    if sender.packets_sent != delivered + dropped + in_flight:
        raise DomainError("packet conservation violated in event loop")

    dt_ref = sc.qos.dt_max_s if sc.qos is not None else (max(delays) if delays else 0.0)
    bound = emax_bound(
        float(np.max(th_series)) if th_series else 0.0,
        2.0 * sc.trajectory.max_speed(),
        2.0 * sc.trajectory.max_accel(),
        dt_ref,
    )
    return MetricsReport(
        times=np.array(times),
        e_s=np.array(e_s_series),
        e_r=np.array(e_r_series),
        th=np.array(th_series),
        duration=sc.duration_s,
        packets_sent=sender.packets_sent,
        packets_delivered=delivered,
        packets_dropped=dropped,
        packets_stale=receiver.stale_discarded,
        packets_in_flight=in_flight,
        initial_sends=sender.initial_sends,
        threshold_sends=sender.threshold_sends,
        heartbeat_sends=sender.heartbeat_sends,
        delays=np.array(delays),
        seed=sc.network.seed,
        e_max_bound=bound.e_max,
    )


@dataclass(frozen=True)
class QoSViolation:
    """One way a run missed its profile."""

    kind: str  # latency | loss | spatial
    observed: float
    limit: float

    def __str__(self) -> str:
        units = {"latency": "s", "loss": "", "spatial": "m"}[self.kind]
        return f"{self.kind}: observed {self.observed:g}{units} exceeds limit {self.limit:g}{units}"


def qos_check(profile: QoSProfile, report: MetricsReport) -> list[QoSViolation]:
    """All the ways the run misses the profile; empty means it is met.

    Latency compares the worst observed delay against dt_max; loss the
    empirical drop fraction against loss_max; spatial fires when errors
    exceeded the threshold somewhere and the worst receiver error also
    broke the run's analytic bound.
    """
    out = []
    if report.delay_p100 > profile.dt_max_s:
        out.append(QoSViolation("latency", report.delay_p100, profile.dt_max_s))
    if report.observed_loss > profile.loss_max:
        out.append(QoSViolation("loss", report.observed_loss, profile.loss_max))
    if (
        report.e_max_bound is not None
        and report.incoherence_ratio > 0
        and report.max_e_r > report.e_max_bound
    ):
        out.append(QoSViolation("spatial", report.max_e_r, report.e_max_bound))
    return out
