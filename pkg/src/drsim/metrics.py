"""Run metrics: error time series, packet counters, delay statistics.

The receiver error column is NaN at measurement instants before the first
packet has been applied; every derived statistic is taken over the defined
samples only (and is 0.0 when there are none).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .reckoning import PDU_SIZE_BYTES


@dataclass
class MetricsReport:
    """Everything one scenario run measured."""

    times: np.ndarray
    e_s: np.ndarray  # sender-side error at each measurement instant
    e_r: np.ndarray  # receiver-side error; NaN before first arrival
    th: np.ndarray  # active position threshold at each instant
    duration: float
    packets_sent: int
    packets_delivered: int
    packets_dropped: int
    packets_stale: int
    packets_in_flight: int
    initial_sends: int
    threshold_sends: int
    heartbeat_sends: int
    delays: np.ndarray = field(default_factory=lambda: np.empty(0))
    seed: int | None = None
    e_max_bound: float | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.e_s = np.asarray(self.e_s, dtype=float)
        self.e_r = np.asarray(self.e_r, dtype=float)
        self.th = np.asarray(self.th, dtype=float)
        self.delays = np.asarray(self.delays, dtype=float)
        n = len(self.times)
        if not (len(self.e_s) == len(self.e_r) == len(self.th) == n):
            raise DomainError("time series columns must share one length")
        if self.duration <= 0:
            raise DomainError(f"duration must be positive, got {self.duration}")
        if self.packets_sent != (
            self.packets_delivered + self.packets_dropped + self.packets_in_flight
        ):
            raise DomainError("packet counters must satisfy sent = delivered + dropped + in flight")

    def _defined(self) -> np.ndarray:
        return ~np.isnan(self.e_r)

    @property
    def max_e_r(self) -> float:
        mask = self._defined()
        return float(self.e_r[mask].max()) if mask.any() else 0.0

    @property
    def mean_e_r(self) -> float:
        mask = self._defined()
        return float(self.e_r[mask].mean()) if mask.any() else 0.0

    @property
    def max_e_s(self) -> float:
        return float(self.e_s.max()) if len(self.e_s) else 0.0

    @property
    def incoherence_ratio(self) -> float:
        """Fraction of defined measurement instants with E_r above the threshold."""
        mask = self._defined()
        if not mask.any():
            return 0.0
        return float((self.e_r[mask] > self.th[mask]).mean())

    @property
    def mean_update_frequency(self) -> float:
        return self.packets_sent / self.duration

    @property
    def threshold_send_rate(self) -> float:
        return self.threshold_sends / self.duration

    @property
    def bandwidth_bytes_per_s(self) -> float:
        return PDU_SIZE_BYTES * self.packets_delivered / self.duration

    @property
    def observed_loss(self) -> float:
        attempts = self.packets_delivered + self.packets_dropped
        return self.packets_dropped / attempts if attempts else 0.0

    @property
    def delay_mean(self) -> float:
        return float(self.delays.mean()) if len(self.delays) else 0.0

    @property
    def delay_p50(self) -> float:
        return float(np.percentile(self.delays, 50)) if len(self.delays) else 0.0

    @property
    def delay_p100(self) -> float:
        return float(self.delays.max()) if len(self.delays) else 0.0

    def summary(self) -> dict[str, float]:
        """Scalar metrics in a stable order, for the CSV summary block."""
        out = {
            "duration_s": self.duration,
            "packets_sent": self.packets_sent,
            "packets_delivered": self.packets_delivered,
            "packets_dropped": self.packets_dropped,
            "packets_stale": self.packets_stale,
            "packets_in_flight": self.packets_in_flight,
            "initial_sends": self.initial_sends,
            "threshold_sends": self.threshold_sends,
            "heartbeat_sends": self.heartbeat_sends,
            "mean_update_frequency_hz": self.mean_update_frequency,
            "threshold_send_rate_hz": self.threshold_send_rate,
            "max_e_s_m": self.max_e_s,
            "max_e_r_m": self.max_e_r,
            "mean_e_r_m": self.mean_e_r,
            "incoherence_ratio": self.incoherence_ratio,
            "bandwidth_bytes_per_s": self.bandwidth_bytes_per_s,
            "observed_loss": self.observed_loss,
            "delay_mean_s": self.delay_mean,
            "delay_p50_s": self.delay_p50,
            "delay_p100_s": self.delay_p100,
        }
        if self.seed is not None:
            out["seed"] = self.seed
        if self.e_max_bound is not None:
            out["e_max_bound_m"] = self.e_max_bound
        return out
