"""Aggregation layer: policy comparisons, training-data generation, CSV.

Everything here is deterministic given the scenario seed, so comparison
tables and training sets are reproducible artifacts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .anfis import AnfisNetwork, TrainingSet, TrainReport, default_network, load_network, train_epoch
from .config import ScenarioConfig
from .errors import DomainError
from .kinematics import sample_state
from .metrics import MetricsReport
from .netsim import Scenario, run_scenario
from .reckoning import (
    AnfisThreshold,
    FixedThreshold,
    MultiLevelThreshold,
    ThresholdPolicy,
)

CANONICAL_CONFIG = """\
schema_version = 1

[trajectory]
kind = sinusoidal
amplitude_m = 5.0
angular_rate_rad_s = 1.0
drift_velocity_m_s = 1.0

[sender]
order = 2
tick_dt_s = 0.01

[receiver]
convergence = snap

[policy]
kind = fixed
th_pos_m = 0.5

[run]
duration_s = 120.0
seed = 42
"""


def aoi_policy() -> MultiLevelThreshold:
    """Interest-zone preset: coarse thresholds once the entity is far away."""
    return MultiLevelThreshold(((10.0, 0.3), (30.0, 0.6), (60.0, 0.9), (120.0, 1.2)))


def sr_policy() -> MultiLevelThreshold:
    """Near-band preset: tight close-range bands, moderate far band."""
    return MultiLevelThreshold(((20.0, 0.2), (60.0, 0.35), (120.0, 0.45)))


def policy_label(policy: ThresholdPolicy) -> str:
    if isinstance(policy, FixedThreshold):
        return f"fixed({policy.th_pos:g})"
    if isinstance(policy, MultiLevelThreshold):
        bands = ";".join(f"{d:g}:{th:g}" for d, th in policy.bands)
        return f"multilevel({bands})"
    if isinstance(policy, AnfisThreshold):
        return f"anfis({policy.th_min:g}..{policy.th_max:g})"
    return type(policy).__name__


@dataclass(frozen=True)
class ComparisonRow:
    """One policy's outcome on the shared scenario."""

    label: str
    mean_e_r_m: float
    packets_sent: int
    mean_update_frequency_hz: float


@dataclass(frozen=True)
class ComparisonTable:
    """Rows from identical trajectory/seed/duration, best error first."""

    rows: tuple[ComparisonRow, ...]
    duration_s: float
    seed: int | None


def run_compare(base: Scenario, policies) -> ComparisonTable:
    """Run the same scenario once per policy; rows sorted by mean error.

    `policies` holds ThresholdPolicy values or (label, policy) pairs; at
    least two are required for a comparison.
    """
    items = []
    for entry in policies:
        if isinstance(entry, tuple):
            items.append(entry)
        else:
            items.append((policy_label(entry), entry))
    if len(items) < 2:
        raise DomainError("comparison needs at least 2 policies")
    rows = []
    seed = base.network.seed
    for label, policy in items:
        report = run_scenario(replace(base, policy=policy))
        rows.append(
            ComparisonRow(label, report.mean_e_r, report.packets_sent, report.mean_update_frequency)
        )
    rows.sort(key=lambda r: (r.mean_e_r_m, r.label))
    return ComparisonTable(tuple(rows), base.duration_s, seed)


def generate_training_set(
    sc: Scenario, candidates, *, budget_factor: float = 1.5, max_records: int | None = None
) -> TrainingSet:
    """Sweep fixed thresholds and label the winner's trace with its value.

    Each candidate threshold runs the identical scenario (same seed). The
    winner minimizes mean receiver error among candidates whose packet
    count stays within budget_factor times the largest candidate's count;
    ties go to the larger threshold (fewer packets). Every record pairs
    the winner run's (sender error, speed, |acceleration|) at one
    measurement instant with the winning threshold as target.
    """
    cands = sorted(float(c) for c in candidates)
    if not cands:
        raise DomainError("candidate threshold list must not be empty")
    if any(c <= 0 for c in cands):
        raise DomainError("candidate thresholds must be positive")
    runs = {c: run_scenario(replace(sc, policy=FixedThreshold(c))) for c in cands}
    budget = budget_factor * runs[cands[-1]].packets_sent
    admissible = [c for c in cands if runs[c].packets_sent <= budget]
    winner = min(admissible, key=lambda c: (runs[c].mean_e_r, -c))
    trace = runs[winner]
    idx = np.arange(len(trace.times))
    if max_records is not None and max_records > 0 and len(idx) > max_records:
        stride = math.ceil(len(idx) / max_records)
        idx = idx[::stride]
    rows = []
    for i in idx:
        t = float(trace.times[i])
        state = sample_state(sc.trajectory, t)
        rows.append((trace.e_s[i], state.velocity.norm(), state.acceleration.norm()))
    inputs = np.array(rows)
    targets = np.full(len(rows), winner)
    return TrainingSet(inputs, targets)


def train_anfis(
    cfg: ScenarioConfig, *, epochs: int | None = None, eta: float | None = None,
    seed: int | None = None,
) -> tuple[AnfisNetwork, list[TrainReport]]:
    """Produce a trained adaptive-threshold network from a scenario config.

    Builds the training set by the candidate sweep, sizes the input
    universes from the candidate range and the trajectory's velocity and
    acceleration envelopes, then runs the hybrid loop for the configured
    number of epochs.
    """
    train_cfg = cfg.anfis_train
    n_epochs = train_cfg.epochs if epochs is None else epochs
    rate = train_cfg.eta if eta is None else eta
    if n_epochs < 1:
        raise DomainError(f"epochs must be >= 1, got {n_epochs}")
    base = cfg.to_scenario(seed=seed)
    data = generate_training_set(base, train_cfg.candidates, max_records=train_cfg.training_points)
    universes = (
        (0.0, max(train_cfg.candidates)),
        (0.0, max(base.trajectory.max_speed(), 1e-6)),
        (0.0, max(base.trajectory.max_accel(), 1e-6)),
    )
    net = default_network(universes, mf_kind=train_cfg.mf_kind, learning_rate=rate)
    reports = [train_epoch(net, data) for _ in range(n_epochs)]
    return net, reports


def trained_policy(cfg: ScenarioConfig, net: AnfisNetwork) -> AnfisThreshold:
    """Wrap a trained network with the configured clamp range."""
    return AnfisThreshold(net, cfg.anfis_train.th_min, cfg.anfis_train.th_max)


def parse_policy_spec(
    spec: str, *, base_dir=".", th_bounds: tuple[float, float] = (0.1, 0.5),
    config_policy: ThresholdPolicy | None = None,
) -> tuple[str, ThresholdPolicy]:
    """Decode one --policies entry.

    Grammar: `fixed:<th>[:<th_or>]`, `multilevel:<d>:<th>|<d>:<th>|...`,
    `anfis:<file>[:<min>:<max>]`, or the presets `aoi`, `sr`, `config`.
    """
    spec = spec.strip()
    try:
        if spec == "aoi":
            return ("aoi", aoi_policy())
        if spec == "sr":
            return ("sr", sr_policy())
        if spec == "config":
            if config_policy is None:
                raise DomainError("no config policy available for 'config'")
            return ("config", config_policy)
        kind, _, rest = spec.partition(":")
        if kind == "fixed":
            parts = rest.split(":") if rest else []
            if len(parts) not in (1, 2) or not parts[0]:
                raise DomainError("expected fixed:<th_pos>[:<th_or>]")
            th_or = float(parts[1]) if len(parts) == 2 else math.inf
            policy = FixedThreshold(float(parts[0]), th_or)
            return (policy_label(policy), policy)
        if kind == "multilevel":
            bands = []
            for chunk in rest.split("|"):
                d, sep, th = chunk.partition(":")
                if not sep:
                    raise DomainError("expected multilevel:<dist>:<th>|<dist>:<th>|...")
                bands.append((float(d), float(th)))
            policy = MultiLevelThreshold(tuple(bands))
            return (policy_label(policy), policy)
        if kind == "anfis":
            parts = rest.rsplit(":", 2)
            if len(parts) == 3 and not parts[0]:
                parts = [rest]
            if len(parts) == 3:
                file_part, lo_s, hi_s = parts
                lo, hi = float(lo_s), float(hi_s)
            else:
                file_part, (lo, hi) = rest, th_bounds
            if not file_part:
                raise DomainError("expected anfis:<network-file>[:<min>:<max>]")
            path = Path(file_part)
            if not path.is_absolute():
                path = Path(base_dir) / path
            policy = AnfisThreshold(load_network(path), lo, hi)
            return (policy_label(policy), policy)
        raise DomainError(f"unknown policy spec {spec!r}")
    except (ValueError, OSError) as exc:
        raise DomainError(f"bad policy spec {spec!r}: {exc}") from exc


def _g17(value: float) -> str:
    return f"{value:.17g}"


def emit_csv(result: MetricsReport | ComparisonTable) -> str:
    """Deterministic CSV: data table first, `# key,value` summary after.

    Reals are printed with 17 significant digits so parsing them back
    reproduces the exact float.
    """
    lines = []
    if isinstance(result, MetricsReport):
        lines.append("t,e_s,e_r,th")
        for t, e_s, e_r, th in zip(result.times, result.e_s, result.e_r, result.th):
            lines.append(f"{_g17(t)},{_g17(e_s)},{_g17(e_r)},{_g17(th)}")
        for key, value in result.summary().items():
            lines.append(f"# {key},{_g17(float(value))}")
    elif isinstance(result, ComparisonTable):
        lines.append("policy,mean_e_r_m,packets_sent,mean_update_frequency_hz")
        for row in result.rows:
            lines.append(
                f"{row.label},{_g17(row.mean_e_r_m)},{row.packets_sent},"
                f"{_g17(row.mean_update_frequency_hz)}"
            )
        lines.append(f"# duration_s,{_g17(result.duration_s)}")
        if result.seed is not None:
            lines.append(f"# seed,{_g17(float(result.seed))}")
    else:
        raise DomainError(f"cannot emit {type(result).__name__} as CSV")
    return "\n".join(lines) + "\n"
