"""Scenario config documents: sectioned key-value text, strictly validated.

Format: `[section]` headers, `key = value` lines, `#` comments, blank
lines. Keys carry their unit in the name (duration_s, base_delay_ms).
Unknown sections or keys are rejected; every problem is reported with its
line number, and all problems are collected before raising.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .anfis import load_network
from .errors import ConfigError
from .kinematics import (
    Circular,
    ConstantAccel,
    Linear,
    Sinusoidal,
    Trajectory,
    Vec3,
    ZERO3,
)
from .netsim import (
    Jitter,
    NetworkModel,
    QoSProfile,
    Scenario,
    TruncatedNormalJitter,
    UniformJitter,
)
from .reckoning import (
    AnfisThreshold,
    Convergence,
    FixedThreshold,
    LinearBlend,
    MultiLevelThreshold,
    Snap,
    ThresholdPolicy,
)

SCHEMA_VERSION = 1

_SECTION_ORDER = ("trajectory", "sender", "receiver", "policy", "network", "qos", "run", "anfis")
_REQUIRED = object()


def _pfloat(s: str) -> float:
    try:
        v = float(s)
    except ValueError:
        raise ValueError(f"not a number: {s!r}") from None
    if math.isnan(v):
        raise ValueError("must not be NaN")
    return v


def _pint(s: str) -> int:
    try:
        return int(s)
    except ValueError:
        raise ValueError(f"not an integer: {s!r}") from None


def _pbool(s: str) -> bool:
    low = s.lower()
    if low in ("true", "false"):
        return low == "true"
    raise ValueError(f"expected true or false, got {s!r}")


def _pvec3(s: str) -> Vec3:
    parts = [p.strip() for p in s.split(",")]
    if len(parts) != 3:
        raise ValueError(f"expected 'x, y, z', got {s!r}")
    return Vec3(*(_pfloat(p) for p in parts))


def _pbands(s: str) -> tuple[tuple[float, float], ...]:
    bands = []
    for part in s.split(","):
        bound, sep, th = part.strip().partition(":")
        if not sep:
            raise ValueError(f"expected 'distance:threshold' pairs, got {part.strip()!r}")
        bands.append((_pfloat(bound.strip()), _pfloat(th.strip())))
    if not bands:
        raise ValueError("needs at least one band")
    return tuple(bands)


def _pfloats(s: str) -> tuple[float, ...]:
    vals = tuple(_pfloat(p.strip()) for p in s.split(",") if p.strip())
    if not vals:
        raise ValueError("needs at least one value")
    return vals


def _penum(*options: str):
    def parse(s: str) -> str:
        low = s.lower()
        if low in options:
            return low
        raise ValueError(f"expected one of {', '.join(options)}; got {s!r}")

    return parse


def _positive(v) -> str | None:
    return None if v > 0 else f"must be > 0 (got {v})"


def _nonneg(v) -> str | None:
    return None if v >= 0 else f"must be >= 0 (got {v})"


def _fraction(v) -> str | None:
    return None if 0 <= v <= 1 else f"must be in [0, 1] (got {v})"


class _Reader:
    """Typed access over the raw (value, line) table, collecting issues."""

    def __init__(self, sections: dict, section_lines: dict, issues: list[str]):
        self.sections = sections
        self.section_lines = section_lines
        self.issues = issues
        self.used: set[tuple[str, str]] = set()

    def has(self, section: str) -> bool:
        return section in self.sections

    def get(self, section: str, key: str, parse, default=_REQUIRED, check=None):
        entry = self.sections.get(section, {}).get(key)
        if entry is None:
            if default is _REQUIRED:
                self.issues.append(f"[{section}]: missing required key {key!r}")
                return None
            return default
        self.used.add((section, key))
        value, line = entry
        try:
            parsed = parse(value)
        except ValueError as exc:
            self.issues.append(f"line {line}: [{section}] {key}: {exc}")
            return None
        if check is not None:
            problem = check(parsed)
            if problem:
                self.issues.append(f"line {line}: [{section}] {key}: {problem}")
                return None
        return parsed

    def flag_leftovers(self, section: str, why: str = "") -> None:
        for key, (_, line) in self.sections.get(section, {}).items():
            if (section, key) not in self.used:
                suffix = f" ({why})" if why else ""
                self.issues.append(f"line {line}: unknown key {key!r} in [{section}]{suffix}")

    def flag_unknown_sections(self) -> None:
        known = set(_SECTION_ORDER) | {""}
        for name in self.sections:
            if name not in known:
                self.issues.append(f"line {self.section_lines[name]}: unknown section [{name}]")


def _raw_parse(text: str):
    sections: dict[str, dict[str, tuple[str, int]]] = {"": {}}
    section_lines: dict[str, int] = {"": 0}
    issues: list[str] = []
    current = ""
    for idx, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                issues.append(f"line {idx}: malformed section header {raw.strip()!r}")
                continue
            current = line[1:-1].strip()
            if current in sections and current:
                issues.append(f"line {idx}: duplicate section [{current}]")
            sections.setdefault(current, {})
            section_lines.setdefault(current, idx)
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            issues.append(f"line {idx}: expected 'key = value', got {raw.strip()!r}")
            continue
        if key in sections[current]:
            issues.append(f"line {idx}: duplicate key {key!r} in [{current or 'top level'}]")
            continue
        sections[current][key] = (value, idx)
    return sections, section_lines, issues


@dataclass(frozen=True)
class AnfisTrainConfig:
    """Hyperparameters for training an adaptive-threshold network."""

    epochs: int = 10
    eta: float = 0.01
    candidates: tuple[float, ...] = (0.1, 0.3, 0.5)
    training_points: int = 400
    th_min: float = 0.1
    th_max: float = 0.5
    mf_kind: str = "gbell"


@dataclass
class ScenarioConfig:
    """Fully validated scenario plus the normalized document it came from."""

    schema_version: int
    trajectory: Trajectory
    order: int
    tick_dt: float
    heartbeat_s: float
    use_history_fit: bool
    literal_accel: bool
    entity_id: int
    viewer_position: Vec3
    convergence: Convergence
    policy: ThresholdPolicy
    base_delay_s: float
    jitter: Jitter | None
    loss_prob: float
    enforce_fifo: bool
    qos: QoSProfile | None
    duration_s: float
    seed: int
    measurement_dt: float
    anfis_train: AnfisTrainConfig
    doc: dict[str, dict[str, str]] = field(default_factory=dict)

    def to_scenario(self, *, policy: ThresholdPolicy | None = None, seed: int | None = None) -> Scenario:
        network = NetworkModel(
            base_delay_s=self.base_delay_s,
            jitter=self.jitter,
            loss_prob=self.loss_prob,
            seed=self.seed if seed is None else seed,
            enforce_fifo=self.enforce_fifo,
        )
        return Scenario(
            trajectory=self.trajectory,
            policy=self.policy if policy is None else policy,
            network=network,
            duration_s=self.duration_s,
            tick_dt=self.tick_dt,
            measurement_dt=self.measurement_dt,
            extrapolation_order=self.order,
            use_history_fit=self.use_history_fit,
            literal_accel=self.literal_accel,
            heartbeat_period=self.heartbeat_s,
            convergence=self.convergence,
            qos=self.qos,
            viewer_position=self.viewer_position,
            entity_id=self.entity_id,
        )


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, Vec3):
        return f"{value.x!r}, {value.y!r}, {value.z!r}"
    return str(value)


def parse_scenario(text: str, *, base_dir=None) -> ScenarioConfig:
    """Validate a config document; raises ConfigError listing every problem.

    `base_dir` anchors relative file references (the ANFIS network file).
    """
    sections, section_lines, issues = _raw_parse(text)
    r = _Reader(sections, section_lines, issues)
    doc: dict[str, dict[str, str]] = {"": {}}

    schema = r.get("", "schema_version", _pint, default=SCHEMA_VERSION)
    if schema is not None and schema != SCHEMA_VERSION:
        issues.append(f"[]: unsupported schema_version {schema} (expected {SCHEMA_VERSION})")
    r.flag_leftovers("")
    doc[""]["schema_version"] = str(SCHEMA_VERSION)

    # --- trajectory ---------------------------------------------------
    trajectory = None
    duration_s = r.get("run", "duration_s", _pfloat, check=_positive)
    kind = r.get("trajectory", "kind", _penum("circular", "sinusoidal", "linear", "constant_accel"))
    traj_doc: dict[str, str] = {}
    span = duration_s if duration_s is not None else math.inf
    if kind == "circular":
        radius = r.get("trajectory", "radius_m", _pfloat, check=_positive)
        rate = r.get("trajectory", "angular_rate_rad_s", _pfloat)
        if radius is not None and rate is not None:
            trajectory = Circular(radius, rate, span)
            traj_doc = {"kind": kind, "radius_m": _fmt(radius), "angular_rate_rad_s": _fmt(rate)}
    elif kind == "sinusoidal":
        amp = r.get("trajectory", "amplitude_m", _pfloat, check=_nonneg)
        rate = r.get("trajectory", "angular_rate_rad_s", _pfloat)
        drift = r.get("trajectory", "drift_velocity_m_s", _pfloat, default=0.0)
        if None not in (amp, rate, drift):
            trajectory = Sinusoidal(amp, rate, drift, span)
            traj_doc = {
                "kind": kind,
                "amplitude_m": _fmt(amp),
                "angular_rate_rad_s": _fmt(rate),
                "drift_velocity_m_s": _fmt(drift),
            }
    elif kind == "linear":
        v0 = r.get("trajectory", "v0_m_s", _pvec3, default=ZERO3)
        if v0 is not None:
            trajectory = Linear(v0, span)
            traj_doc = {"kind": kind, "v0_m_s": _fmt(v0)}
    elif kind == "constant_accel":
        v0 = r.get("trajectory", "v0_m_s", _pvec3, default=ZERO3)
        a0 = r.get("trajectory", "a0_m_s2", _pvec3, default=ZERO3)
        if v0 is not None and a0 is not None:
            trajectory = ConstantAccel(v0, a0, span)
            traj_doc = {"kind": kind, "v0_m_s": _fmt(v0), "a0_m_s2": _fmt(a0)}
    r.flag_leftovers("trajectory", f"not used by kind {kind!r}" if kind else "")
    doc["trajectory"] = traj_doc

    # --- sender --------------------------------------------------------
    order = r.get("sender", "order", _pint, default=2,
                  check=lambda v: None if v in (0, 1, 2) else f"must be 0, 1 or 2 (got {v})")
    tick_dt = r.get("sender", "tick_dt_s", _pfloat, default=0.01, check=_positive)
    heartbeat = r.get("sender", "heartbeat_s", _pfloat, default=5.0, check=_positive)
    history = r.get("sender", "use_history_fit", _pbool, default=False)
    literal = r.get("sender", "literal_accel", _pbool, default=False)
    entity_id = r.get("sender", "entity_id", _pint, default=1, check=_nonneg)
    viewer = r.get("sender", "viewer_position_m", _pvec3, default=ZERO3)
    r.flag_leftovers("sender")
    doc["sender"] = {
        "order": _fmt(order), "tick_dt_s": _fmt(tick_dt), "heartbeat_s": _fmt(heartbeat),
        "use_history_fit": _fmt(history), "literal_accel": _fmt(literal),
        "entity_id": _fmt(entity_id), "viewer_position_m": _fmt(viewer),
    } if None not in (order, tick_dt, heartbeat, history, literal, entity_id, viewer) else {}

    # --- receiver ------------------------------------------------------
    conv_kind = r.get("receiver", "convergence", _penum("snap", "linear"), default="snap")
    window = r.get("receiver", "blend_window_s", _pfloat, default=0.2, check=_positive)
    convergence: Convergence = Snap()
    doc["receiver"] = {}
    if conv_kind is not None:
        if conv_kind == "linear" and window is not None:
            convergence = LinearBlend(window)
            doc["receiver"] = {"convergence": "linear", "blend_window_s": _fmt(window)}
        else:
            doc["receiver"] = {"convergence": "snap"}
    r.flag_leftovers("receiver")

    # --- policy ----------------------------------------------------------
    policy = None
    policy_doc: dict[str, str] = {}
    pkind = r.get("policy", "kind", _penum("fixed", "multilevel", "anfis"))
    th_or = r.get("policy", "th_or_rad", _pfloat, default=math.inf, check=_positive)
    if pkind == "fixed":
        th_pos = r.get("policy", "th_pos_m", _pfloat, check=_positive)
        if th_pos is not None and th_or is not None:
            policy = FixedThreshold(th_pos, th_or)
            policy_doc = {"kind": pkind, "th_pos_m": _fmt(th_pos), "th_or_rad": _fmt(th_or)}
    elif pkind == "multilevel":
        bands = r.get("policy", "bands", _pbands)
        if bands is not None and th_or is not None:
            try:
                policy = MultiLevelThreshold(bands, th_or)
            except Exception as exc:
                line = sections["policy"]["bands"][1]
                issues.append(f"line {line}: [policy] bands: {exc}")
            else:
                text_bands = ", ".join(f"{_fmt(d)}:{_fmt(th)}" for d, th in bands)
                policy_doc = {"kind": pkind, "bands": text_bands, "th_or_rad": _fmt(th_or)}
    elif pkind == "anfis":
        net_file = r.get("policy", "network_file", str)
        th_min = r.get("policy", "th_min_m", _pfloat, check=_positive)
        th_max = r.get("policy", "th_max_m", _pfloat, check=_positive)
        if None not in (net_file, th_min, th_max, th_or):
            path = Path(net_file)
            if not path.is_absolute():
                path = Path(base_dir or ".") / path
            try:
                network = load_network(path)
                policy = AnfisThreshold(network, th_min, th_max, th_or)
            except Exception as exc:
                line = sections["policy"]["network_file"][1]
                issues.append(f"line {line}: [policy] network_file: {exc}")
            else:
                policy_doc = {
                    "kind": pkind, "network_file": net_file,
                    "th_min_m": _fmt(th_min), "th_max_m": _fmt(th_max), "th_or_rad": _fmt(th_or),
                }
    r.flag_leftovers("policy", f"not used by kind {pkind!r}" if pkind else "")
    doc["policy"] = policy_doc

    # --- network ------------------------------------------------------
    base_delay_ms = r.get("network", "base_delay_ms", _pfloat, default=0.0, check=_nonneg)
    jkind = r.get("network", "jitter", _penum("none", "uniform", "normal"), default="none")
    loss = r.get("network", "loss_prob", _pfloat, default=0.0, check=_fraction)
    fifo = r.get("network", "enforce_fifo", _pbool, default=False)
    jitter: Jitter | None = None
    net_doc: dict[str, str] = {}
    if None not in (base_delay_ms, jkind, loss, fifo):
        net_doc = {"base_delay_ms": _fmt(base_delay_ms), "jitter": jkind,
                   "loss_prob": _fmt(loss), "enforce_fifo": _fmt(fifo)}
        if jkind == "uniform":
            hw = r.get("network", "jitter_half_width_ms", _pfloat, check=_nonneg)
            if hw is not None:
                jitter = UniformJitter(hw / 1000.0)
                net_doc["jitter_half_width_ms"] = _fmt(hw)
        elif jkind == "normal":
            sigma = r.get("network", "jitter_sigma_ms", _pfloat, check=_nonneg)
            if sigma is not None:
                jitter = TruncatedNormalJitter(sigma / 1000.0)
                net_doc["jitter_sigma_ms"] = _fmt(sigma)
    r.flag_leftovers("network", f"not used by jitter {jkind!r}" if jkind else "")
    doc["network"] = net_doc

    # --- qos ------------------------------------------------------------
    qos = None
    doc["qos"] = {}
    if r.has("qos"):
        profile = r.get("qos", "profile", _penum("tight", "loose", "custom"))
        if profile is not None:
            defaults = {"tight": QoSProfile.tight(), "loose": QoSProfile.loose()}.get(profile)
            dt_req = _REQUIRED if profile == "custom" else defaults.dt_max_s * 1000.0
            loss_req = _REQUIRED if profile == "custom" else defaults.loss_max
            dt_max_ms = r.get("qos", "dt_max_ms", _pfloat, default=dt_req, check=_positive)
            loss_max = r.get("qos", "loss_max", _pfloat, default=loss_req, check=_fraction)
            if dt_max_ms is not None and loss_max is not None:
                coupling = "loose" if profile == "loose" else "tight"
                qos = QoSProfile(coupling, dt_max_ms / 1000.0, loss_max)
                doc["qos"] = {"profile": profile, "dt_max_ms": _fmt(dt_max_ms), "loss_max": _fmt(loss_max)}
    r.flag_leftovers("qos")

    # --- run ------------------------------------------------------------
    seed = r.get("run", "seed", _pint, default=0)
    meas_dt = r.get("run", "measurement_dt_s", _pfloat, default=tick_dt, check=_positive)
    r.flag_leftovers("run")
    if meas_dt is not None and tick_dt is not None and meas_dt > tick_dt:
        issues.append(f"[run]: measurement_dt_s ({meas_dt}) must not exceed tick_dt_s ({tick_dt})")
    doc["run"] = {
        "duration_s": _fmt(duration_s), "seed": _fmt(seed), "measurement_dt_s": _fmt(meas_dt),
    } if None not in (duration_s, seed, meas_dt) else {}

    # --- anfis training -------------------------------------------------
    epochs = r.get("anfis", "epochs", _pint, default=10, check=_positive)
    eta = r.get("anfis", "eta", _pfloat, default=0.01, check=_nonneg)
    candidates = r.get("anfis", "candidates", _pfloats, default=(0.1, 0.3, 0.5),
                       check=lambda vs: None if all(v > 0 for v in vs) else "candidates must be > 0")
    points = r.get("anfis", "training_points", _pint, default=400, check=_positive)
    th_min_t = r.get("anfis", "th_min_m", _pfloat, default=None, check=_positive)
    th_max_t = r.get("anfis", "th_max_m", _pfloat, default=None, check=_positive)
    mf_kind = r.get("anfis", "mf_kind", _penum("gbell", "sigmoid"), default="gbell")
    r.flag_leftovers("anfis")
    anfis_train = AnfisTrainConfig()
    if None not in (epochs, eta, candidates, points, mf_kind):
        anfis_train = AnfisTrainConfig(
            epochs=epochs,
            eta=eta,
            candidates=tuple(sorted(candidates)),
            training_points=points,
            th_min=min(candidates) if th_min_t is None else th_min_t,
            th_max=max(candidates) if th_max_t is None else th_max_t,
            mf_kind=mf_kind,
        )
        doc["anfis"] = {
            "epochs": _fmt(anfis_train.epochs), "eta": _fmt(anfis_train.eta),
            "candidates": ", ".join(_fmt(c) for c in anfis_train.candidates),
            "training_points": _fmt(anfis_train.training_points),
            "th_min_m": _fmt(anfis_train.th_min), "th_max_m": _fmt(anfis_train.th_max),
            "mf_kind": anfis_train.mf_kind,
        }

    r.flag_unknown_sections()
    if issues:
        raise ConfigError(issues)

    return ScenarioConfig(
        schema_version=SCHEMA_VERSION,
        trajectory=trajectory,
        order=order,
        tick_dt=tick_dt,
        heartbeat_s=heartbeat,
        use_history_fit=history,
        literal_accel=literal,
        entity_id=entity_id,
        viewer_position=viewer,
        convergence=convergence,
        policy=policy,
        base_delay_s=base_delay_ms / 1000.0,
        jitter=jitter,
        loss_prob=loss,
        enforce_fifo=fifo,
        qos=qos,
        duration_s=duration_s,
        seed=seed,
        measurement_dt=meas_dt,
        anfis_train=anfis_train,
        doc=doc,
    )


def emit_config(cfg: ScenarioConfig) -> str:
    """Serialize back to config text; parsing the result is a fixed point."""
    lines = [f"schema_version = {cfg.doc['']['schema_version']}"]
    for section in _SECTION_ORDER:
        body = cfg.doc.get(section)
        if not body:
            continue
        lines.append("")
        lines.append(f"[{section}]")
        for key, value in body.items():
            lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
