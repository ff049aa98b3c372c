"""Config document parsing, validation, and round-trip serialization."""

import math

import pytest

from drsim import (
    AnfisThreshold,
    CANONICAL_CONFIG,
    Circular,
    ConfigError,
    FixedThreshold,
    LinearBlend,
    MultiLevelThreshold,
    Sinusoidal,
    Snap,
    TruncatedNormalJitter,
    UniformJitter,
    Vec3,
    ZERO3,
    default_network,
    emit_config,
    parse_scenario,
    save_network,
)

FULL_DOC = """\
schema_version = 1

# drifting sinusoid with a banded policy over a noisy channel
[trajectory]
kind = sinusoidal
amplitude_m = 2.5
angular_rate_rad_s = 0.8
drift_velocity_m_s = 0.25

[sender]
order = 1
tick_dt_s = 0.02
heartbeat_s = 4.0
use_history_fit = true
literal_accel = true
entity_id = 9
viewer_position_m = 1.0, -2.0, 0.5

[receiver]
convergence = linear
blend_window_s = 0.3

[policy]
kind = multilevel
bands = 10:0.3, 30:0.6, 60:0.9
th_or_rad = 0.2

[network]
base_delay_ms = 40
jitter = uniform
jitter_half_width_ms = 20
loss_prob = 0.01
enforce_fifo = true

[qos]
profile = custom
dt_max_ms = 150
loss_max = 0.03

[run]
duration_s = 30.0
seed = 7
measurement_dt_s = 0.01

[anfis]
epochs = 5
eta = 0.02
candidates = 0.5, 0.1, 0.3
training_points = 200
mf_kind = sigmoid
"""


def issues_of(text: str, **kwargs) -> list[str]:
    with pytest.raises(ConfigError) as exc_info:
        parse_scenario(text, **kwargs)
    return exc_info.value.issues


def test_canonical_document_parses_to_expected_scenario():
    cfg = parse_scenario(CANONICAL_CONFIG)
    assert cfg.trajectory == Sinusoidal(5.0, 1.0, 1.0, 120.0)
    assert cfg.order == 2
    assert cfg.tick_dt == 0.01
    assert cfg.heartbeat_s == 5.0
    assert isinstance(cfg.convergence, Snap)
    assert cfg.policy == FixedThreshold(0.5, math.inf)
    assert cfg.base_delay_s == 0.0 and cfg.jitter is None and cfg.loss_prob == 0.0
    assert cfg.qos is None
    assert (cfg.duration_s, cfg.seed, cfg.measurement_dt) == (120.0, 42, 0.01)


def test_full_document_covers_every_section():
    cfg = parse_scenario(FULL_DOC)
    assert cfg.trajectory == Sinusoidal(2.5, 0.8, 0.25, 30.0)
    assert (cfg.order, cfg.tick_dt, cfg.heartbeat_s) == (1, 0.02, 4.0)
    assert cfg.use_history_fit and cfg.literal_accel
    assert cfg.entity_id == 9
    assert cfg.viewer_position == Vec3(1.0, -2.0, 0.5)
    assert cfg.convergence == LinearBlend(0.3)
    assert cfg.policy == MultiLevelThreshold(((10.0, 0.3), (30.0, 0.6), (60.0, 0.9)), 0.2)
    assert cfg.base_delay_s == pytest.approx(0.040)
    assert cfg.jitter == UniformJitter(0.020)
    assert cfg.loss_prob == 0.01 and cfg.enforce_fifo
    assert cfg.qos is not None
    assert (cfg.qos.coupling, cfg.qos.dt_max_s, cfg.qos.loss_max) == ("tight", 0.150, 0.03)
    assert (cfg.duration_s, cfg.seed, cfg.measurement_dt) == (30.0, 7, 0.01)
    assert cfg.anfis_train.epochs == 5
    assert cfg.anfis_train.eta == 0.02
    assert cfg.anfis_train.candidates == (0.1, 0.3, 0.5)  # sorted on ingest
    assert cfg.anfis_train.training_points == 200
    assert (cfg.anfis_train.th_min, cfg.anfis_train.th_max) == (0.1, 0.5)
    assert cfg.anfis_train.mf_kind == "sigmoid"


@pytest.mark.parametrize("text", [CANONICAL_CONFIG, FULL_DOC])
def test_emit_then_parse_is_a_fixed_point(text):
    once = emit_config(parse_scenario(text))
    again = emit_config(parse_scenario(once))
    assert once == again


def test_emit_preserves_exact_float_values():
    doc = CANONICAL_CONFIG.replace("amplitude_m = 5.0", "amplitude_m = 5.000000000000001")
    doc = doc.replace("th_pos_m = 0.5", "th_pos_m = 1e-3")
    cfg = parse_scenario(emit_config(parse_scenario(doc)))
    assert cfg.trajectory.amplitude == 5.000000000000001
    assert cfg.policy.th_pos == 1e-3


def test_all_problems_reported_with_line_numbers():
    bad = """\
[trajectory]
kind = circular
radius_m = -1
angular_rate_rad_s = ten

[sender]
order = 3
tick_dt_s = 0.01
tick_dt_s = 0.02

[policy]
kind = fixed

[mystery]
foo = 1

[run]
duration_s = 10.0
measurement_dt_s = 0.05
"""
    issues = issues_of(bad)
    assert any("line 3" in i and "radius_m" in i and "must be > 0" in i for i in issues)
    assert any("line 4" in i and "not a number" in i for i in issues)
    assert any("line 7" in i and "order" in i and "must be 0, 1 or 2" in i for i in issues)
    assert any("line 9" in i and "duplicate key" in i for i in issues)
    assert any("missing required key 'th_pos_m'" in i for i in issues)
    assert any("line 14" in i and "unknown section [mystery]" in i for i in issues)
    assert any("measurement_dt_s" in i and "must not exceed tick_dt_s" in i for i in issues)
    assert len(issues) >= 7


def test_error_message_joins_every_issue():
    with pytest.raises(ConfigError) as exc_info:
        parse_scenario("[trajectory]\nkind = warp\n[run]\nduration_s = -1\n")
    message = str(exc_info.value)
    assert "kind" in message and "duration_s" in message and "; " in message


def test_unknown_keys_and_malformed_lines_are_flagged():
    doc = CANONICAL_CONFIG + "\n[sender]\n"
    assert any("duplicate section" in i for i in issues_of(doc))
    doc = CANONICAL_CONFIG.replace("kind = sinusoidal", "kind = sinusoidal\nradius_m = 2.0")
    assert any("unknown key 'radius_m'" in i and "sinusoidal" in i for i in issues_of(doc))
    doc = CANONICAL_CONFIG.replace("seed = 42", "seed 42")
    assert any("expected 'key = value'" in i for i in issues_of(doc))
    assert any("malformed section header" in i for i in issues_of("[trajectory\nkind = linear\n"))


def test_nan_values_are_rejected():
    doc = CANONICAL_CONFIG.replace("amplitude_m = 5.0", "amplitude_m = nan")
    assert any("must not be NaN" in i for i in issues_of(doc))


def test_unsupported_schema_version_is_rejected():
    doc = CANONICAL_CONFIG.replace("schema_version = 1", "schema_version = 2")
    assert any("unsupported schema_version 2" in i for i in issues_of(doc))


def test_millisecond_keys_become_seconds():
    cfg = parse_scenario(FULL_DOC)
    assert cfg.base_delay_s == pytest.approx(0.040)
    assert cfg.jitter.half_width == pytest.approx(0.020)
    assert cfg.qos.dt_max_s == pytest.approx(0.150)
    doc = FULL_DOC.replace("jitter = uniform", "jitter = normal")
    doc = doc.replace("jitter_half_width_ms = 20", "jitter_sigma_ms = 8")
    cfg = parse_scenario(doc)
    assert cfg.jitter == TruncatedNormalJitter(0.008)


def test_qos_presets_fill_in_limits():
    doc = CANONICAL_CONFIG + "\n[qos]\nprofile = tight\n"
    qos = parse_scenario(doc).qos
    assert (qos.coupling, qos.dt_max_s, qos.loss_max) == ("tight", 0.100, 0.02)
    loose = parse_scenario(doc.replace("profile = tight", "profile = loose")).qos
    assert (loose.coupling, loose.dt_max_s, loose.loss_max) == ("loose", 0.300, 0.05)
    # a preset limit can be overridden in place
    qos = parse_scenario(doc + "loss_max = 0.04\n").qos
    assert (qos.dt_max_s, qos.loss_max) == (0.100, 0.04)


def test_custom_qos_requires_explicit_limits():
    doc = CANONICAL_CONFIG + "\n[qos]\nprofile = custom\n"
    issues = issues_of(doc)
    assert any("missing required key 'dt_max_ms'" in i for i in issues)
    assert any("missing required key 'loss_max'" in i for i in issues)


def test_defaults_for_optional_sections():
    minimal = """\
[trajectory]
kind = circular
radius_m = 3.0
angular_rate_rad_s = 0.5

[policy]
kind = fixed
th_pos_m = 0.4

[run]
duration_s = 10.0
"""
    cfg = parse_scenario(minimal)
    assert cfg.trajectory == Circular(3.0, 0.5, 10.0)
    assert (cfg.order, cfg.tick_dt, cfg.heartbeat_s) == (2, 0.01, 5.0)
    assert not cfg.use_history_fit and not cfg.literal_accel
    assert cfg.entity_id == 1 and cfg.viewer_position == ZERO3
    assert isinstance(cfg.convergence, Snap)
    assert cfg.policy.th_or == math.inf
    assert cfg.base_delay_s == 0.0 and cfg.jitter is None
    assert cfg.qos is None
    assert (cfg.seed, cfg.measurement_dt) == (0, 0.01)
    assert cfg.anfis_train.candidates == (0.1, 0.3, 0.5)


def test_band_syntax_and_ordering_are_validated():
    doc = FULL_DOC.replace("bands = 10:0.3, 30:0.6, 60:0.9", "bands = 10 0.3")
    assert any("expected 'distance:threshold' pairs" in i for i in issues_of(doc))
    doc = FULL_DOC.replace("bands = 10:0.3, 30:0.6, 60:0.9", "bands = 30:0.6, 10:0.3")
    assert any("[policy] bands" in i for i in issues_of(doc))


def test_anfis_network_file_resolves_relative_to_base_dir(tmp_path):
    net = default_network(((0.0, 1.0), (0.0, 10.0), (0.0, 5.0)))
    save_network(net, tmp_path / "threshold_net.json")
    doc = CANONICAL_CONFIG.replace(
        "kind = fixed\nth_pos_m = 0.5",
        "kind = anfis\nnetwork_file = threshold_net.json\nth_min_m = 0.1\nth_max_m = 0.5",
    )
    cfg = parse_scenario(doc, base_dir=tmp_path)
    assert isinstance(cfg.policy, AnfisThreshold)
    assert (cfg.policy.th_min, cfg.policy.th_max) == (0.1, 0.5)
    issues = issues_of(doc, base_dir=tmp_path / "elsewhere")
    assert any("network_file" in i for i in issues)


def test_to_scenario_applies_policy_and_seed_overrides():
    cfg = parse_scenario(CANONICAL_CONFIG)
    sc = cfg.to_scenario()
    assert sc.policy == cfg.policy and sc.network.seed == 42
    swapped = cfg.to_scenario(policy=FixedThreshold(0.2), seed=7)
    assert swapped.policy == FixedThreshold(0.2)
    assert swapped.network.seed == 7
    assert swapped.duration_s == 120.0 and swapped.tick_dt == 0.01
