"""Dead-reckoning simulation toolkit.

Simulates threshold-triggered entity-state emission over a lossy, delayed
channel, with fixed, distance-banded, and fuzzy-adaptive threshold
policies, plus the analysis tools to bound and measure the induced error.
"""

from .anfis import (
    TERMS,
    AnfisNetwork,
    ForwardTrace,
    GBell,
    LinguisticVariable,
    Rule,
    Sigmoid,
    TrainingSet,
    TrainReport,
    default_network,
    default_rule_antecedents,
    forward,
    forward_batch,
    gradient_check,
    load_network,
    mf_eval,
    network_from_dict,
    network_to_dict,
    premise_gradients,
    save_network,
    total_error,
    train_epoch,
)
from .analysis import (
    ActionEvaluation,
    ErrorBound,
    SampledPath,
    SurfaceErrorEstimate,
    action_integral,
    emax_bound,
    fuzzy_distance,
    perturbed_action,
    stationarity_residual,
    surface_error,
    update_frequency,
)
from .config import (
    SCHEMA_VERSION,
    AnfisTrainConfig,
    ScenarioConfig,
    emit_config,
    parse_scenario,
)
from .errors import (
    ConfigError,
    CoverageError,
    DegenerateFitError,
    DomainError,
    DrsimError,
    InsufficientDataError,
    NotInitializedError,
)
from .harness import (
    CANONICAL_CONFIG,
    ComparisonRow,
    ComparisonTable,
    aoi_policy,
    emit_csv,
    generate_training_set,
    parse_policy_spec,
    policy_label,
    run_compare,
    sr_policy,
    train_anfis,
    trained_policy,
)
from .kinematics import (
    ZERO3,
    Circular,
    ConstantAccel,
    KinematicState,
    Linear,
    Piecewise,
    PositionHistory,
    Sinusoidal,
    Trajectory,
    Vec3,
    extrapolate,
    fit_history_quadratic,
    heading_gap,
    sample_state,
    wrap_angle,
)
from .metrics import MetricsReport
from .netsim import (
    EventQueue,
    NetworkModel,
    QoSProfile,
    QoSViolation,
    Scenario,
    TruncatedNormalJitter,
    UniformJitter,
    qos_check,
    run_scenario,
    transmit,
)
from .reckoning import (
    PDU_FORMAT,
    PDU_SIZE_BYTES,
    AnfisThreshold,
    DeadReckonMirror,
    EntityStatePdu,
    FixedThreshold,
    LinearBlend,
    MultiLevelThreshold,
    ReceiverSite,
    SenderSite,
    Snap,
    ThresholdContext,
    current_threshold,
    position_error,
)

__version__ = "0.1.0"
