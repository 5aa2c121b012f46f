"""Fuzzy-inference and swarm-learning toolkit for per-move Go win-rate
prediction from BCI indicator streams and engine predictions."""

from .fml import (
    Clause,
    FuzzyController,
    FuzzyTerm,
    FuzzyVariable,
    ParseError,
    Rule,
    RuleBase,
    TrapezoidShape,
    UnsupportedShape,
    Violation,
    parse_fml,
    serialize_fml,
    validate_controller,
)
from .inference import (
    EmptyDataset,
    InferenceResult,
    NoRuleFired,
    OutOfDomain,
    defuzzify_centroid,
    fire_rules,
    fuzzify,
    infer,
    linguistic_label,
    mean_squared_error,
    semantic_accuracy,
    situation_phrase,
    trapezoid_membership,
)
from .preprocess import (
    IndicatorSample,
    MoveDistances,
    MoveEvent,
    MoveFeatureRecord,
    MovePrediction,
    PerMoveIndicators,
    PredictionRecord,
    SessionMeta,
    absolute_timestamps,
    build_training_set,
    compute_tmr,
    consecutive_distances,
    per_move_average,
    session_features,
)
from .pso import (
    LearnResult,
    ParameterEncoding,
    SwarmConfig,
    decode_parameters,
    encode_parameters,
    fitness,
    init_swarm,
    learn,
    repair_position,
    swarm_step,
)
from .dataio import (
    EvaluationReport,
    SessionBundle,
    build_report,
    generate_synthetic_session,
    load_session,
    load_training_set,
    read_report,
    save_session,
    save_training_set,
    write_history,
    write_report,
)
from . import kb

__version__ = "0.1.0"
