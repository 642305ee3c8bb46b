"""Differentiable sequence alignment as a loss for weakly aligned training."""

__version__ = "0.1.0"

from .core import (
    PITCH_COUNT,
    DimensionMismatchError,
    EmptySequenceError,
    FeatureSequence,
    LengthMismatchError,
    NonFiniteCostError,
    NotBinaryError,
    PianoRoll,
    RaggedRowsError,
    WrongWidthError,
    pianoroll_validate,
    sequence_from_rows,
)
from .alignment import (
    SoftDtwResult,
    TooManyPathsError,
    brute_force_softdtw,
    classical_dtw,
    path_count,
    soft_min,
    softdtw_forward,
    softdtw_gradient,
)
from .cost import CostKind, build_cost_matrix, local_cost, local_cost_grad
from .targets import (
    LabelVariant,
    MissingScoreError,
    MissingStrongError,
    OvertoneModel,
    ShrinkNotSupportedError,
    apply_overtones,
    collapse_durations,
    make_variant,
    stretch_to_length,
)
from .metrics import (
    EvalReport,
    average_precision,
    cosine_similarity,
    evaluate,
    threshold_metrics,
)
from .training import (
    ConfigError,
    EpochRecord,
    LinearModel,
    LossKind,
    LossNormalizer,
    SyntheticExcerpt,
    TrainConfig,
    evaluate_model,
    generate_synthetic_dataset,
    model_forward,
    per_frame_baseline_loss,
    softdtw_loss_and_grads,
    toy_config,
    toy_dataset,
    train,
)

__all__ = [name for name in dir() if not name.startswith("_")]
