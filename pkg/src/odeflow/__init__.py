"""Latent-space editing with trainable ODE flows on synthetic attribute worlds.

The package trains a normalized vector field whose flow moves latent codes
from one attribute label to another while holding every other attribute
fixed, compares it against linear-shift baselines, scores both with
control/disentanglement curves, and analyzes the learned dynamics spectrally.
"""

from .baselines import (
    LinearDirection,
    SvmConfig,
    condition_direction,
    fit_interfacegan,
    linear_shift,
    to_constant_field,
)
from .config import ExperimentConfig, default_config, format_config, parse_config
from .editing import (
    EditModel,
    TrainConfig,
    compose_edits,
    cross_entropy,
    edit_loss,
    load_edit_model,
    make_target,
    sample_time,
    save_edit_model,
    train_edit,
)
from .errors import (
    CheckpointFormatError,
    ConfigError,
    DegenerateProjectionError,
    InsufficientDataError,
    IntegrationDivergedError,
    InvalidInputError,
    OdeflowError,
    TrainingFailedError,
    UndefinedCorrelationError,
    UndefinedMetricError,
    UnsatisfiableConditionError,
    UnsupportedAnalysisError,
    ZeroMatrixError,
)
from .evaluation import (
    CDCurve,
    EvalConfig,
    OracleResult,
    best_linear_oracle,
    cd_curve,
    control_at,
    disentanglement_at,
    read_cd_csv,
    write_cd_csv,
)
from .fieldflow import (
    AffineField,
    ConstantField,
    NetField,
    NetSpec,
    Trajectory,
    adjoint_batch,
    adjoint_grad,
    init_net_params,
    integrate,
    integrate_batch,
    read_checkpoint,
    velocity,
    write_checkpoint,
)
from .numerics import AdamState, Rng, SvdResult, adam_step, eig, mat_exp_apply, svd
from .report import cd_plot_svg, curve_summary, summary_text
from .spectral import (
    SpectralReport,
    affine_of,
    eigen_report,
    read_spectral_csv,
    singular_entropy,
    spearman,
    write_spectral_csv,
)
from .worlds import (
    AttributeSpace,
    World,
    hard_labels,
    hard_regress,
    make_world,
    sample_latent,
    soft_logits,
    soft_regress,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # worlds
    "AttributeSpace",
    "World",
    "make_world",
    "sample_latent",
    "soft_logits",
    "soft_regress",
    "hard_labels",
    "hard_regress",
    # fields and integration
    "NetSpec",
    "ConstantField",
    "AffineField",
    "NetField",
    "Trajectory",
    "init_net_params",
    "velocity",
    "integrate",
    "integrate_batch",
    "adjoint_grad",
    "adjoint_batch",
    "write_checkpoint",
    "read_checkpoint",
    # editing
    "TrainConfig",
    "EditModel",
    "make_target",
    "sample_time",
    "cross_entropy",
    "edit_loss",
    "train_edit",
    "compose_edits",
    "save_edit_model",
    "load_edit_model",
    # baselines
    "SvmConfig",
    "LinearDirection",
    "fit_interfacegan",
    "condition_direction",
    "linear_shift",
    "to_constant_field",
    # evaluation
    "EvalConfig",
    "CDCurve",
    "control_at",
    "disentanglement_at",
    "cd_curve",
    "OracleResult",
    "best_linear_oracle",
    "write_cd_csv",
    "read_cd_csv",
    # spectral
    "SpectralReport",
    "affine_of",
    "singular_entropy",
    "eigen_report",
    "spearman",
    "write_spectral_csv",
    "read_spectral_csv",
    # reporting
    "cd_plot_svg",
    "curve_summary",
    "summary_text",
    # config
    "ExperimentConfig",
    "parse_config",
    "default_config",
    "format_config",
    # numerics
    "Rng",
    "SvdResult",
    "svd",
    "eig",
    "mat_exp_apply",
    "AdamState",
    "adam_step",
    # errors
    "OdeflowError",
    "InvalidInputError",
    "IntegrationDivergedError",
    "TrainingFailedError",
    "UnsatisfiableConditionError",
    "InsufficientDataError",
    "DegenerateProjectionError",
    "UnsupportedAnalysisError",
    "ZeroMatrixError",
    "UndefinedCorrelationError",
    "UndefinedMetricError",
    "ConfigError",
    "CheckpointFormatError",
]
