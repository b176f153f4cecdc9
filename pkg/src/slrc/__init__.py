"""slrc: joint sparse-representation and low-rank decomposition for
classifying multichannel signals.

The library decomposes a signal matrix ``Y`` (one column per frame or
channel) into a dictionary-sparse part ``D X`` and a low-rank part ``L``
under two models, plain (``"slr"``) and collaborative-hierarchical
(``"chislr"``, adding per-class group sparsity across channels), solves
them by ADMM, and classifies by minimal per-class residual.
"""

from .errors import DivergenceError, InvalidInputError, NumericError
from .groups import GroupPartition
from .prox import (
    group_soft_threshold,
    prox_hier,
    soft_threshold,
    soft_threshold_matrix,
    svt,
)
from .solvers import (
    Decomposition,
    IterationStats,
    SolverConfig,
    admm_solve,
    lasso_solve,
    lipschitz_bound,
    resolve_beta,
    xstep_chislr,
)
from .model import (
    AtomSource,
    ClassificationResult,
    Dictionary,
    build_dictionary,
    class_residuals,
    classify,
)
from .data import (
    SyntheticSpec,
    VideoSequence,
    build_test_unit,
    build_training_unit,
    equispaced_subvideos,
    generate_synthetic,
    load_image_sequence,
    load_manifest,
    random_dictionary,
    read_matrix_csv,
    synthetic_instance,
    write_matrix_csv,
)
from .experiment import (
    ExperimentConfig,
    ExperimentReport,
    SyntheticProtocol,
    emit_report,
    load_report,
    read_confusion_csv,
    run_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "AtomSource",
    "ClassificationResult",
    "Decomposition",
    "Dictionary",
    "DivergenceError",
    "ExperimentConfig",
    "ExperimentReport",
    "GroupPartition",
    "InvalidInputError",
    "IterationStats",
    "NumericError",
    "SolverConfig",
    "SyntheticProtocol",
    "SyntheticSpec",
    "VideoSequence",
    "admm_solve",
    "build_dictionary",
    "build_test_unit",
    "build_training_unit",
    "class_residuals",
    "classify",
    "emit_report",
    "equispaced_subvideos",
    "generate_synthetic",
    "group_soft_threshold",
    "lasso_solve",
    "lipschitz_bound",
    "load_image_sequence",
    "load_manifest",
    "load_report",
    "prox_hier",
    "random_dictionary",
    "read_confusion_csv",
    "read_matrix_csv",
    "resolve_beta",
    "run_experiment",
    "soft_threshold",
    "soft_threshold_matrix",
    "svt",
    "synthetic_instance",
    "write_matrix_csv",
    "xstep_chislr",
]
