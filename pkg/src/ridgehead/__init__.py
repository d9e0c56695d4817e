"""Non-iterative ridge recomputation of dense classifier heads.

The head of a classifier (a stack of fully-connected ReLU layers over frozen
features) is retrained without gradient descent: each layer's weight change
is the closed-form ridge solution against the frozen activations, and the
remaining residual is pulled back through the layer below. A conventional
momentum-SGD trainer for the identical head is included as the baseline and
as the partner phase of the alternating schedule.
"""

from .data import (
    Dataset,
    describe_file,
    gaussian_blobs,
    load_csv,
    load_features,
    load_labels,
    one_hot,
    save_features,
    save_labels,
    split,
)
from .errors import (
    DataError,
    FormatError,
    NumericError,
    ParameterError,
    RidgeheadError,
    ShapeError,
)
from .fc_head import (
    FcHead,
    FcLayer,
    ForwardTrace,
    RecomputeConfig,
    dropout_mix,
    forward,
    init_head,
    predict,
    pullback_target,
    recompute_hidden_layer,
    recompute_output_layer,
    recompute_pass,
)
from .harness import (
    EpochRecord,
    Evaluation,
    HeadSpec,
    RunRecord,
    TrainPlan,
    compare,
    evaluate,
    run,
)
from .linalg import gram_ridge_factor, relu, ridge_pullback, ridge_right_solve
from .model_io import load_head, save_head
from .sgdm import SgdmState, head_gradients, sgdm_epoch, softmax_cross_entropy

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "DataError",
    "EpochRecord",
    "Evaluation",
    "FcHead",
    "FcLayer",
    "FormatError",
    "ForwardTrace",
    "HeadSpec",
    "NumericError",
    "ParameterError",
    "RecomputeConfig",
    "RidgeheadError",
    "RunRecord",
    "SgdmState",
    "ShapeError",
    "TrainPlan",
    "compare",
    "describe_file",
    "dropout_mix",
    "evaluate",
    "forward",
    "gaussian_blobs",
    "gram_ridge_factor",
    "head_gradients",
    "init_head",
    "load_csv",
    "load_features",
    "load_head",
    "load_labels",
    "one_hot",
    "predict",
    "pullback_target",
    "recompute_hidden_layer",
    "recompute_output_layer",
    "recompute_pass",
    "relu",
    "ridge_pullback",
    "ridge_right_solve",
    "run",
    "save_features",
    "save_head",
    "save_labels",
    "sgdm_epoch",
    "softmax_cross_entropy",
    "split",
]
