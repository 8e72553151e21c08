"""From-scratch 1-D CNN: layers, training, evaluation, and weight serialization."""

from .estimator import ConvNet1DClassifier
from .network import (
    EpochRecord,
    EvalReport,
    LayerSpec,
    TrainHistory,
    TrainingDivergedError,
    default_arch,
    evaluate,
    forward,
    gradient_check,
    init_weights,
    make_arch,
    make_cnn_arch,
    train_local,
)
from .weights import (
    WeightFormatError,
    WeightSet,
    deserialize_weights,
    serialize_weights,
)

__all__ = [
    "ConvNet1DClassifier",
    "EpochRecord",
    "EvalReport",
    "LayerSpec",
    "TrainHistory",
    "TrainingDivergedError",
    "WeightFormatError",
    "WeightSet",
    "default_arch",
    "deserialize_weights",
    "evaluate",
    "forward",
    "gradient_check",
    "init_weights",
    "make_arch",
    "make_cnn_arch",
    "serialize_weights",
    "train_local",
]
