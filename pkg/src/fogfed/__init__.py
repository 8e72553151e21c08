"""Fog-assisted federated learning simulator with a permissioned update ledger."""

from .dataset import Dataset, ShardPlan, load_har, make_shards, synth_dataset
from .fedcore import LocalUpdate, ScalingPolicy, aggregate, federated_fuse, scale_factors
from .ledger import (
    Block,
    Chain,
    ChainFormatError,
    DeviceRegistry,
    UpdateRecord,
    append_block,
    authorize,
    chain_from_bytes,
    chain_to_bytes,
    load_chain,
    new_chain,
    reconcile,
    replicate,
    save_chain,
    verify_chain,
    weight_digest,
)
from .neuralnet import (
    ConvNet1DClassifier,
    EvalReport,
    TrainHistory,
    TrainingDivergedError,
    WeightFormatError,
    WeightSet,
    default_arch,
    deserialize_weights,
    evaluate,
    forward,
    gradient_check,
    init_weights,
    make_cnn_arch,
    serialize_weights,
    train_local,
)
from .simnet import (
    ExperimentResult,
    RoundReport,
    SimConfig,
    SimState,
    SweepEntry,
    UpdateTimeModel,
    UpdateTimes,
    confusion_to_csv,
    heterogeneity,
    init_state,
    reports_to_csv,
    run_experiment,
    run_round,
    sample_update_times,
)

__version__ = "0.1.0"

__all__ = [
    "Block",
    "Chain",
    "ChainFormatError",
    "ConvNet1DClassifier",
    "Dataset",
    "DeviceRegistry",
    "EvalReport",
    "ExperimentResult",
    "LocalUpdate",
    "RoundReport",
    "ScalingPolicy",
    "ShardPlan",
    "SimConfig",
    "SimState",
    "SweepEntry",
    "TrainHistory",
    "TrainingDivergedError",
    "UpdateRecord",
    "UpdateTimeModel",
    "UpdateTimes",
    "WeightFormatError",
    "WeightSet",
    "aggregate",
    "append_block",
    "authorize",
    "chain_from_bytes",
    "chain_to_bytes",
    "confusion_to_csv",
    "default_arch",
    "deserialize_weights",
    "evaluate",
    "federated_fuse",
    "forward",
    "gradient_check",
    "heterogeneity",
    "init_state",
    "init_weights",
    "load_chain",
    "load_har",
    "make_cnn_arch",
    "make_shards",
    "new_chain",
    "reconcile",
    "replicate",
    "reports_to_csv",
    "run_experiment",
    "run_round",
    "sample_update_times",
    "save_chain",
    "scale_factors",
    "serialize_weights",
    "synth_dataset",
    "train_local",
    "verify_chain",
    "weight_digest",
]
