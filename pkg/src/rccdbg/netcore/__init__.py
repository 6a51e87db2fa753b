"""Minimal network engine: layers, forward/backward, SGD, evaluation, persistence."""

from rccdbg.netcore.layers import Conv2d, Dense, Flatten, MaxPool2d, ReLU
from rccdbg.netcore.network import (
    ActivationTrace,
    NetworkModel,
    ShapeMismatchError,
    Task,
    TraceEntry,
    forward,
    forward_batch,
)
from rccdbg.netcore.network import snap_float32
from rccdbg.netcore.training import (
    GradientError,
    TrainConfig,
    TrainingDivergedError,
    cross_entropy,
    gradients,
    init_weights,
    mean_squared_error,
    per_sample_losses,
    train_sgd,
)
from rccdbg.netcore.evaluation import (
    UNREADABLE,
    EvaluationRow,
    evaluate_dataset,
    is_error,
    read_result_csv,
    write_result_csv,
)
from rccdbg.netcore.data import Dataset, DatasetItem, DatasetReadError
from rccdbg.netcore.persistence import ModelFormatError, load_model, save_model

__all__ = [
    "ActivationTrace",
    "Conv2d",
    "Dataset",
    "DatasetItem",
    "DatasetReadError",
    "Dense",
    "EvaluationRow",
    "Flatten",
    "GradientError",
    "MaxPool2d",
    "ModelFormatError",
    "NetworkModel",
    "ReLU",
    "ShapeMismatchError",
    "Task",
    "TraceEntry",
    "TrainConfig",
    "TrainingDivergedError",
    "UNREADABLE",
    "cross_entropy",
    "evaluate_dataset",
    "forward",
    "forward_batch",
    "gradients",
    "init_weights",
    "is_error",
    "load_model",
    "mean_squared_error",
    "snap_float32",
    "per_sample_losses",
    "read_result_csv",
    "save_model",
    "train_sgd",
    "write_result_csv",
]
