from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rccdbg.netcore.layers import Conv2d, Dense, Flatten, MaxPool2d, ReLU
from rccdbg.netcore.network import NetworkModel, Task, snap_float32
from rccdbg.netcore.training import init_weights


def random_dense_model(seed: int, num_classes: int = 3, hidden: int = 5,
                       in_dim: int = 4) -> NetworkModel:
    model = NetworkModel(
        [Dense(in_dim, hidden), ReLU(), Dense(hidden, num_classes)],
        Task.classification(num_classes), (in_dim,))
    return init_weights(model, seed)


def random_conv_model(seed: int, size: int = 6, num_classes: int = 2) -> NetworkModel:
    flat = 2 * ((size - 2) // 2) ** 2
    model = NetworkModel(
        [Conv2d(1, 2, 3, 1), ReLU(), MaxPool2d(2, 2), Flatten(), Dense(flat, num_classes)],
        Task.classification(num_classes), (1, size, size))
    return init_weights(model, seed)


def positive_bias_free_model(seed: int, in_dim: int = 4, hidden: int = 5,
                             out_dim: int = 3) -> NetworkModel:
    """All-positive weights, zero bias: positive inputs keep every
    pre-activation strictly positive, the regime with exact conservation."""
    rng = np.random.default_rng(seed)
    model = NetworkModel(
        [Dense(in_dim, hidden), ReLU(), Dense(hidden, out_dim)],
        Task.classification(out_dim), (in_dim,))
    for layer in model.parameterized():
        layer.weight = rng.uniform(0.1, 1.0, layer.weight.shape)
        layer.bias = np.zeros_like(layer.bias)
    return snap_float32(model)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
