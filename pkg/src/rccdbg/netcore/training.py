"""Losses, analytic gradients, and the plain SGD training loop."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from rccdbg.netcore.layers import Array
from rccdbg.netcore.network import NetworkModel, Task, forward_batch, snap_float32


class GradientError(ValueError):
    """Gradient computation rejected (empty batch or non-finite loss)."""


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int, last_finite_epoch: int):
        self.epoch = epoch
        self.last_finite_epoch = last_finite_epoch
        super().__init__(
            f"training diverged (non-finite loss) in epoch {epoch}; "
            f"last finite epoch: {last_finite_epoch}")


def _softmax(logits: Array) -> Array:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(logits: Array, labels: Array) -> Array:
    """Per-sample softmax cross-entropy; logits (N, C), labels (N,) ints."""
    z = logits - logits.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(z).sum(axis=1))
    return logsumexp - z[np.arange(len(labels)), labels]


def _cross_entropy_grad(logits: Array, labels: Array) -> Array:
    g = _softmax(logits)
    g[np.arange(len(labels)), labels] -= 1.0
    return g


def mean_squared_error(outputs: Array, targets: Array) -> Array:
    """Per-sample MSE over output dimensions; outputs/targets (N, D)."""
    return ((outputs - targets) ** 2).mean(axis=1)


def _mse_grad(outputs: Array, targets: Array) -> Array:
    return 2.0 * (outputs - targets) / outputs.shape[1]


def per_sample_losses(task: Task, outputs: Array, expected: Array) -> Array:
    if task.kind == "classification":
        return cross_entropy(outputs, np.asarray(expected, dtype=np.int64))
    return mean_squared_error(outputs, np.asarray(expected, dtype=np.float64))


def _per_sample_loss_grad(task: Task, outputs: Array, expected: Array) -> Array:
    if task.kind == "classification":
        return _cross_entropy_grad(outputs, np.asarray(expected, dtype=np.int64))
    return _mse_grad(outputs, np.asarray(expected, dtype=np.float64))


def gradients(model: NetworkModel, inputs: Array,
              expected: Array) -> list[tuple[Array, Array]]:
    """Gradients of the mean batch loss for every parameterized layer, in order."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.shape[0] == 0:
        raise GradientError("empty batch")
    outputs, layer_inputs = forward_batch(model, inputs, record_inputs=True)
    losses = per_sample_losses(model.task, outputs, expected)
    if not np.all(np.isfinite(losses)):
        raise GradientError("non-finite loss in batch")
    g = _per_sample_loss_grad(model.task, outputs, expected) / inputs.shape[0]
    grads: list[tuple[Array, Array]] = []
    for layer, x in zip(reversed(model.layers), reversed(layer_inputs)):
        g, pg = layer.backward(x, g)
        if pg is not None:
            grads.append(pg)
    grads.reverse()
    return grads


@dataclass(frozen=True)
class TrainConfig:
    lr: float
    epochs: int
    batch_size: int
    seed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.lr) or self.lr < 0:
            raise ValueError("lr must be finite and >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def train_sgd(model: NetworkModel, dataset, hyper: TrainConfig) -> NetworkModel:
    """SGD from the passed model's weights; never re-initializes.

    Deterministic under a fixed seed: the per-epoch shuffle stream is the only
    randomness. Raises TrainingDivergedError on the first non-finite batch
    loss, reporting the last epoch that completed with finite losses.
    """
    from rccdbg.netcore.evaluation import parse_expected

    n = len(dataset)
    if n == 0:
        raise ValueError("empty dataset")
    xs = np.stack([dataset.load(i) for i in range(n)])
    if model.task.kind == "classification":
        ys = np.array([parse_expected(model.task, raw) for raw in dataset.raw_labels],
                      dtype=np.int64)
    else:
        ys = np.stack([parse_expected(model.task, raw) for raw in dataset.raw_labels])

    m = model.copy()
    rng = np.random.default_rng(hyper.seed)
    params = m.parameterized()
    for epoch in range(hyper.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, hyper.batch_size):
            idx = perm[start : start + hyper.batch_size]
            try:
                grads = gradients(m, xs[idx], ys[idx])
            except GradientError as exc:
                raise TrainingDivergedError(epoch, epoch - 1) from exc
            for layer, (dw, db) in zip(params, grads):
                layer.weight -= hyper.lr * dw
                layer.bias -= hyper.lr * db
    return snap_float32(m)


def init_weights(model: NetworkModel, seed: int) -> NetworkModel:
    """He-style random init, snapped to float32-representable values."""
    rng = np.random.default_rng(seed)
    for layer in model.parameterized():
        fan_in = layer.weight.shape[1] if layer.kind == "dense" else \
            int(np.prod(layer.weight.shape[1:]))
        scale = np.sqrt(2.0 / fan_in)
        layer.weight = rng.standard_normal(layer.weight.shape) * scale
        layer.bias = np.zeros_like(layer.bias)
    return snap_float32(model)
