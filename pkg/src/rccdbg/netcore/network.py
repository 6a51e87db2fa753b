"""Network model, task definition, and the traced forward pass."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from rccdbg.netcore.layers import Array, Conv2d, Dense, Flatten, MaxPool2d, ReLU

Layer = Dense | Conv2d | ReLU | MaxPool2d | Flatten


class ShapeMismatchError(ValueError):
    """Input or layer chain shapes disagree; message names the offending layer."""


@dataclass(frozen=True)
class Task:
    kind: str
    num_classes: int | None = None
    output_dim: int | None = None
    loss_threshold: float | None = None

    def __post_init__(self):
        if self.kind == "classification":
            if self.num_classes is None or self.num_classes < 2:
                raise ValueError("classification requires num_classes >= 2")
        elif self.kind == "regression":
            if self.output_dim is None or self.output_dim < 1:
                raise ValueError("regression requires output_dim >= 1")
            if self.loss_threshold is None or not np.isfinite(self.loss_threshold) \
                    or self.loss_threshold <= 0:
                raise ValueError("regression requires loss_threshold > 0 (no default)")
        else:
            raise ValueError(f"unknown task kind {self.kind!r}")

    @classmethod
    def classification(cls, num_classes: int) -> "Task":
        return cls(kind="classification", num_classes=num_classes)

    @classmethod
    def regression(cls, output_dim: int, loss_threshold: float) -> "Task":
        return cls(kind="regression", output_dim=output_dim, loss_threshold=loss_threshold)

    @property
    def final_dim(self) -> int:
        return self.num_classes if self.kind == "classification" else self.output_dim


@dataclass
class TraceEntry:
    input: Array
    output: Array


@dataclass
class ActivationTrace:
    """Per-layer input/output activations captured during one forward pass."""
    entries: list[TraceEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, i: int) -> TraceEntry:
        return self.entries[i]


class NetworkModel:
    """Ordered layers plus task; layer chain is shape-checked at construction."""

    def __init__(self, layers: list[Layer], task: Task, input_shape: tuple[int, ...]):
        if not layers:
            raise ValueError("model needs at least one layer")
        self.layers = list(layers)
        self.task = task
        self.input_shape = tuple(int(d) for d in input_shape)
        if any(d < 1 for d in self.input_shape):
            raise ValueError(f"input shape must be positive, got {self.input_shape}")
        self.layer_shapes = self._check_chain()

    def _check_chain(self) -> list[tuple[int, ...]]:
        shapes = []
        shape = self.input_shape
        for i, layer in enumerate(self.layers):
            try:
                shape = layer.out_shape(shape)
            except ValueError as exc:
                raise ShapeMismatchError(f"layer {i} ({layer.kind}): {exc}") from exc
            shapes.append(shape)
        expected = (self.task.final_dim,)
        if shape != expected:
            raise ShapeMismatchError(
                f"layer {len(self.layers) - 1} ({self.layers[-1].kind}): final shape "
                f"{shape} does not match task output {expected}")
        return shapes

    def parameterized(self) -> list[Layer]:
        return [l for l in self.layers if l.has_params]

    def copy(self) -> "NetworkModel":
        return NetworkModel(copy.deepcopy(self.layers), self.task, self.input_shape)

    def weights_equal(self, other: "NetworkModel") -> bool:
        a, b = self.parameterized(), other.parameterized()
        if len(a) != len(b):
            return False
        return all(np.array_equal(x.weight, y.weight) and np.array_equal(x.bias, y.bias)
                   for x, y in zip(a, b))


def _check_input(model: NetworkModel, x: Array) -> Array:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != model.input_shape:
        raise ShapeMismatchError(
            f"layer 0 ({model.layers[0].kind}): input shape {x.shape} does not match "
            f"model input {model.input_shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite values")
    return x


def forward_batch(model: NetworkModel, xb: Array,
                  record_inputs: bool = False) -> tuple[Array, list[Array] | None]:
    """Run a (N, *input_shape) batch; optionally keep each layer's input batch."""
    xb = np.asarray(xb, dtype=np.float64)
    if xb.shape[1:] != model.input_shape:
        raise ShapeMismatchError(
            f"layer 0 ({model.layers[0].kind}): batch item shape {xb.shape[1:]} does not "
            f"match model input {model.input_shape}")
    inputs = [] if record_inputs else None
    h = xb
    for layer in model.layers:
        if record_inputs:
            inputs.append(h)
        h = layer.forward(h)
    return h, inputs


def forward(model: NetworkModel, x: Array) -> tuple[Array, ActivationTrace]:
    """Single-image forward pass returning logits/outputs plus the full trace.

    The output is the raw final-layer vector: pre-softmax logits for
    classification, raw outputs for regression.
    """
    x = _check_input(model, x)
    trace = ActivationTrace()
    h = x[None]
    for layer in model.layers:
        out = layer.forward(h)
        trace.entries.append(TraceEntry(input=h[0], output=out[0]))
        h = out
    return h[0], trace


def snap_float32(model: NetworkModel) -> NetworkModel:
    """Round all weights through float32 in place; returns the model.

    Keeps every producible model exactly representable in the 32-bit weight
    file format, so persistence round-trips are bitwise.
    """
    for layer in model.parameterized():
        layer.weight = layer.weight.astype(np.float32).astype(np.float64)
        layer.bias = layer.bias.astype(np.float32).astype(np.float64)
    return model
