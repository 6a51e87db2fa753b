"""Backward relevance redistribution through the layer trace.

Parameterized layers use the epsilon rule

    R_i = sum_j (a_i * w_ij / (z_j + eps * sign(z_j))) * R_j,
    z_j = sum_i a_i * w_ij + b_j

with sign(0) taken as +1 so a positive epsilon always stabilizes. The bias
contributes to z_j but receives no relevance. ReLU and Flatten pass
relevance through unchanged (reshaped for Flatten); MaxPool routes each
output's relevance entirely to its argmax input, ties to the first position
in scan order.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass

import numpy as np

from rccdbg.netcore.layers import Array, Conv2d, Dense, Flatten, MaxPool2d, ReLU, col2im, im2col
from rccdbg.netcore.network import ActivationTrace, NetworkModel, Task

logger = logging.getLogger(__name__)

SEED_PREDICTED = "predicted"
SEED_TRUE = "true"

_counter_lock = threading.Lock()
_zero_denominator_hits = 0


def zero_denominator_hits() -> int:
    """Times a z_j == 0, eps == 0 term was dropped since the last reset."""
    return _zero_denominator_hits


def reset_zero_denominator_hits() -> None:
    global _zero_denominator_hits
    with _counter_lock:
        _zero_denominator_hits = 0


def _count_zero_hits(n: int) -> None:
    global _zero_denominator_hits
    if n:
        with _counter_lock:
            _zero_denominator_hits += n
        logger.warning("relevance dropped for %d output unit(s) with z == 0 and eps == 0", n)


class TraceMismatchError(ValueError):
    """Trace does not belong to the model it is being propagated through."""


@dataclass(frozen=True)
class LrpConfig:
    epsilon: float = 1e-9
    seed_mode: str = SEED_PREDICTED

    def __post_init__(self):
        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            raise ValueError("epsilon must be finite and >= 0")
        if self.seed_mode not in (SEED_PREDICTED, SEED_TRUE):
            raise ValueError(f"unknown seed_mode {self.seed_mode!r}")


@dataclass(frozen=True)
class Heatmap:
    image_id: str
    layer_index: int
    relevance: Array

    def flat(self) -> Array:
        return self.relevance.reshape(-1)


def output_relevance(output: Array, task: Task, seed_mode: str = SEED_PREDICTED,
                     true_label: int | None = None) -> Array:
    """Relevance seed at the network output.

    Classification: one-hot vector carrying the selected class's logit
    (argmax ties break to the lowest index). Regression: the raw outputs.
    """
    output = np.asarray(output, dtype=np.float64)
    if output.size == 0:
        raise ValueError("empty output")
    if task.kind == "regression":
        return output.copy()
    if seed_mode == SEED_TRUE:
        if true_label is None or not 0 <= true_label < task.num_classes:
            raise ValueError(f"seed_mode 'true' needs a label in [0, {task.num_classes})")
        idx = int(true_label)
    else:
        idx = int(np.argmax(output))
    seed = np.zeros_like(output)
    seed[idx] = output[idx]
    return seed


def _stabilize(z: Array, epsilon: float) -> Array:
    return z + epsilon * np.where(z >= 0.0, 1.0, -1.0)


def _safe_ratio(relevance: Array, denom: Array) -> Array:
    zero = denom == 0.0
    _count_zero_hits(int(np.count_nonzero(zero & (relevance != 0.0))))
    return np.divide(relevance, denom, out=np.zeros_like(relevance), where=~zero)


def propagate_layer(layer, activations_in: Array, relevance_out: Array,
                    epsilon: float) -> Array:
    """Relevance at the layer input given relevance at its output."""
    a = np.asarray(activations_in, dtype=np.float64)
    r = np.asarray(relevance_out, dtype=np.float64)
    expected_out = layer.out_shape(a.shape)
    if r.shape != expected_out:
        raise ValueError(
            f"relevance shape {r.shape} does not match {layer.kind} output {expected_out}")

    if isinstance(layer, Dense):
        z = layer.weight @ a + layer.bias
        s = _safe_ratio(r, _stabilize(z, epsilon))
        return a * (layer.weight.T @ s)

    if isinstance(layer, Conv2d):
        k, st = layer.kernel, layer.stride
        cols2 = im2col(a[None], k, st).reshape(1, layer.in_channels * k * k, -1)[0]
        w2 = layer.weight.reshape(layer.out_channels, -1)
        z = w2 @ cols2 + layer.bias[:, None]
        s = _safe_ratio(r.reshape(layer.out_channels, -1), _stabilize(z, epsilon))
        back = (w2.T @ s)[None].reshape(1, layer.in_channels, k, k, *expected_out[1:])
        return a * col2im(back, (1, *a.shape), k, st)[0]

    if isinstance(layer, MaxPool2d):
        return layer.route(a[None], r[None])[0]

    if isinstance(layer, ReLU):
        return r.copy()

    if isinstance(layer, Flatten):
        return r.reshape(a.shape)

    raise ValueError(f"unsupported layer kind {layer.kind!r}")


def _check_trace(model: NetworkModel, trace: ActivationTrace) -> None:
    if len(trace) != len(model.layers):
        raise TraceMismatchError(
            f"trace has {len(trace)} entries, model has {len(model.layers)} layers")
    shape = model.input_shape
    for i, (layer, entry) in enumerate(zip(model.layers, trace.entries)):
        if entry.input.shape != shape:
            raise TraceMismatchError(
                f"trace entry {i}: input shape {entry.input.shape} != expected {shape}")
        shape = layer.out_shape(shape)
        if entry.output.shape != shape:
            raise TraceMismatchError(
                f"trace entry {i}: output shape {entry.output.shape} != expected {shape}")


def heatmaps_for_image(model: NetworkModel, trace: ActivationTrace, config: LrpConfig,
                       image_id: str, true_label: int | None = None) -> list[Heatmap]:
    """One heatmap per layer, index ascending; entry k is the relevance that
    arrives at layer k's output during the backward sweep."""
    _check_trace(model, trace)
    depth = len(model.layers)
    relevance: list[Array | None] = [None] * depth
    relevance[depth - 1] = output_relevance(
        trace[depth - 1].output, model.task, config.seed_mode, true_label)
    for k in range(depth - 1, 0, -1):
        relevance[k - 1] = propagate_layer(
            model.layers[k], trace[k].input, relevance[k], config.epsilon)
    return [Heatmap(image_id=image_id, layer_index=k, relevance=relevance[k])
            for k in range(depth)]
