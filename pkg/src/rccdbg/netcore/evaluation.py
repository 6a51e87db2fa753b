"""Dataset evaluation: per-image result rows, error flags, and result CSVs."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from rccdbg.netcore.data import Dataset, DatasetReadError
from rccdbg.netcore.layers import Array
from rccdbg.netcore.network import NetworkModel, Task, forward_batch
from rccdbg.netcore.training import per_sample_losses

# Sentinel predicted value for images that could not be decoded. Such rows are
# always errors and surface the failure without stopping the evaluation.
UNREADABLE = "unreadable"

_EVAL_CHUNK = 256


@dataclass(frozen=True)
class EvaluationRow:
    image_id: str
    expected: str
    predicted: str
    loss: float
    is_error: bool


def parse_expected(task: Task, raw: str):
    """Raw label string -> int class or float64 target vector."""
    if task.kind == "classification":
        label = int(raw)
        if not 0 <= label < task.num_classes:
            raise ValueError(f"expected label {label} out of range [0, {task.num_classes})")
        return label
    vec = np.array([float(v) for v in raw.split(";")], dtype=np.float64)
    if vec.shape != (task.output_dim,):
        raise ValueError(f"expected target has {vec.shape[0]} dims, task wants {task.output_dim}")
    return vec


def format_value(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, np.ndarray):
        return ";".join(repr(float(v)) for v in value)
    return repr(float(value))


def is_error(task: Task, expected, output: Array | None = None,
             loss: float | None = None) -> bool:
    """Error decision: wrong argmax label, or loss strictly above the threshold."""
    if task.kind == "classification":
        expected = int(expected)
        if not 0 <= expected < task.num_classes:
            raise ValueError(f"expected label {expected} out of range [0, {task.num_classes})")
        return int(np.argmax(output)) != expected
    return float(loss) > task.loss_threshold


def evaluate_dataset(model: NetworkModel, dataset: Dataset) -> tuple[list[EvaluationRow], float]:
    """One row per image in dataset order, plus accuracy = 1 - errors/rows.

    Unreadable images become error rows (predicted = UNREADABLE, infinite
    loss) and evaluation continues.
    """
    n = len(dataset)
    if n == 0:
        raise ValueError("empty dataset")
    task = model.task
    rows: list[EvaluationRow | None] = [None] * n

    readable_idx: list[int] = []
    arrays: list[Array] = []
    expected_parsed: list = [None] * n
    for i, item in enumerate(dataset.items):
        expected_parsed[i] = parse_expected(task, item.expected_raw)
        try:
            arrays.append(dataset.load(i))
            readable_idx.append(i)
        except DatasetReadError:
            rows[i] = EvaluationRow(image_id=item.image_id, expected=item.expected_raw,
                                    predicted=UNREADABLE, loss=float("inf"), is_error=True)

    for start in range(0, len(readable_idx), _EVAL_CHUNK):
        chunk = readable_idx[start : start + _EVAL_CHUNK]
        xb = np.stack([arrays[start + j] for j in range(len(chunk))])
        if task.kind == "classification":
            yb = np.array([expected_parsed[i] for i in chunk], dtype=np.int64)
        else:
            yb = np.stack([expected_parsed[i] for i in chunk])
        outputs, _ = forward_batch(model, xb)
        losses = per_sample_losses(task, outputs, yb)
        for j, i in enumerate(chunk):
            item = dataset.items[i]
            if task.kind == "classification":
                predicted = int(np.argmax(outputs[j]))
                err = is_error(task, expected_parsed[i], output=outputs[j])
            else:
                predicted = outputs[j]
                err = is_error(task, expected_parsed[i], loss=float(losses[j]))
            rows[i] = EvaluationRow(image_id=item.image_id, expected=item.expected_raw,
                                    predicted=format_value(predicted),
                                    loss=float(losses[j]), is_error=err)

    done = [r for r in rows if r is not None]
    accuracy = 1.0 - sum(r.is_error for r in done) / n
    return done, accuracy


def write_result_csv(path: Path | str, rows: list[EvaluationRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "expected", "predicted", "loss", "is_error"])
        for r in rows:
            writer.writerow([r.image_id, r.expected, r.predicted, repr(r.loss),
                             "true" if r.is_error else "false"])


def read_result_csv(path: Path | str) -> list[EvaluationRow]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["image_id", "expected", "predicted", "loss", "is_error"]:
            raise ValueError(f"{path}: unexpected result header {header}")
        for rec in reader:
            rows.append(EvaluationRow(image_id=rec[0], expected=rec[1], predicted=rec[2],
                                      loss=float(rec[3]), is_error=rec[4] == "true"))
    return rows
