"""Model persistence: `model.arch` text spec plus `model.bin` float32 weights.

The .bin file holds little-endian float32 values, weight matrix then bias for
each parameterized layer in layer order. Round trips are bitwise exact for
any model produced by this package (init, load, train all snap weights
through float32).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from rccdbg.netcore.layers import layer_from_spec
from rccdbg.netcore.network import NetworkModel, ShapeMismatchError, Task

FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """Model files rejected: version, payload size, or spec/shape disagreement."""


def save_model(model: NetworkModel, arch_path: Path | str, bin_path: Path | str) -> None:
    arch_path, bin_path = Path(arch_path), Path(bin_path)
    lines = [f"format {FORMAT_VERSION}"]
    t = model.task
    if t.kind == "classification":
        lines.append(f"task classification {t.num_classes}")
    else:
        lines.append(f"task regression {t.output_dim} {t.loss_threshold!r}")
    lines.append("input " + " ".join(str(d) for d in model.input_shape))
    for layer in model.layers:
        spec = layer.spec()
        lines.append("layer " + " ".join(str(v) for v in spec))
    arch_path.write_text("\n".join(lines) + "\n")

    payload = bytearray()
    for layer in model.parameterized():
        payload += layer.weight.astype("<f4").tobytes()
        payload += layer.bias.astype("<f4").tobytes()
    bin_path.write_bytes(bytes(payload))


def _parse_arch(text: str, path: Path) -> tuple[Task, tuple[int, ...], list[tuple]]:
    task = None
    input_shape = None
    specs: list[tuple] = []
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("format "):
        raise ModelFormatError(f"{path}: missing format line")
    version = lines[0].split()[1]
    if version != str(FORMAT_VERSION):
        raise ModelFormatError(f"{path}: unsupported format version {version!r}")
    for ln in lines[1:]:
        fields = ln.split()
        if fields[0] == "task":
            if fields[1] == "classification":
                task = Task.classification(int(fields[2]))
            elif fields[1] == "regression":
                task = Task.regression(int(fields[2]), float(fields[3]))
            else:
                raise ModelFormatError(f"{path}: unknown task {fields[1]!r}")
        elif fields[0] == "input":
            input_shape = tuple(int(v) for v in fields[1:])
        elif fields[0] == "layer":
            specs.append(tuple([fields[1]] + fields[2:]))
        else:
            raise ModelFormatError(f"{path}: unknown directive {fields[0]!r}")
    if task is None or input_shape is None or not specs:
        raise ModelFormatError(f"{path}: incomplete architecture (task/input/layers)")
    return task, input_shape, specs


def load_model(arch_path: Path | str, bin_path: Path | str) -> NetworkModel:
    arch_path, bin_path = Path(arch_path), Path(bin_path)
    task, input_shape, specs = _parse_arch(arch_path.read_text(), arch_path)
    try:
        layers = [layer_from_spec(s) for s in specs]
        model = NetworkModel(layers, task, input_shape)
    except (ValueError, ShapeMismatchError) as exc:
        raise ModelFormatError(f"{arch_path}: layer chain invalid: {exc}") from exc

    raw = bin_path.read_bytes()
    if len(raw) % 4 != 0:
        raise ModelFormatError(f"{bin_path}: payload length {len(raw)} not a multiple of 4")
    values = np.frombuffer(raw, dtype="<f4")
    expected = sum(l.weight.size + l.bias.size for l in model.parameterized())
    if values.size != expected:
        raise ModelFormatError(
            f"{bin_path}: weight payload has {values.size} floats, architecture needs {expected}")
    pos = 0
    for layer in model.parameterized():
        w = values[pos : pos + layer.weight.size]
        pos += layer.weight.size
        b = values[pos : pos + layer.bias.size]
        pos += layer.bias.size
        layer.weight = w.reshape(layer.weight.shape).astype(np.float64)
        layer.bias = b.astype(np.float64)
    return model
