"""Heatmap bundle files: per-layer float32 row matrix plus an id sidecar.

A bundle directory holds exactly `heatmaps.bin` (little-endian float32, one
row per image, row-major) and `index.csv` (image ids in row order). The row
width is implied by the file size.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

BIN_NAME = "heatmaps.bin"
INDEX_NAME = "index.csv"


def save_heatmap_bundle(directory: Path | str, ids: list[str], rows: np.ndarray) -> None:
    directory = Path(directory)
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] != len(ids):
        raise ValueError(f"rows shape {rows.shape} does not match {len(ids)} ids")
    directory.mkdir(parents=True, exist_ok=True)
    (directory / BIN_NAME).write_bytes(rows.astype("<f4").tobytes())
    with open(directory / INDEX_NAME, "w", newline="") as fh:
        fh.write("image_id\n")
        for image_id in ids:
            fh.write(image_id + "\n")


def load_heatmap_bundle(directory: Path | str) -> tuple[list[str], np.ndarray]:
    directory = Path(directory)
    with open(directory / INDEX_NAME, newline="") as fh:
        header = fh.readline().strip()
        if header != "image_id":
            raise ValueError(f"{directory / INDEX_NAME}: bad header {header!r}")
        ids = [ln.strip() for ln in fh if ln.strip()]
    raw = (directory / BIN_NAME).read_bytes()
    if not ids:
        raise ValueError(f"{directory}: empty bundle index")
    if len(raw) % (4 * len(ids)) != 0:
        raise ValueError(
            f"{directory / BIN_NAME}: size {len(raw)} not divisible by {len(ids)} rows")
    width = len(raw) // (4 * len(ids))
    matrix = np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(len(ids), width)
    return ids, matrix
