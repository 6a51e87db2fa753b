"""Parametric grayscale image generator with logged generation parameters.

Each image is a soft-edged bar at a configurable orientation, position, and
scale plus Gaussian pixel noise. The class label is the angle bin; hardness
comes from the bin boundary itself (appearances change continuously across
it), so a band straddling the boundary marks where errors are expected. The
noise stream is keyed by image_id alone, so images can be re-rendered
bit-exactly from the logged parameters.
"""

from __future__ import annotations

import csv
import hashlib
from bisect import bisect_right
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image


@dataclass(frozen=True)
class SceneParams:
    angle: float        # degrees; the bar is symmetric under +180
    center_x: float     # pixels
    center_y: float
    noise_sigma: float
    shape_scale: float


@dataclass(frozen=True)
class DatasetSpec:
    count: int
    image_size: int = 16
    id_prefix: str = "img_"
    angle_range: tuple[float, float] = (160.0, 220.0)
    bin_edges: tuple[float, ...] = (190.0,)   # interior boundaries -> len+1 labels
    hard_band: tuple[float, float] = (185.0, 195.0)
    center_jitter: float = 1.5                # +- pixels around the image center
    noise_range: tuple[float, float] = (0.02, 0.06)
    scale_range: tuple[float, float] = (0.85, 1.15)

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")
        lo, hi = self.angle_range
        if not lo < hi:
            raise ValueError("empty angle range")
        edges = sorted(self.bin_edges)
        if tuple(edges) != self.bin_edges or any(not lo < e < hi for e in edges):
            raise ValueError("bin edges must be sorted and strictly inside the angle range")
        blo, bhi = self.hard_band
        if not blo < bhi:
            raise ValueError("empty hard band")
        if not any(blo <= e <= bhi for e in edges):
            raise ValueError("hard band must overlap a bin boundary")

    def label_for(self, angle: float) -> int:
        return bisect_right(self.bin_edges, angle)


PARAM_NAMES = ("angle", "center_x", "center_y", "noise_sigma", "shape_scale")


def _noise_rng(image_id: str) -> np.random.Generator:
    digest = hashlib.sha256(image_id.encode("utf-8")).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def render(params: SceneParams, size: int, noise_key: str = "") -> np.ndarray:
    """Deterministic (size, size) float64 image in [0, 1].

    The orientation is folded modulo 180 before any trigonometry, so angles
    theta and theta+180 produce bit-identical images.
    """
    if size < 4:
        raise ValueError("image size too small")
    if not np.isfinite(params.angle):
        raise ValueError("angle must be finite")
    if params.noise_sigma < 0 or not np.isfinite(params.noise_sigma):
        raise ValueError("noise_sigma must be finite and >= 0")
    if params.shape_scale <= 0 or not np.isfinite(params.shape_scale):
        raise ValueError("shape_scale must be positive")
    if not (0 <= params.center_x <= size and 0 <= params.center_y <= size):
        raise ValueError("center outside the image")

    theta = np.deg2rad(params.angle % 180.0)
    half_len = params.shape_scale * size * 0.36
    half_wid = size * 0.085
    soft = 0.9  # pixels of linear edge falloff

    yy, xx = np.mgrid[0:size, 0:size]
    dx = (xx + 0.5) - params.center_x
    dy = (yy + 0.5) - params.center_y
    along = dx * np.cos(theta) + dy * np.sin(theta)
    across = -dx * np.sin(theta) + dy * np.cos(theta)
    edge_along = np.clip((half_len - np.abs(along)) / soft, 0.0, 1.0)
    edge_across = np.clip((half_wid - np.abs(across)) / soft, 0.0, 1.0)
    img = 0.12 + 0.75 * edge_along * edge_across

    if params.noise_sigma > 0:
        img = img + params.noise_sigma * _noise_rng(noise_key).standard_normal((size, size))
    return np.clip(img, 0.0, 1.0)


def save_png(img: np.ndarray, path: Path | str) -> None:
    Image.fromarray(np.rint(img * 255.0).astype(np.uint8), mode="L").save(path)


def load_png(path: Path | str) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.float64) / 255.0


def draw_params(spec: DatasetSpec, rng: np.random.Generator) -> SceneParams:
    mid = spec.image_size / 2.0
    return SceneParams(
        angle=float(rng.uniform(*spec.angle_range)),
        center_x=float(rng.uniform(mid - spec.center_jitter, mid + spec.center_jitter)),
        center_y=float(rng.uniform(mid - spec.center_jitter, mid + spec.center_jitter)),
        noise_sigma=float(rng.uniform(*spec.noise_range)),
        shape_scale=float(rng.uniform(*spec.scale_range)))


def generate_dataset(spec: DatasetSpec, seed: int,
                     out_dir: Path | str) -> list[tuple[str, SceneParams, int]]:
    """Render `count` images into out_dir with labels.csv and params.csv.

    Parameter draws come from one seeded stream in image order; pixel noise
    is keyed by image_id, so regenerating with the same seed (or re-rendering
    from params.csv) is byte-identical.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    records: list[tuple[str, SceneParams, int]] = []
    for i in range(spec.count):
        image_id = f"{spec.id_prefix}{i:05d}"
        params = draw_params(spec, rng)
        label = spec.label_for(params.angle)
        save_png(render(params, spec.image_size, noise_key=image_id),
                 out_dir / f"{image_id}.png")
        records.append((image_id, params, label))

    with open(out_dir / "labels.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "label"])
        for image_id, _, label in records:
            writer.writerow([image_id, label])
    with open(out_dir / "params.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", *PARAM_NAMES])
        for image_id, p, _ in records:
            writer.writerow([image_id, repr(p.angle), repr(p.center_x), repr(p.center_y),
                             repr(p.noise_sigma), repr(p.shape_scale)])
    return records


def read_params_csv(path: Path | str) -> dict[str, dict[str, float]]:
    table: dict[str, dict[str, float]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["image_id", *PARAM_NAMES]:
            raise ValueError(f"{path}: unexpected params header {header}")
        for rec in reader:
            table[rec[0]] = {name: float(v) for name, v in zip(PARAM_NAMES, rec[1:])}
    return table
