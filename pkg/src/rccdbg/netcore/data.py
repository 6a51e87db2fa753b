"""Dataset access: ordered image items with raw labels, loaded lazily."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from rccdbg.netcore.layers import Array


class DatasetReadError(RuntimeError):
    def __init__(self, image_id: str, cause: str):
        self.image_id = image_id
        super().__init__(f"cannot read image {image_id!r}: {cause}")


@dataclass(frozen=True)
class DatasetItem:
    image_id: str
    expected_raw: str
    path: Path | None = None
    array: Array | None = None


class Dataset:
    """Ordered collection of images; order defines the dataset index."""

    def __init__(self, items: list[DatasetItem]):
        self.items = list(items)

    def __len__(self) -> int:
        return len(self.items)

    @property
    def ids(self) -> list[str]:
        return [it.image_id for it in self.items]

    @property
    def raw_labels(self) -> list[str]:
        return [it.expected_raw for it in self.items]

    def load(self, i: int) -> Array:
        """Image as float64 in [0, 1] with shape (1, H, W)."""
        it = self.items[i]
        if it.array is not None:
            return it.array
        try:
            with Image.open(it.path) as img:
                arr = np.asarray(img.convert("L"), dtype=np.float64) / 255.0
        except Exception as exc:
            raise DatasetReadError(it.image_id, str(exc)) from exc
        return arr[None, :, :]

    @classmethod
    def from_folder(cls, folder: Path | str) -> "Dataset":
        """Read a labels.csv-indexed image folder; row order is dataset order."""
        folder = Path(folder)
        labels_path = folder / "labels.csv"
        if not labels_path.is_file():
            raise FileNotFoundError(f"missing labels file: {labels_path}")
        items = []
        with open(labels_path, newline="") as fh:
            header = fh.readline().strip()
            if header != "image_id,label":
                raise ValueError(f"{labels_path}: expected header 'image_id,label', got {header!r}")
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                image_id, _, label = line.partition(",")
                items.append(DatasetItem(image_id=image_id, expected_raw=label,
                                         path=folder / f"{image_id}.png"))
        return cls(items)

    @classmethod
    def in_memory(cls, ids: list[str], arrays: list[Array], labels: list) -> "Dataset":
        items = [DatasetItem(image_id=i, expected_raw=str(l),
                             array=np.asarray(a, dtype=np.float64))
                 for i, a, l in zip(ids, arrays, labels)]
        return cls(items)

    def concat(self, other: "Dataset") -> "Dataset":
        return Dataset(self.items + other.items)
