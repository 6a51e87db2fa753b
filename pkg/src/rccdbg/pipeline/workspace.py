"""Workspace layout and path conventions.

    <root>/
      DNNModels/                 model.arch/model.bin (+ model_rN.* after retraining)
      DataSets/TrainingSet/      images + labels.csv (+ params.csv when generated)
      DataSets/TestSet/
      DataSets/ImprovementSet/
      UnsafeSet/                 unsafe.csv, labels.csv, copied images
      T/                         intermediates; never deleted by steps
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

MODEL_BASE = "model"
_MODEL_RE = re.compile(r"^model(?:_r(\d+))?\.arch$")


@dataclass(frozen=True)
class Workspace:
    root: Path

    def __post_init__(self):
        object.__setattr__(self, "root", Path(self.root))

    # -- layout ------------------------------------------------------------
    @property
    def dnn_models(self) -> Path:
        return self.root / "DNNModels"

    @property
    def training_set(self) -> Path:
        return self.root / "DataSets" / "TrainingSet"

    @property
    def test_set(self) -> Path:
        return self.root / "DataSets" / "TestSet"

    @property
    def improvement_set(self) -> Path:
        return self.root / "DataSets" / "ImprovementSet"

    @property
    def unsafe_dir(self) -> Path:
        return self.root / "UnsafeSet"

    @property
    def t_dir(self) -> Path:
        return self.root / "T"

    def ensure_layout(self) -> "Workspace":
        for p in (self.dnn_models, self.training_set, self.test_set,
                  self.improvement_set, self.unsafe_dir, self.t_dir):
            p.mkdir(parents=True, exist_ok=True)
        return self

    def check_layout(self) -> None:
        for p in (self.dnn_models, self.training_set, self.test_set,
                  self.improvement_set, self.unsafe_dir, self.t_dir):
            if not p.is_dir():
                raise FileNotFoundError(f"workspace folder missing: {p}")

    # -- step artifacts ------------------------------------------------------
    @property
    def train_result(self) -> Path:
        return self.t_dir / "trainResult.csv"

    @property
    def test_result(self) -> Path:
        return self.t_dir / "testResult.csv"

    @property
    def heatmaps_dir(self) -> Path:
        return self.t_dir / "Heatmaps"

    def heatmap_layer_dir(self, layer: int) -> Path:
        return self.heatmaps_dir / f"Layer{layer}"

    @property
    def cluster_analysis_dir(self) -> Path:
        return self.t_dir / "ClusterAnalysis"

    def cluster_layer_dir(self, layer: int) -> Path:
        return self.cluster_analysis_dir / f"Layer{layer}"

    def best_layer_dir(self, layer: int) -> Path:
        return self.t_dir / f"Layer{layer}"

    @property
    def best_layer_marker(self) -> Path:
        return self.t_dir / "best_layer.json"

    @property
    def unsafe_csv(self) -> Path:
        return self.unsafe_dir / "unsafe.csv"

    @property
    def labels_csv(self) -> Path:
        return self.unsafe_dir / "labels.csv"

    @property
    def retrain_comparison(self) -> Path:
        return self.t_dir / "retrain_comparison.csv"

    @property
    def report_json(self) -> Path:
        return self.t_dir / "report.json"

    # -- models --------------------------------------------------------------
    def model_paths(self, name: str = MODEL_BASE) -> tuple[Path, Path]:
        return self.dnn_models / f"{name}.arch", self.dnn_models / f"{name}.bin"

    def model_versions(self) -> list[str]:
        """Model names present, base first, then retrained versions in order."""
        found = []
        for p in self.dnn_models.glob("model*.arch"):
            m = _MODEL_RE.match(p.name)
            if m:
                found.append((0 if m.group(1) is None else int(m.group(1)), p.stem))
        return [name for _, name in sorted(found)]

    def latest_model_name(self) -> str:
        versions = self.model_versions()
        if not versions:
            raise FileNotFoundError(f"no model found in {self.dnn_models}")
        return versions[-1]

    def next_model_name(self) -> str:
        versions = self.model_versions()
        nums = [0 if v == MODEL_BASE else int(v.split("_r")[1]) for v in versions]
        return f"{MODEL_BASE}_r{max(nums, default=0) + 1}"

    # -- images ----------------------------------------------------------------
    def find_image(self, image_id: str) -> Path | None:
        for folder in (self.test_set, self.improvement_set, self.training_set,
                       self.unsafe_dir):
            p = folder / f"{image_id}.png"
            if p.is_file():
                return p
        return None
