"""Pipeline configuration: one JSON-serializable object, stored next to outputs."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from rccdbg.lrp.propagate import LrpConfig
from rccdbg.netcore.network import Task
from rccdbg.netcore.training import TrainConfig


@dataclass(frozen=True)
class TaskSettings:
    kind: str = "classification"
    num_classes: int = 2
    output_dim: int | None = None
    loss_threshold: float | None = None

    def to_task(self) -> Task:
        if self.kind == "classification":
            return Task.classification(self.num_classes)
        if self.loss_threshold is None:
            raise ValueError("regression task requires loss_threshold (no default)")
        return Task.regression(self.output_dim or 1, self.loss_threshold)


@dataclass(frozen=True)
class LrpSettings:
    epsilon: float = 1e-9
    seed_mode: str = "predicted"

    def to_lrp_config(self) -> LrpConfig:
        return LrpConfig(epsilon=self.epsilon, seed_mode=self.seed_mode)


@dataclass(frozen=True)
class TrainSettings:
    lr: float = 0.08
    epochs: int = 30
    batch_size: int = 32

    def to_train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(lr=self.lr, epochs=self.epochs,
                           batch_size=self.batch_size, seed=seed)


@dataclass(frozen=True)
class GenSettings:
    image_size: int = 16
    train_count: int = 1200
    test_count: int = 800
    improvement_count: int = 800
    angle_range: tuple[float, float] = (160.0, 220.0)
    bin_edges: tuple[float, ...] = (190.0,)
    hard_band: tuple[float, float] = (185.0, 195.0)
    center_jitter: float = 1.5
    # Optional narrower jitter for the training set only: models the
    # incomplete-training-set scenario where test/improvement images come
    # from a wider simulator configuration than the original training data.
    train_center_jitter: float | None = None
    noise_range: tuple[float, float] = (0.02, 0.06)
    scale_range: tuple[float, float] = (0.85, 1.15)


# Default architecture: small convnet sized for 16x16 grayscale inputs.
def _default_layers() -> list[list]:
    return [["conv2d", 1, 4, 3, 1], ["relu"], ["maxpool2d", 2, 2],
            ["flatten"], ["dense", 196, 2]]


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    task: TaskSettings = field(default_factory=TaskSettings)
    lrp: LrpSettings = field(default_factory=LrpSettings)
    k_min: int = 2
    k_max: int = 100
    images_per_cluster: int = 5
    montage: bool = True
    train: TrainSettings = field(default_factory=TrainSettings)
    retrain: TrainSettings | None = None   # None -> reuse train settings
    gen: GenSettings = field(default_factory=GenSettings)
    model_layers: tuple = field(default_factory=lambda: tuple(tuple(l) for l in _default_layers()))

    @property
    def retrain_settings(self) -> TrainSettings:
        return self.retrain if self.retrain is not None else self.train

    def to_json(self) -> str:
        def plain(obj):
            if dataclasses.is_dataclass(obj):
                return {k: plain(v) for k, v in dataclasses.asdict(obj).items()}
            if isinstance(obj, (list, tuple)):
                return [plain(v) for v in obj]
            return obj
        return json.dumps(plain(self), sort_keys=True, indent=2) + "\n"

    def write(self, path: Path | str) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        kwargs = dict(data)
        if "task" in kwargs:
            kwargs["task"] = TaskSettings(**kwargs["task"])
        if "lrp" in kwargs:
            kwargs["lrp"] = LrpSettings(**kwargs["lrp"])
        if "train" in kwargs:
            kwargs["train"] = TrainSettings(**kwargs["train"])
        if kwargs.get("retrain") is not None:
            kwargs["retrain"] = TrainSettings(**kwargs["retrain"])
        if "gen" in kwargs:
            gen = dict(kwargs["gen"])
            for name in ("angle_range", "hard_band", "noise_range", "scale_range", "bin_edges"):
                if name in gen:
                    gen[name] = tuple(gen[name])
            kwargs["gen"] = GenSettings(**gen)
        if "model_layers" in kwargs:
            kwargs["model_layers"] = tuple(tuple(l) for l in kwargs["model_layers"])
        return cls(**kwargs)

    @classmethod
    def load(cls, path: Path | str) -> "PipelineConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))
