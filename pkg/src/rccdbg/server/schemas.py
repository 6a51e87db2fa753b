"""Request/response models for the review API."""

from __future__ import annotations

from pydantic import BaseModel, Field


class ClusterOut(BaseModel):
    id: int
    members: list[str]
    medoid: str
    size: int
    mean_pairwise_distance: float
    high_reduction_params: list[str] = Field(default_factory=list)


class ClusterManifestOut(BaseModel):
    layer_index: int
    k: int
    weak_knee: bool
    chosen_wicd: float
    clusters: list[ClusterOut]


class ClusterImagesOut(BaseModel):
    cluster: int
    images: list[str]


class UnsafeEntryOut(BaseModel):
    image_id: str
    cluster: int
    distance: float
    label: str | None = None


class UnsafeSetOut(BaseModel):
    entries: list[UnsafeEntryOut]
    labeled: int
    total: int


class LabelIn(BaseModel):
    image_id: str
    label: str = Field(min_length=1)


class LabelOut(BaseModel):
    image_id: str
    label: str
    replaced: bool


class StepStatusOut(BaseModel):
    workspace: str
    steps: dict[str, bool]
    best_layer: int | None = None
