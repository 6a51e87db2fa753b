"""Workspace orchestration: the pipeline steps behind the CLI and server."""

from rccdbg.pipeline.config import PipelineConfig
from rccdbg.pipeline.workspace import Workspace
from rccdbg.pipeline.seeds import derive_seed
from rccdbg.pipeline.steps import (
    step_assign,
    step_cluster,
    step_gen,
    step_heatmaps,
    step_report,
    step_retrain,
    step_test,
    step_train,
)
from rccdbg.pipeline.report import build_report

__all__ = [
    "PipelineConfig",
    "Workspace",
    "build_report",
    "derive_seed",
    "step_assign",
    "step_cluster",
    "step_gen",
    "step_heatmaps",
    "step_report",
    "step_retrain",
    "step_test",
    "step_train",
]
