"""Relevance propagation: per-layer heatmaps for a traced forward pass."""

from rccdbg.lrp.propagate import (
    Heatmap,
    LrpConfig,
    TraceMismatchError,
    heatmaps_for_image,
    output_relevance,
    propagate_layer,
    zero_denominator_hits,
    reset_zero_denominator_hits,
)
from rccdbg.lrp.store import load_heatmap_bundle, save_heatmap_bundle

__all__ = [
    "Heatmap",
    "LrpConfig",
    "TraceMismatchError",
    "heatmaps_for_image",
    "load_heatmap_bundle",
    "output_relevance",
    "propagate_layer",
    "reset_zero_denominator_hits",
    "save_heatmap_bundle",
    "zero_denominator_hits",
]
