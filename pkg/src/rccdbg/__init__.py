"""rccdbg: debug small image networks by clustering error relevance heatmaps.

The toolkit runs a seven-step loop: evaluate a model, explain every
error-inducing image with per-layer relevance heatmaps, cluster the errors
into root cause clusters, pull matching images out of a fresh improvement
set, have a human label them, balance, and retrain from the existing
weights. A parametric image generator makes the whole loop reproducible at
desk scale.
"""

__version__ = "0.1.0"
