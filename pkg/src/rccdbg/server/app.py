"""FastAPI app for root-cause-cluster review and unsafe-set labeling.

Read endpoints serve the step artifacts straight from the workspace files.
The one write endpoint, POST /api/labels, updates UnsafeSet/labels.csv
atomically (temp file + rename) behind a lock; concurrent posts serialize
and the last writer wins per image_id.
"""

from __future__ import annotations

import csv
import logging
import os
import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse
from fastapi.staticfiles import StaticFiles

from rccdbg.pipeline.config import PipelineConfig
from rccdbg.pipeline.report import build_report
from rccdbg.pipeline.steps import (
    best_layer_index,
    load_clusters_manifest,
    read_unsafe_csv,
    read_variance_csv,
)
from rccdbg.pipeline.workspace import Workspace
from rccdbg.server.schemas import (
    ClusterImagesOut,
    ClusterManifestOut,
    ClusterOut,
    LabelIn,
    LabelOut,
    StepStatusOut,
    UnsafeEntryOut,
    UnsafeSetOut,
)

logger = logging.getLogger(__name__)


def _read_labels(path: Path) -> dict[str, str]:
    labels: dict[str, str] = {}
    if not path.is_file():
        return labels
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader, None)
        for rec in reader:
            if len(rec) == 2:
                labels[rec[0]] = rec[1]
    return labels


def _write_labels_atomic(path: Path, labels: dict[str, str]) -> None:
    tmp = path.with_suffix(".csv.tmp")
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "label"])
        for image_id in sorted(labels):
            writer.writerow([image_id, labels[image_id]])
    os.replace(tmp, path)


def create_app(workspace: Path | str, config: PipelineConfig | None = None,
               ui_dir: Path | str | None = None) -> FastAPI:
    ws = Workspace(Path(workspace))
    cfg = config or PipelineConfig()
    app = FastAPI(title="rccdbg review API")
    label_lock = threading.Lock()

    def manifest():
        try:
            best = best_layer_index(ws)
            result, clusters = load_clusters_manifest(ws.best_layer_dir(best) / "clusters.json")
        except FileNotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return best, result, clusters

    @app.get("/api/clusters", response_model=ClusterManifestOut)
    def get_clusters():
        best, result, clusters = manifest()
        variance_path = ws.best_layer_dir(best) / "variance_report.csv"
        flags: dict[int, list[str]] = {}
        if variance_path.is_file():
            for row in read_variance_csv(variance_path):
                if row["flagged"]:
                    flags.setdefault(row["cluster"], []).append(row["parameter"])
        return ClusterManifestOut(
            layer_index=result.layer_index, k=result.k, weak_knee=result.weak_knee,
            chosen_wicd=result.chosen_wicd,
            clusters=[ClusterOut(id=c.cluster_id, members=c.members, medoid=c.medoid,
                                 size=len(c.members),
                                 mean_pairwise_distance=c.mean_pairwise_distance,
                                 high_reduction_params=sorted(flags.get(c.cluster_id, [])))
                      for c in clusters])

    @app.get("/api/clusters/{cluster_id}/images", response_model=ClusterImagesOut)
    def get_cluster_images(cluster_id: int):
        _, _, clusters = manifest()
        for c in clusters:
            if c.cluster_id == cluster_id:
                return ClusterImagesOut(cluster=cluster_id, images=c.members)
        raise HTTPException(status_code=404, detail=f"no cluster {cluster_id}")

    @app.get("/api/images/{image_id}")
    def get_image(image_id: str):
        path = ws.find_image(image_id)
        if path is None:
            raise HTTPException(status_code=404, detail=f"no image {image_id!r}")
        return FileResponse(path, media_type="image/png")

    @app.get("/api/report")
    def get_report():
        try:
            return build_report(ws, cfg)
        except FileNotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.get("/api/unsafe", response_model=UnsafeSetOut)
    def get_unsafe():
        if not ws.unsafe_csv.is_file():
            raise HTTPException(status_code=404,
                                detail=f"missing {ws.unsafe_csv}; run the assign step first")
        labels = _read_labels(ws.labels_csv)
        entries = [UnsafeEntryOut(image_id=e.image_id, cluster=e.assigned_cluster,
                                  distance=e.distance, label=labels.get(e.image_id))
                   for e in read_unsafe_csv(ws.unsafe_csv)]
        labeled = sum(1 for e in entries if e.label is not None)
        return UnsafeSetOut(entries=entries, labeled=labeled, total=len(entries))

    @app.post("/api/labels", response_model=LabelOut)
    def post_label(body: LabelIn):
        if not ws.unsafe_csv.is_file():
            raise HTTPException(status_code=409,
                                detail="no unsafe set; run the assign step first")
        known = {e.image_id for e in read_unsafe_csv(ws.unsafe_csv)}
        if body.image_id not in known:
            raise HTTPException(status_code=422,
                                detail=f"image {body.image_id!r} is not in the unsafe set")
        with label_lock:
            labels = _read_labels(ws.labels_csv)
            replaced = body.image_id in labels
            if replaced and labels[body.image_id] != body.label:
                logger.info("label overwrite for %s: %r -> %r (last writer wins)",
                            body.image_id, labels[body.image_id], body.label)
            labels[body.image_id] = body.label
            _write_labels_atomic(ws.labels_csv, labels)
        return LabelOut(image_id=body.image_id, label=body.label, replaced=replaced)

    @app.get("/api/status", response_model=StepStatusOut)
    def get_status():
        best = None
        if ws.best_layer_marker.is_file():
            best = best_layer_index(ws)
        steps = {
            "test": ws.test_result.is_file(),
            "heatmaps": ws.heatmaps_dir.is_dir() and any(ws.heatmaps_dir.glob("Layer*")),
            "cluster": best is not None,
            "assign": ws.unsafe_csv.is_file(),
            "retrain": ws.retrain_comparison.is_file(),
            "report": ws.report_json.is_file(),
        }
        return StepStatusOut(workspace=str(ws.root), steps=steps, best_layer=best)

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
