"""Run summary: failing images, cluster count, inspection effort, variance flags.

Built from the step artifacts on disk so the CLI report and the review API
always agree with the files.
"""

from __future__ import annotations

from rccdbg.cluster.reporting import inspection_ratio
from rccdbg.netcore.evaluation import read_result_csv
from rccdbg.pipeline.config import PipelineConfig
from rccdbg.pipeline.steps import best_layer_index, load_clusters_manifest, read_variance_csv
from rccdbg.pipeline.workspace import Workspace


def build_report(ws: Workspace, cfg: PipelineConfig) -> dict:
    if not ws.test_result.is_file():
        raise FileNotFoundError(f"missing {ws.test_result}; run the test step first")
    test_rows = read_result_csv(ws.test_result)
    failing = sum(r.is_error for r in test_rows)
    best = best_layer_index(ws)
    result, clusters = load_clusters_manifest(ws.best_layer_dir(best) / "clusters.json")

    variance_path = ws.best_layer_dir(best) / "variance_report.csv"
    variance_rows = read_variance_csv(variance_path) if variance_path.is_file() else []
    flags: dict[int, list[str]] = {c.cluster_id: [] for c in clusters}
    for row in variance_rows:
        if row["flagged"]:
            flags[row["cluster"]].append(row["parameter"])

    per_cluster = [{
        "cluster": c.cluster_id,
        "size": len(c.members),
        "medoid": c.medoid,
        "high_reduction_params": sorted(flags.get(c.cluster_id, [])),
    } for c in clusters]

    return {
        "failing_images": int(failing),
        "test_images": len(test_rows),
        "num_clusters": result.k,
        "best_layer": best,
        "weak_knee": result.weak_knee,
        "images_per_cluster": cfg.images_per_cluster,
        "inspection_ratio_pct": inspection_ratio(result.k, failing, cfg.images_per_cluster)
                                if failing else None,
        "clusters": per_cluster,
        "has_variance_report": bool(variance_rows),
    }


def format_report(report: dict) -> str:
    lines = [
        f"failing images:      {report['failing_images']} / {report['test_images']}",
        f"root cause clusters: {report['num_clusters']} (layer {report['best_layer']})",
    ]
    if report["inspection_ratio_pct"] is not None:
        lines.append(f"inspection ratio:    {report['inspection_ratio_pct']:.2f}% "
                     f"({report['images_per_cluster']} images per cluster)")
    lines.append("")
    lines.append("cluster  size  high-reduction parameters")
    for c in report["clusters"]:
        params = ", ".join(c["high_reduction_params"]) or "none"
        lines.append(f"{c['cluster']:>7}  {c['size']:>4}  {params}")
    return "\n".join(lines)
