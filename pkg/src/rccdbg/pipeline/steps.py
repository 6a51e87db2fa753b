"""The pipeline steps. Each step reads workspace artifacts, writes its own
outputs under T/ (or UnsafeSet/), and drops the serialized config next to
them for provenance. Steps never delete or rewrite earlier steps' outputs;
all randomness comes from per-purpose streams derived from the config seed.
"""

from __future__ import annotations

import csv
import json
import logging
import shutil
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from rccdbg.cluster.distance import DistanceMatrix, distance_matrix
from rccdbg.cluster.linkage import hac_average_linkage
from rccdbg.cluster.reporting import variance_reduction_report
from rccdbg.cluster.selection import (
    ClusteringResult,
    RootCauseCluster,
    select_best_layer,
    select_clusters,
)
from rccdbg.lrp.propagate import heatmaps_for_image
from rccdbg.lrp.store import load_heatmap_bundle, save_heatmap_bundle
from rccdbg.netcore.data import Dataset, DatasetItem
from rccdbg.netcore.evaluation import (
    evaluate_dataset,
    parse_expected,
    read_result_csv,
    write_result_csv,
)
from rccdbg.netcore.layers import layer_from_spec
from rccdbg.netcore.network import NetworkModel, forward
from rccdbg.netcore.persistence import load_model, save_model
from rccdbg.netcore.training import init_weights, train_sgd
from rccdbg.pipeline.config import PipelineConfig
from rccdbg.pipeline.seeds import derive_seed
from rccdbg.pipeline.workspace import Workspace
from rccdbg.synthgen import DatasetSpec, generate_dataset
from rccdbg.unsafe import (
    UnsafeSetEntry,
    assign_improvement,
    balance,
    cluster_thresholds,
    ingest_labels,
)

logger = logging.getLogger(__name__)


# --------------------------------------------------------------------------- gen

def step_gen(ws: Workspace, cfg: PipelineConfig) -> None:
    """Generate TrainingSet, TestSet, and ImprovementSet with logged parameters."""
    ws.ensure_layout()
    g = cfg.gen
    train_jitter = g.train_center_jitter if g.train_center_jitter is not None else g.center_jitter
    for name, folder, count, prefix, jitter in (
            ("train", ws.training_set, g.train_count, "train_", train_jitter),
            ("test", ws.test_set, g.test_count, "test_", g.center_jitter),
            ("improve", ws.improvement_set, g.improvement_count, "improve_", g.center_jitter)):
        spec = DatasetSpec(count=count, image_size=g.image_size, id_prefix=prefix,
                           angle_range=g.angle_range, bin_edges=g.bin_edges,
                           hard_band=g.hard_band, center_jitter=jitter,
                           noise_range=g.noise_range, scale_range=g.scale_range)
        generate_dataset(spec, derive_seed(cfg.seed, f"gen.{name}"), folder)
        logger.info("generated %d images into %s", count, folder)
    cfg.write(ws.root / "config.json")


# --------------------------------------------------------------------------- train

def build_model(cfg: PipelineConfig) -> NetworkModel:
    layers = [layer_from_spec(tuple(spec)) for spec in cfg.model_layers]
    size = cfg.gen.image_size
    return NetworkModel(layers, cfg.task.to_task(), (1, size, size))


def step_train(ws: Workspace, cfg: PipelineConfig) -> str:
    """Bootstrap the initial model: random init, SGD on TrainingSet, save."""
    ws.check_layout()
    model = init_weights(build_model(cfg), derive_seed(cfg.seed, "init"))
    dataset = Dataset.from_folder(ws.training_set)
    model = train_sgd(model, dataset, cfg.train.to_train_config(derive_seed(cfg.seed, "train")))
    save_model(model, *ws.model_paths())
    return "model"


# --------------------------------------------------------------------------- test

@dataclass
class TestResult:
    train_accuracy: float
    test_accuracy: float
    error_ids: list[str]


def step_test(ws: Workspace, cfg: PipelineConfig) -> TestResult:
    """Evaluate the current model on TrainingSet and TestSet, export CSVs."""
    ws.check_layout()
    model = load_model(*ws.model_paths(ws.latest_model_name()))
    train_rows, train_acc = evaluate_dataset(model, Dataset.from_folder(ws.training_set))
    test_rows, test_acc = evaluate_dataset(model, Dataset.from_folder(ws.test_set))
    write_result_csv(ws.train_result, train_rows)
    write_result_csv(ws.test_result, test_rows)
    cfg.write(ws.t_dir / "config.json")
    errors = [r.image_id for r in test_rows if r.is_error]
    logger.info("test step: train acc %.4f, test acc %.4f, %d error-inducing images",
                train_acc, test_acc, len(errors))
    return TestResult(train_accuracy=train_acc, test_accuracy=test_acc, error_ids=errors)


def error_inducing_ids(ws: Workspace) -> list[str]:
    if not ws.test_result.is_file():
        raise FileNotFoundError(f"missing {ws.test_result}; run the test step first")
    return [r.image_id for r in read_result_csv(ws.test_result) if r.is_error]


# --------------------------------------------------------------------------- heatmaps

def _compute_heatmap_rows(model: NetworkModel, dataset: Dataset, ids: list[str],
                          cfg: PipelineConfig, allow_true_seed: bool = True,
                          ) -> dict[int, np.ndarray]:
    """Flattened per-layer heatmap rows for the given ids, in id order."""
    lrp_cfg = cfg.lrp.to_lrp_config()
    index = {img: i for i, img in enumerate(dataset.ids)}
    rows: dict[int, list[np.ndarray]] = {k: [] for k in range(len(model.layers))}
    for image_id in ids:
        if image_id not in index:
            raise ValueError(f"image {image_id!r} not present in dataset")
        i = index[image_id]
        x = dataset.load(i)
        _, trace = forward(model, x)
        true_label = None
        if lrp_cfg.seed_mode == "true" and allow_true_seed:
            true_label = parse_expected(model.task, dataset.items[i].expected_raw)
        maps = heatmaps_for_image(model, trace, lrp_cfg, image_id, true_label=true_label)
        for hm in maps:
            rows[hm.layer_index].append(hm.flat())
    # quantize through the bundle storage precision so freshly computed rows
    # (improvement set) live in the same space as persisted ones (test set)
    return {k: np.stack(v).astype(np.float32).astype(np.float64) for k, v in rows.items()}


def step_heatmaps(ws: Workspace, cfg: PipelineConfig) -> dict[int, Path]:
    """One heatmap bundle per layer for the error-inducing test images."""
    ws.check_layout()
    errors = error_inducing_ids(ws)
    if len(errors) < 2:
        raise ValueError(
            f"clustering requires at least two members; only {len(errors)} "
            "error-inducing image(s) found")
    model = load_model(*ws.model_paths(ws.latest_model_name()))
    dataset = Dataset.from_folder(ws.test_set)
    per_layer = _compute_heatmap_rows(model, dataset, errors, cfg)
    out: dict[int, Path] = {}
    for layer, matrix in per_layer.items():
        directory = ws.heatmap_layer_dir(layer)
        save_heatmap_bundle(directory, errors, matrix)
        out[layer] = directory
    cfg.write(ws.heatmaps_dir / "config.json")
    logger.info("heatmaps step: %d layers x %d images", len(per_layer), len(errors))
    return out


# --------------------------------------------------------------------------- cluster

def write_distance_csv(path: Path, dm: DistanceMatrix) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", *dm.ids])
        for i, image_id in enumerate(dm.ids):
            writer.writerow([image_id, *[repr(float(v)) for v in dm.d[i]]])


def read_distance_csv(path: Path) -> DistanceMatrix:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[0] != "id":
            raise ValueError(f"{path}: bad distance matrix header")
        ids = header[1:]
        d = np.array([[float(v) for v in rec[1:]] for rec in reader], dtype=np.float64)
    dm = DistanceMatrix(ids=ids, d=d)
    dm.validate()
    return dm


def clusters_manifest(result: ClusteringResult) -> dict:
    return {
        "layer_index": result.layer_index,
        "k": result.k,
        "weak_knee": result.weak_knee,
        "chosen_wicd": result.chosen_wicd,
        "wicd_curve": [[int(k), w] for k, w in result.wicd_curve],
        "clusters": [{
            "id": c.cluster_id,
            "members": c.members,
            "medoid": c.medoid,
            "mean_pairwise_distance": c.mean_pairwise_distance,
        } for c in result.clusters],
    }


def load_clusters_manifest(path: Path) -> tuple[ClusteringResult, list[RootCauseCluster]]:
    data = json.loads(Path(path).read_text())
    clusters = [RootCauseCluster(cluster_id=c["id"], members=list(c["members"]),
                                 medoid=c["medoid"],
                                 mean_pairwise_distance=c["mean_pairwise_distance"])
                for c in data["clusters"]]
    assignment = {m: c.cluster_id for c in clusters for m in c.members}
    result = ClusteringResult(layer_index=data["layer_index"], k=data["k"],
                              assignment=assignment,
                              wicd_curve=[(int(k), w) for k, w in data["wicd_curve"]],
                              chosen_wicd=data["chosen_wicd"],
                              weak_knee=data["weak_knee"], clusters=clusters)
    return result, clusters


def _write_montage(layer_dir: Path, cluster: RootCauseCluster, ws: Workspace,
                   max_tiles: int = 25, scale: int = 4) -> None:
    tiles = []
    for image_id in cluster.members[:max_tiles]:
        path = ws.find_image(image_id)
        if path is None:
            continue
        try:
            with Image.open(path) as im:
                tiles.append(im.convert("L").resize(
                    (im.width * scale, im.height * scale), Image.NEAREST))
        except Exception:
            logger.warning("montage: skipping unreadable image %s", image_id)
    if not tiles:
        return
    cols = int(np.ceil(np.sqrt(len(tiles))))
    rows = int(np.ceil(len(tiles) / cols))
    tw, th = tiles[0].size
    gap = 2
    sheet = Image.new("L", (cols * (tw + gap) - gap, rows * (th + gap) - gap), color=32)
    for i, tile in enumerate(tiles):
        sheet.paste(tile, ((i % cols) * (tw + gap), (i // cols) * (th + gap)))
    montage_dir = layer_dir / "montages"
    montage_dir.mkdir(exist_ok=True)
    sheet.save(montage_dir / f"cluster_{cluster.cluster_id}.png")


@dataclass
class ClusterStepResult:
    best_layer: int
    results: dict[int, ClusteringResult]


def step_cluster(ws: Workspace, cfg: PipelineConfig) -> ClusterStepResult:
    """Distance matrices and clustering per layer; promote the best layer."""
    ws.check_layout()
    if not ws.heatmaps_dir.is_dir():
        raise FileNotFoundError(f"missing {ws.heatmaps_dir}; run the heatmaps step first")
    layer_dirs = sorted(ws.heatmaps_dir.glob("Layer*"), key=lambda p: int(p.name[5:]))
    if not layer_dirs:
        raise FileNotFoundError("no heatmap bundles found; run the heatmaps step first")

    results: dict[int, ClusteringResult] = {}
    dms: dict[int, DistanceMatrix] = {}
    for bundle_dir in layer_dirs:
        layer = int(bundle_dir.name[5:])
        ids, matrix = load_heatmap_bundle(bundle_dir)
        dm = distance_matrix(ids, matrix)
        dendro = hac_average_linkage(dm)
        result = select_clusters(dm, k_min=cfg.k_min, k_max=min(cfg.k_max, dm.n - 1),
                                 layer_index=layer, dendrogram=dendro)
        dms[layer], results[layer] = dm, result

        layer_dir = ws.cluster_layer_dir(layer)
        layer_dir.mkdir(parents=True, exist_ok=True)
        write_distance_csv(layer_dir / "distance.csv", dm)
        (layer_dir / "clusters.json").write_text(
            json.dumps(clusters_manifest(result), sort_keys=True, indent=2) + "\n")
        for cluster in result.clusters:
            cdir = layer_dir / f"cluster_{cluster.cluster_id}"
            cdir.mkdir(exist_ok=True)
            for member in cluster.members:
                src = ws.find_image(member)
                if src is not None:
                    shutil.copyfile(src, cdir / f"{member}.png")
            if cfg.montage:
                _write_montage(layer_dir, cluster, ws)

    best = select_best_layer(results, dms)

    # Variance-reduction report for the promoted layer, when parameters exist.
    params_path = ws.test_set / "params.csv"
    if params_path.is_file():
        from rccdbg.synthgen import read_params_csv

        report = variance_reduction_report(results[best].clusters, read_params_csv(params_path))
        write_variance_csv(ws.cluster_layer_dir(best) / "variance_report.csv", report)

    best_src = ws.cluster_layer_dir(best)
    best_dst = ws.best_layer_dir(best)
    shutil.copytree(best_src, best_dst, dirs_exist_ok=True)
    ws.best_layer_marker.write_text(json.dumps({"layer_index": best}, sort_keys=True) + "\n")
    cfg.write(ws.cluster_analysis_dir / "config.json")
    cfg.write(best_dst / "config.json")
    logger.info("cluster step: best layer %d with K=%d", best, results[best].k)
    return ClusterStepResult(best_layer=best, results=results)


def write_variance_csv(path: Path, report) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cluster", "parameter", "cluster_variance", "whole_variance",
                         "reduction", "flagged", "applicable"])
        for e in report.entries:
            writer.writerow([
                e.cluster_id, e.parameter,
                "" if e.cluster_variance is None else repr(e.cluster_variance),
                "" if e.whole_variance is None else repr(e.whole_variance),
                "" if e.reduction is None else repr(e.reduction),
                "true" if e.flagged else "false",
                "true" if e.applicable else "false"])


def read_variance_csv(path: Path) -> list[dict]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            rows.append({
                "cluster": int(rec["cluster"]),
                "parameter": rec["parameter"],
                "cluster_variance": float(rec["cluster_variance"]) if rec["cluster_variance"] else None,
                "whole_variance": float(rec["whole_variance"]) if rec["whole_variance"] else None,
                "reduction": float(rec["reduction"]) if rec["reduction"] else None,
                "flagged": rec["flagged"] == "true",
                "applicable": rec["applicable"] == "true"})
    return rows


def best_layer_index(ws: Workspace) -> int:
    if not ws.best_layer_marker.is_file():
        raise FileNotFoundError(f"missing {ws.best_layer_marker}; run the cluster step first")
    return int(json.loads(ws.best_layer_marker.read_text())["layer_index"])


# --------------------------------------------------------------------------- assign

def write_unsafe_csv(path: Path, entries: list[UnsafeSetEntry]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "cluster", "distance"])
        for e in entries:
            writer.writerow([e.image_id, e.assigned_cluster, repr(e.distance)])


def read_unsafe_csv(path: Path) -> list[UnsafeSetEntry]:
    entries = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["image_id", "cluster", "distance"]:
            raise ValueError(f"{path}: unexpected unsafe header {header}")
        for rec in reader:
            entries.append(UnsafeSetEntry(image_id=rec[0], assigned_cluster=int(rec[1]),
                                          distance=float(rec[2])))
    return entries


def step_assign(ws: Workspace, cfg: PipelineConfig) -> list[UnsafeSetEntry]:
    """Assign ImprovementSet images to the promoted clusters; keep close ones.

    Improvement images are unlabeled at this point, so their relevance seeds
    always use the predicted class even when the config seeds test heatmaps
    on true labels.
    """
    ws.check_layout()
    best = best_layer_index(ws)
    _, clusters = load_clusters_manifest(ws.best_layer_dir(best) / "clusters.json")
    dm = read_distance_csv(ws.best_layer_dir(best) / "distance.csv")
    member_ids, member_vectors = load_heatmap_bundle(ws.heatmap_layer_dir(best))

    improvement = Dataset.from_folder(ws.improvement_set)
    if len(improvement) == 0:
        raise ValueError(f"improvement set is empty: {ws.improvement_set}")
    model = load_model(*ws.model_paths(ws.latest_model_name()))
    rows = _compute_heatmap_rows(model, improvement, improvement.ids, cfg,
                                 allow_true_seed=False)[best]

    thresholds = cluster_thresholds(clusters, dm)
    entries = assign_improvement(improvement.ids, rows, member_ids, member_vectors,
                                 clusters, thresholds)
    if not entries:
        logger.warning("assign step: no improvement image fell within any cluster threshold")

    write_unsafe_csv(ws.unsafe_csv, entries)
    (ws.unsafe_dir / "thresholds.json").write_text(
        json.dumps({str(k): v for k, v in sorted(thresholds.items())},
                   sort_keys=True, indent=2) + "\n")
    for e in entries:
        src = ws.improvement_set / f"{e.image_id}.png"
        shutil.copyfile(src, ws.unsafe_dir / f"{e.image_id}.png")
    cfg.write(ws.unsafe_dir / "config.json")
    logger.info("assign step: %d of %d improvement images are unsafe",
                len(entries), len(improvement))
    return entries


# --------------------------------------------------------------------------- retrain

@dataclass
class RetrainResult:
    model_name: str
    original_train_accuracy: float
    retrained_train_accuracy: float
    original_test_accuracy: float
    retrained_test_accuracy: float
    added_rows: int


def step_retrain(ws: Workspace, cfg: PipelineConfig,
                 labels_path: Path | None = None) -> RetrainResult:
    """Retrain from current weights on training set + balanced unsafe set."""
    ws.check_layout()
    if not ws.unsafe_csv.is_file():
        raise FileNotFoundError(f"missing {ws.unsafe_csv}; run the assign step first")
    entries = read_unsafe_csv(ws.unsafe_csv)
    labels_path = Path(labels_path) if labels_path else ws.labels_csv
    if not labels_path.is_file():
        raise ValueError(
            f"no labels at {labels_path}; label the unsafe set (review UI or labels.csv) first")
    labeled, ingest = ingest_labels(entries, labels_path)
    if ingest.unknown_ids:
        logger.warning("%d label(s) for unknown image ids ignored", len(ingest.unknown_ids))
    if ingest.unlabeled_ids:
        logger.warning("%d unsafe image(s) still unlabeled; excluded from balancing",
                       len(ingest.unlabeled_ids))
    if not labeled:
        raise ValueError(
            f"no labeled unsafe entries in {labels_path}; label the unsafe set first")

    balanced = balance(labeled, derive_seed(cfg.seed, "balance"))
    extra = Dataset([DatasetItem(image_id=image_id, expected_raw=label,
                                 path=ws.unsafe_dir / f"{image_id}.png")
                     for image_id, label, _ in balanced.rows])
    training = Dataset.from_folder(ws.training_set)
    union = training.concat(extra)

    original_name = ws.latest_model_name()
    original = load_model(*ws.model_paths(original_name))
    retrained = train_sgd(original, union,
                          cfg.retrain_settings.to_train_config(derive_seed(cfg.seed, "retrain")))
    new_name = ws.next_model_name()
    save_model(retrained, *ws.model_paths(new_name))

    test_ds = Dataset.from_folder(ws.test_set)
    _, orig_train_acc = evaluate_dataset(original, training)
    _, new_train_acc = evaluate_dataset(retrained, training)
    _, orig_test_acc = evaluate_dataset(original, test_ds)
    _, new_test_acc = evaluate_dataset(retrained, test_ds)

    with open(ws.retrain_comparison, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "train_accuracy", "test_accuracy"])
        writer.writerow([original_name, repr(orig_train_acc), repr(orig_test_acc)])
        writer.writerow([new_name, repr(new_train_acc), repr(new_test_acc)])
    logger.info("retrain step: %s -> %s (train acc %.4f -> %.4f)",
                original_name, new_name, orig_train_acc, new_train_acc)
    return RetrainResult(model_name=new_name,
                         original_train_accuracy=orig_train_acc,
                         retrained_train_accuracy=new_train_acc,
                         original_test_accuracy=orig_test_acc,
                         retrained_test_accuracy=new_test_acc,
                         added_rows=len(balanced.rows))


# --------------------------------------------------------------------------- report

def step_report(ws: Workspace, cfg: PipelineConfig) -> dict:
    from rccdbg.pipeline.report import build_report

    report = build_report(ws, cfg)
    ws.report_json.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    return report
