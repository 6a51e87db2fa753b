"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with `pytest -s tests/test_acceptance.py` to see them
all). Expected values come from published reference numbers, independent
oracles (finite differences, brute-force clustering, hand-derived curves),
or constructions whose ground truth is known by design.
"""

import hashlib
import json

import numpy as np
import pytest

from rccdbg.cluster.distance import distance_matrix
from rccdbg.cluster.kneedle import kneedle
from rccdbg.cluster.linkage import hac_average_linkage
from rccdbg.cluster.reporting import inspection_ratio
from rccdbg.lrp.propagate import LrpConfig, heatmaps_for_image, output_relevance
from rccdbg.lrp.store import load_heatmap_bundle
from rccdbg.netcore.data import Dataset, DatasetItem
from rccdbg.netcore.evaluation import evaluate_dataset
from rccdbg.netcore.layers import Conv2d, Dense, Flatten, MaxPool2d, ReLU
from rccdbg.netcore.network import NetworkModel, Task, forward, snap_float32
from rccdbg.netcore.persistence import load_model
from rccdbg.netcore.training import init_weights, train_sgd
from rccdbg.pipeline import steps
from rccdbg.pipeline.config import GenSettings, PipelineConfig, TrainSettings
from rccdbg.pipeline.seeds import derive_seed
from rccdbg.pipeline.workspace import Workspace
from rccdbg.synthgen import read_params_csv
from rccdbg.unsafe import assign_improvement, cluster_thresholds

from oracles import brute_force_average_linkage, max_relative_gradient_error
from test_linkage import _merge_members


def record(name: str, passed: bool, detail: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    suffix = f"  ({detail})" if detail else ""
    print(f"[ACCEPTANCE] {name}: {status}{suffix}")


# --------------------------------------------------------------------------
# Shared pipeline runs
# --------------------------------------------------------------------------

VARIANCE_STUDY_CONFIG = PipelineConfig(
    seed=11,
    gen=GenSettings(train_count=1200, test_count=800, improvement_count=800,
                    noise_range=(0.05, 0.12)))

# Incomplete-training-set scenario: training images use narrower center
# jitter than the test/improvement sets, so off-center borderline images are
# a genuine, fixable coverage gap (see notes in the retraining experiment).
RETRAIN_STUDY_NET = (("conv2d", 1, 8, 3, 1), ("relu",), ("maxpool2d", 2, 2), ("flatten",),
           ("dense", 392, 32), ("relu",), ("dense", 32, 2))


def retrain_study_config(seed: int) -> PipelineConfig:
    return PipelineConfig(
        seed=seed,
        model_layers=RETRAIN_STUDY_NET,
        gen=GenSettings(noise_range=(0.01, 0.04), hard_band=(184.0, 196.0),
                        center_jitter=2.6, train_center_jitter=1.8,
                        scale_range=(0.8, 1.05),
                        train_count=1200, test_count=1600, improvement_count=2000),
        train=TrainSettings(lr=0.08, epochs=30, batch_size=32),
        retrain=TrainSettings(lr=0.02, epochs=15, batch_size=64))


def run_pipeline(root, cfg) -> dict:
    ws = Workspace(root)
    steps.step_gen(ws, cfg)
    steps.step_train(ws, cfg)
    test_result = steps.step_test(ws, cfg)
    steps.step_heatmaps(ws, cfg)
    cluster_result = steps.step_cluster(ws, cfg)
    entries = steps.step_assign(ws, cfg)
    truth = dict(line.split(",") for line in
                 (ws.improvement_set / "labels.csv").read_text().strip().splitlines()[1:])
    with open(ws.labels_csv, "w") as fh:
        fh.write("image_id,label\n")
        for e in entries:
            fh.write(f"{e.image_id},{truth[e.image_id]}\n")
    retrain_result = steps.step_retrain(ws, cfg)
    report = steps.step_report(ws, cfg)
    return dict(ws=ws, cfg=cfg, test=test_result, cluster=cluster_result,
                entries=entries, retrain=retrain_result, report=report)


@pytest.fixture(scope="module")
def variance_study_run(tmp_path_factory):
    return run_pipeline(tmp_path_factory.mktemp("varstudy"), VARIANCE_STUDY_CONFIG)


# --------------------------------------------------------------------------
# Criterion: published inspection-ratio arithmetic
# --------------------------------------------------------------------------

def test_acceptance_inspection_ratio_reference_rows():
    rows = [(16, 5371, 1.49), (17, 1580, 5.38), (71, 1554, 22.84)]
    results = [round(inspection_ratio(k, n), 2) for k, n, _ in rows]
    ok = results == [want for _, _, want in rows]
    record("inspection-ratio reference rows", ok, f"{results}")
    assert ok


# --------------------------------------------------------------------------
# Criterion: relevance conservation across layers
# --------------------------------------------------------------------------

def _random_positive_net(rng) -> tuple[NetworkModel, np.ndarray]:
    """Bias-free net, positive weights and inputs: every pre-activation > 0."""
    if rng.uniform() < 0.5:
        in_dim, hidden, out = rng.integers(3, 7), rng.integers(3, 7), rng.integers(2, 4)
        model = NetworkModel([Dense(in_dim, hidden), ReLU(), Dense(hidden, out)],
                             Task.classification(int(out)), (int(in_dim),))
        x = rng.uniform(0.1, 1.0, int(in_dim))
    else:
        size = int(rng.integers(5, 8))
        flat = 2 * (size - 2) ** 2
        model = NetworkModel([Conv2d(1, 2, 3, 1), ReLU(), Flatten(), Dense(flat, 2)],
                             Task.classification(2), (1, size, size))
        x = rng.uniform(0.1, 1.0, (1, size, size))
    for layer in model.parameterized():
        layer.weight = rng.uniform(0.05, 1.0, layer.weight.shape)
        layer.bias = np.zeros_like(layer.bias)
    return snap_float32(model), x


def _random_general_net(rng) -> tuple[NetworkModel, np.ndarray]:
    """Mixed-sign weights, pooling, and small biases (the epsilon rule absorbs
    relevance proportional to |bias| / |z|, so biases stay small)."""
    size = int(rng.integers(6, 9))
    pooled = (size - 2) // 2
    flat = 2 * pooled * pooled
    model = NetworkModel(
        [Conv2d(1, 2, 3, 1), ReLU(), MaxPool2d(2, 2), Flatten(), Dense(flat, 3)],
        Task.classification(3), (1, size, size))
    for layer in model.parameterized():
        layer.weight = rng.standard_normal(layer.weight.shape)
        layer.bias = rng.uniform(-1e-5, 1e-5, layer.bias.shape)
    return snap_float32(model), rng.uniform(-1.0, 1.0, (1, size, size))


def _conservation_spread(model, x, epsilon) -> float:
    out, trace = forward(model, x)
    maps = heatmaps_for_image(model, trace, LrpConfig(epsilon=epsilon), "img")
    total = output_relevance(out, model.task).sum()
    if total == 0.0:
        return 0.0
    sums = np.array([hm.relevance.sum() for hm in maps])
    return float(np.abs(sums - total).max() / abs(total))


def test_acceptance_lrp_conservation():
    rng = np.random.default_rng(2024)
    worst_exact = 0.0
    for _ in range(20):
        model, x = _random_positive_net(rng)
        worst_exact = max(worst_exact, _conservation_spread(model, x, epsilon=0.0))
    worst_general = 0.0
    for _ in range(20):
        model, x = _random_general_net(rng)
        worst_general = max(worst_general, _conservation_spread(model, x, epsilon=1e-9))
    ok = worst_exact <= 1e-9 and worst_general <= 1e-3
    record("LRP conservation", ok,
           f"bias-free spread {worst_exact:.2e} <= 1e-9, general {worst_general:.2e} <= 1e-3")
    assert ok


# --------------------------------------------------------------------------
# Criterion: analytic gradients vs central finite differences
# --------------------------------------------------------------------------

def test_acceptance_gradient_oracle():
    worst = 0.0
    for seed in range(6):
        rng = np.random.default_rng(3000 + seed)
        if seed % 2 == 0:
            model = NetworkModel([Dense(4, 5), ReLU(), Dense(5, 3)],
                                 Task.classification(3), (4,))
            x = rng.uniform(-1, 1, (3, 4))
            y = rng.integers(0, 3, 3)
        else:
            model = NetworkModel(
                [Conv2d(1, 2, 3, 1), ReLU(), MaxPool2d(2, 2), Flatten(), Dense(8, 2)],
                Task.classification(2), (1, 6, 6))
            x = rng.uniform(0, 1, (2, 1, 6, 6))
            y = rng.integers(0, 2, 2)
        init_weights(model, 3000 + seed)
        worst = max(worst, max_relative_gradient_error(model, x, y))
    ok = worst <= 1e-4
    record("gradient finite-difference oracle", ok, f"worst rel err {worst:.2e} <= 1e-4")
    assert ok


# --------------------------------------------------------------------------
# Criterion: linkage merge sequence equals brute-force oracle
# --------------------------------------------------------------------------

def test_acceptance_clustering_oracle():
    rng = np.random.default_rng(99)
    mismatches = 0
    for _ in range(100):
        n = int(rng.integers(3, 13))
        dm = distance_matrix([f"i{k}" for k in range(n)], list(rng.uniform(size=(n, 3))))
        got = _merge_members(hac_average_linkage(dm))
        want = brute_force_average_linkage(dm.d)
        mismatches += got != want
    ok = mismatches == 0
    record("average-linkage brute-force oracle", ok, f"{mismatches} mismatches in 100 trials")
    assert ok


# --------------------------------------------------------------------------
# Criterion: kneedle recovers knees within one index
# --------------------------------------------------------------------------

def test_acceptance_kneedle_recovery():
    failures = []
    for c in (5.0, 9.0, 40.0):
        xs = np.arange(1.0, 10.0)
        got = kneedle(xs, c / xs)
        if abs(got.index - 2) > 1:  # x = 3 sits at index 2
            failures.append(f"hyperbola c={c}: index {got.index}")
    for joint in (3, 4, 6):
        xs = np.arange(0.0, 11.0)
        ys = np.where(xs <= joint, 30.0 - 5.0 * xs, (30.0 - 5.0 * joint) - 0.2 * (xs - joint))
        got = kneedle(xs, ys)
        if abs(got.index - joint) > 1:
            failures.append(f"elbow at {joint}: index {got.index}")
    ok = not failures
    record("kneedle knee recovery", ok, "; ".join(failures) or "hyperbolas and elbows within +-1")
    assert ok


# --------------------------------------------------------------------------
# Criterion: variance-reduction study on the planted borderline band
# --------------------------------------------------------------------------

def test_acceptance_variance_reduction_on_planted_band(variance_study_run):
    report = variance_study_run["report"]
    clusters = report["clusters"]
    with_reduction = [c for c in clusters if c["high_reduction_params"]]
    with_angle = [c for c in clusters if "angle" in c["high_reduction_params"]]
    ok = (len(with_reduction) >= 0.5 * len(clusters)) and len(with_angle) >= 1
    record("variance reduction on planted band", ok,
           f"{len(with_reduction)}/{len(clusters)} clusters >=50% reduction, "
           f"{len(with_angle)} flag the angle")
    assert ok


# --------------------------------------------------------------------------
# Criterion: targeted retraining beats random selection (equal label budget)
# --------------------------------------------------------------------------

def _band_accuracy(model, ws, band):
    params = read_params_csv(ws.test_set / "params.csv")
    ds = Dataset.from_folder(ws.test_set)
    keep = [i for i, it in enumerate(ds.items)
            if band[0] <= params[it.image_id]["angle"] <= band[1]]
    _, acc = evaluate_dataset(model, Dataset([ds.items[i] for i in keep]))
    return acc


def test_acceptance_retraining_beats_random_selection(tmp_path_factory):
    wins = 0
    details = []
    for seed in (1, 2, 3, 4, 5):
        cfg = retrain_study_config(seed)
        run = run_pipeline(tmp_path_factory.mktemp(f"retrain_{seed}"), cfg)
        ws = run["ws"]
        targeted_model = load_model(*ws.model_paths(run["retrain"].model_name))

        # baseline: same label budget, uniformly random selection, no balancing
        truth = dict(line.split(",") for line in
                     (ws.improvement_set / "labels.csv").read_text().strip().splitlines()[1:])
        improvement = Dataset.from_folder(ws.improvement_set)
        rng = np.random.default_rng(derive_seed(seed, "baseline.random"))
        picks = rng.choice(len(improvement), size=len(run["entries"]), replace=False)
        extra = Dataset([DatasetItem(image_id=improvement.items[i].image_id,
                                     expected_raw=truth[improvement.items[i].image_id],
                                     path=ws.improvement_set /
                                     f"{improvement.items[i].image_id}.png")
                         for i in picks])
        union = Dataset.from_folder(ws.training_set).concat(extra)
        original = load_model(*ws.model_paths("model"))
        random_model = train_sgd(
            original, union, cfg.retrain_settings.to_train_config(derive_seed(seed, "retrain")))

        band = cfg.gen.hard_band
        h = _band_accuracy(targeted_model, ws, band)
        r = _band_accuracy(random_model, ws, band)
        wins += h > r
        details.append(f"seed {seed}: {h:.4f} vs {r:.4f}")
    ok = wins >= 4
    record("targeted retraining beats random selection", ok,
           f"{wins}/5 wins; " + "; ".join(details))
    assert ok


# --------------------------------------------------------------------------
# Criterion: byte-identical rerun under a fixed seed
# --------------------------------------------------------------------------

DETERMINISM_CONFIG = PipelineConfig(
    seed=5,
    gen=GenSettings(image_size=12, train_count=160, test_count=120,
                    improvement_count=90, noise_range=(0.05, 0.12), center_jitter=1.0),
    model_layers=(("conv2d", 1, 3, 3, 1), ("relu",), ("maxpool2d", 2, 2),
                  ("flatten",), ("dense", 75, 2)),
    train=TrainSettings(lr=0.08, epochs=12, batch_size=16),
    retrain=TrainSettings(lr=0.05, epochs=3, batch_size=16))


def _tree_digest(root) -> dict[str, str]:
    digests = {}
    for path in sorted(root.rglob("*")):
        if path.is_file():
            digests[str(path.relative_to(root))] = hashlib.sha256(path.read_bytes()).hexdigest()
    return digests


def test_acceptance_determinism(tmp_path_factory):
    a = run_pipeline(tmp_path_factory.mktemp("det_a"), DETERMINISM_CONFIG)
    b = run_pipeline(tmp_path_factory.mktemp("det_b"), DETERMINISM_CONFIG)
    da, db = _tree_digest(a["ws"].root), _tree_digest(b["ws"].root)
    differing = sorted(set(da) ^ set(db)) + [p for p in da if p in db and da[p] != db[p]]
    ok = not differing
    record("full-pipeline determinism", ok,
           f"{len(da)} files byte-identical" if ok else f"differs: {differing[:5]}")
    assert ok


# --------------------------------------------------------------------------
# Criterion: every error image re-assigns into its own cluster
# --------------------------------------------------------------------------

def test_acceptance_threshold_soundness(variance_study_run):
    ws = variance_study_run["ws"]
    best = variance_study_run["cluster"].best_layer
    _, clusters = steps.load_clusters_manifest(ws.best_layer_dir(best) / "clusters.json")
    dm = steps.read_distance_csv(ws.best_layer_dir(best) / "distance.csv")
    member_ids, member_vectors = load_heatmap_bundle(ws.heatmap_layer_dir(best))
    thresholds = cluster_thresholds(clusters, dm)
    entries = assign_improvement(member_ids, member_vectors, member_ids, member_vectors,
                                 clusters, thresholds)
    own = {m: c.cluster_id for c in clusters for m in c.members}
    assigned = {e.image_id: e.assigned_cluster for e in entries}
    misplaced = [m for m in member_ids
                 if m not in assigned or assigned[m] != own[m]]
    ok = not misplaced
    record("assignment threshold soundness", ok,
           f"{len(member_ids) - len(misplaced)}/{len(member_ids)} back in their own cluster")
    assert ok
