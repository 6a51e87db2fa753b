import json

import pytest
from fastapi.testclient import TestClient

from rccdbg.pipeline import steps
from rccdbg.pipeline.workspace import Workspace
from rccdbg.server.app import create_app

from test_pipeline import label_unsafe_from_truth, run_through_assign, small_config


@pytest.fixture(scope="module")
def served(tmp_path_factory):
    cfg = small_config(seed=13)
    root = tmp_path_factory.mktemp("served")
    ws, test_result, cluster_result, entries = run_through_assign(root, cfg)
    client = TestClient(create_app(ws.root, cfg))
    return dict(ws=ws, cfg=cfg, client=client, cluster=cluster_result, entries=entries)


def test_cluster_list_matches_manifest_file(served):
    ws = served["ws"]
    best = served["cluster"].best_layer
    manifest = json.loads((ws.best_layer_dir(best) / "clusters.json").read_text())
    body = served["client"].get("/api/clusters").json()
    assert body["layer_index"] == manifest["layer_index"]
    assert body["k"] == manifest["k"]
    got = {c["id"]: c["members"] for c in body["clusters"]}
    want = {c["id"]: c["members"] for c in manifest["clusters"]}
    assert got == want


def test_cluster_images_ordered_like_manifest(served):
    body = served["client"].get("/api/clusters").json()
    first = body["clusters"][0]
    images = served["client"].get(f"/api/clusters/{first['id']}/images").json()
    assert images["images"] == first["members"]


def test_unknown_cluster_404(served):
    assert served["client"].get("/api/clusters/999/images").status_code == 404


def test_image_endpoint_serves_png_bytes(served):
    ws = served["ws"]
    image_id = served["cluster"].results[served["cluster"].best_layer].clusters[0].members[0]
    resp = served["client"].get(f"/api/images/{image_id}")
    assert resp.status_code == 200
    assert resp.headers["content-type"] == "image/png"
    assert resp.content == (ws.test_set / f"{image_id}.png").read_bytes()


def test_unknown_image_404(served):
    assert served["client"].get("/api/images/nope").status_code == 404


def test_report_endpoint_matches_build_report(served):
    from rccdbg.pipeline.report import build_report

    body = served["client"].get("/api/report").json()
    direct = build_report(served["ws"], served["cfg"])
    assert body == json.loads(json.dumps(direct))


def test_unsafe_listing_with_label_status(served):
    body = served["client"].get("/api/unsafe").json()
    assert body["total"] == len(served["entries"])
    assert body["labeled"] == sum(1 for e in body["entries"] if e["label"] is not None)
    ids = {e["image_id"] for e in body["entries"]}
    assert ids == {e.image_id for e in served["entries"]}


def test_label_post_persists_and_survives_restart(served):
    ws, client = served["ws"], served["client"]
    target = served["entries"][0].image_id
    resp = client.post("/api/labels", json={"image_id": target, "label": "1"})
    assert resp.status_code == 200
    assert resp.json() == {"image_id": target, "label": "1", "replaced": False}
    assert f"{target},1" in ws.labels_csv.read_text()

    fresh = TestClient(create_app(ws.root, served["cfg"]))
    body = fresh.get("/api/unsafe").json()
    labels = {e["image_id"]: e["label"] for e in body["entries"]}
    assert labels[target] == "1"


def test_label_repost_last_writer_wins(served):
    client = served["client"]
    target = served["entries"][1].image_id
    client.post("/api/labels", json={"image_id": target, "label": "0"})
    resp = client.post("/api/labels", json={"image_id": target, "label": "1"})
    assert resp.json()["replaced"] is True
    labels = dict(line.split(",") for line in
                  served["ws"].labels_csv.read_text().strip().splitlines()[1:])
    assert labels[target] == "1"


def test_label_for_unknown_image_rejected_without_file_change(served):
    ws, client = served["ws"], served["client"]
    before = ws.labels_csv.read_text() if ws.labels_csv.is_file() else None
    resp = client.post("/api/labels", json={"image_id": "ghost", "label": "1"})
    assert resp.status_code == 422
    after = ws.labels_csv.read_text() if ws.labels_csv.is_file() else None
    assert before == after


def test_empty_label_rejected(served):
    target = served["entries"][0].image_id
    resp = served["client"].post("/api/labels", json={"image_id": target, "label": ""})
    assert resp.status_code == 422


def test_status_reflects_artifacts(served):
    body = served["client"].get("/api/status").json()
    assert body["steps"]["test"] and body["steps"]["heatmaps"]
    assert body["steps"]["cluster"] and body["steps"]["assign"]
    assert not body["steps"]["retrain"]
    assert body["best_layer"] == served["cluster"].best_layer


def test_fresh_workspace_reports_nothing_run(tmp_path):
    ws = Workspace(tmp_path).ensure_layout()
    client = TestClient(create_app(ws.root))
    body = client.get("/api/status").json()
    assert not any(body["steps"].values())
    assert client.get("/api/clusters").status_code == 404
    assert client.get("/api/report").status_code == 404
    assert client.get("/api/unsafe").status_code == 404
    resp = client.post("/api/labels", json={"image_id": "x", "label": "1"})
    assert resp.status_code == 409


def test_labels_via_http_feed_retraining(served):
    ws, cfg, client = served["ws"], served["cfg"], served["client"]
    for e in served["entries"]:
        truth = dict(line.split(",") for line in
                     (ws.improvement_set / "labels.csv").read_text().strip().splitlines()[1:])
        client.post("/api/labels", json={"image_id": e.image_id, "label": truth[e.image_id]})
    result = steps.step_retrain(ws, cfg)
    assert result.model_name == "model_r1"
    status = client.get("/api/status").json()
    assert status["steps"]["retrain"]
