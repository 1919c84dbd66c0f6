import json
import time

import pytest
from fastapi.testclient import TestClient

from mfwb.service import create_app
from mfwb.store import dataset_to_manifest
from mfwb.synth import misassign2


@pytest.fixture()
def client(tmp_path):
    app = create_app(tmp_path)
    with TestClient(app) as c:
        yield c


@pytest.fixture()
def manifest():
    return dataset_to_manifest(misassign2(seed=0))


def wait_for_phase(client, sid, job_id, phases=("completed", "failed"),
                   timeout=60.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        info = client.get(f"/sessions/{sid}").json()
        if info["jobs"].get(job_id) in phases:
            return info["jobs"][job_id]
        time.sleep(0.05)
    raise TimeoutError(f"job {job_id} never reached {phases}")


def test_create_and_project_layout_covers_points(client, manifest):
    res = client.post("/sessions", json={"manifest": manifest})
    assert res.status_code == 200, res.text
    sid = res.json()["sessionId"]
    assert res.json()["points"] == 27

    res = client.post(f"/sessions/{sid}/projections",
                      json={"projectorId": "MFM", "seed": 0, "epochs": 40})
    job_id = res.json()["jobId"]
    assert wait_for_phase(client, sid, job_id) == "completed"

    res = client.get(f"/sessions/{sid}/projections/0")
    assert res.status_code == 200
    doc = res.json()
    assert doc["projector"] == "MFM"
    assert len(doc["layout"]["positions"]) == 27
    for xy in doc["layout"]["positions"].values():
        assert len(xy) == 2
    assert len(doc["lossTrace"]) == 40


def test_directive_completion_event_is_satisfied(client, manifest):
    sid = client.post("/sessions", json={"manifest": manifest}).json()["sessionId"]
    job = client.post(f"/sessions/{sid}/projections",
                      json={"projectorId": "MFM", "seed": 0, "epochs": 30}).json()
    wait_for_phase(client, sid, job["jobId"])

    with client.websocket_connect(f"/sessions/{sid}/events") as ws:
        res = client.post(f"/sessions/{sid}/directives", json={
            "directive": {"type": "point-set", "pointId": "img-planted",
                          "targetSetId": "a"},
            "trainConfig": {"epochs": 200, "margin": 0.1, "seed": 0},
        })
        job_id = res.json()["jobId"]
        phases = []
        completed = None
        deadline = time.time() + 120
        while time.time() < deadline:
            event = json.loads(ws.receive_text())
            if event.get("jobId") != job_id:
                continue
            phases.append(event["phase"])
            if event["phase"] in ("completed", "failed"):
                completed = event
                break
        assert completed is not None
        assert completed["phase"] == "completed"
        assert completed["verify"]["satisfied"] is True
        assert completed["version"] == 1
        assert "layout" in completed  # re-projection through the trained model
        # ordered lifecycle: queued precedes running precedes terminal
        assert phases.index("queued") < phases.index("running") < phases.index("completed")

    info = client.get(f"/sessions/{sid}").json()
    assert info["versions"] == 2


def test_concurrent_directives_serialize(client, manifest):
    sid = client.post("/sessions", json={"manifest": manifest}).json()["sessionId"]
    body = {
        "directive": {"type": "point-set", "pointId": "img-planted",
                      "targetSetId": "a"},
        "trainConfig": {"epochs": 60, "margin": 0.1},
    }
    j1 = client.post(f"/sessions/{sid}/directives", json=body).json()["jobId"]
    j2 = client.post(f"/sessions/{sid}/directives", json=body).json()["jobId"]
    wait_for_phase(client, sid, j2)
    session = client.app.state.manager.get(sid)
    events = [e for e in session.events if e.get("phase") in ("running", "completed")]
    order = [(e["jobId"], e["phase"]) for e in events]
    # the second job starts only after the first completes
    assert order.index((j1, "completed")) < order.index((j2, "running"))


def test_failed_job_leaves_versions_untouched(client, manifest):
    sid = client.post("/sessions", json={"manifest": manifest}).json()["sessionId"]
    res = client.post(f"/sessions/{sid}/directives", json={
        "directive": {"type": "point-set", "pointId": "img-planted",
                      "targetSetId": "ghost-set"},
        "trainConfig": {},
    })
    job_id = res.json()["jobId"]
    assert wait_for_phase(client, sid, job_id) == "failed"
    assert client.get(f"/sessions/{sid}").json()["versions"] == 1


def test_axes_endpoint(client, manifest):
    sid = client.post("/sessions", json={"manifest": manifest}).json()["sessionId"]
    res = client.post(f"/sessions/{sid}/axes", json={
        "specs": [{"concepts": ["a"]}, {"concepts": ["a", "b"], "length": 50}],
        "bins": 10,
    })
    assert res.status_code == 200
    axes = res.json()["axes"]
    assert axes[0]["kind"] == "one-end"
    assert axes[1]["kind"] == "two-end"
    assert len(axes[1]["pairLinks"]) == 25  # shared image ids across the two axes
    assert sum(axes[0]["histogram"]) == 25


def test_contours_endpoint(client, manifest):
    sid = client.post("/sessions", json={"manifest": manifest}).json()["sessionId"]
    job = client.post(f"/sessions/{sid}/projections",
                      json={"projectorId": "PCA"}).json()
    wait_for_phase(client, sid, job["jobId"])
    res = client.get(f"/sessions/{sid}/contours/0")
    assert res.status_code == 200
    contours = res.json()["contours"]
    set_ids = {c["setId"] for c in contours}
    assert set_ids == {"a", "b"}
    assert client.get(f"/sessions/{sid}/contours/5").status_code == 404


def test_augment_creates_version(client, manifest):
    sid = client.post("/sessions", json={"manifest": manifest}).json()["sessionId"]
    res = client.post(f"/sessions/{sid}/augment", json={
        "points": [{"id": "new-0", "modality": "Image",
                    "vector": [0.1] * 16},
                   {"id": "new-1", "modality": "Image",
                    "vector": [-0.1] * 16}],
        "setId": "uploads",
    })
    assert res.status_code == 200, res.text
    assert res.json() == {"added": 2, "version": 1}
    info = client.get(f"/sessions/{sid}").json()
    assert info["points"] == 29
    assert "uploads" in info["sets"]


def test_neighbors_gallery_payload(client, manifest):
    sid = client.post("/sessions", json={"manifest": manifest}).json()["sessionId"]
    res = client.get(f"/sessions/{sid}/neighbors/img-planted",
                     params={"k": 3, "modality": "Image"})
    assert res.status_code == 200
    neighbors = res.json()["neighbors"]
    assert len(neighbors) == 3
    assert all(set(n) >= {"id", "distance", "assetUri", "label", "setId"}
               for n in neighbors)
    dists = [n["distance"] for n in neighbors]
    assert dists == sorted(dists)


def test_manifest_path_loading(tmp_path, manifest):
    (tmp_path / "data.json").write_text(json.dumps(manifest))
    app = create_app(tmp_path)
    with TestClient(app) as client:
        res = client.post("/sessions", json={"manifestPath": "data.json"})
        assert res.status_code == 200
        res = client.post("/sessions", json={"manifestPath": "../escape.json"})
        assert res.status_code == 400


def test_unknown_session_404(client):
    assert client.get("/sessions/nope").status_code == 404
