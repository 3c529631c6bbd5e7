import json

import pytest
from fastapi.testclient import TestClient

from limis.backends import SyntheticBackend
from limis.commands import parse
from limis.engine import create_session, replay
from limis.maskops import mask_to_png, rle_decode
from limis.service import ServiceConfig, create_app
from limis.volume_io import render_phantom, scene_to_json, slice_transversal, write_nifti

from .phantoms import lobed_scene, single_organ_scene


@pytest.fixture()
def client():
    return TestClient(create_app(ServiceConfig()))


def _upload_scene(client, scene) -> str:
    resp = client.post("/v1/images", content=json.dumps(scene_to_json(scene)))
    assert resp.status_code == 200, resp.text
    return resp.json()["image_id"]


def _make_session(client, scene=None, label="liver"):
    scene = scene or single_organ_scene("liver")
    image_id = _upload_scene(client, scene)
    resp = client.post("/v1/sessions", json={
        "image_id": image_id, "slice": 0, "target_label": label,
    })
    assert resp.status_code == 200, resp.text
    return resp.json(), image_id


def test_upload_phantom_scene(client):
    scene = single_organ_scene("liver")
    image_id = _upload_scene(client, scene)
    assert len(image_id) == 16
    doc, _ = _make_session(client)
    assert doc["step"] == 0
    assert doc["detections"] and doc["detections"][0]["label"] == "liver"
    assert rle_decode(doc["mask_rle"]).area > 0


def test_upload_nifti_bytes(client):
    vol, _ = render_phantom(single_organ_scene("liver"))
    resp = client.post("/v1/images", content=write_nifti(vol))
    assert resp.status_code == 200
    doc = resp.json()
    assert doc["source"] == "nifti"
    assert (doc["width"], doc["height"], doc["slices"]) == (64, 64, 1)


def test_upload_garbage_400(client):
    resp = client.post("/v1/images", content=b"\x00" * 64)
    assert resp.status_code == 400


def test_command_happy_path(client):
    doc, _ = _make_session(client)
    sid = doc["session_id"]
    resp = client.post(f"/v1/sessions/{sid}/command", json={"text": "threshold 0.6"})
    assert resp.status_code == 200, resp.text
    body = resp.json()
    assert body["step_id"] == 1
    assert body["parent_id"] == 0
    assert body["op"] == "set_threshold"
    assert body["tau"] == 0.6
    assert "mask_rle" in body and "window" in body and "box" in body


def test_command_parse_error_400_with_suggestions(client):
    doc, _ = _make_session(client)
    sid = doc["session_id"]
    resp = client.post(f"/v1/sessions/{sid}/command", json={"text": "frobnicate"})
    assert resp.status_code == 400
    body = resp.json()
    assert "parse_error" in body
    assert isinstance(body["suggestions"], list)


def test_unknown_ids_404(client):
    assert client.post("/v1/sessions", json={
        "image_id": "nope", "slice": 0, "target_label": "liver",
    }).status_code == 404
    assert client.post("/v1/sessions/nope/command",
                       json={"text": "accept"}).status_code == 404
    assert client.get("/v1/sessions/nope").status_code == 404
    doc, image_id = _make_session(client)
    assert client.post("/v1/sessions", json={
        "image_id": image_id, "slice": 5, "target_label": "liver",
    }).status_code == 404
    sid = doc["session_id"]
    assert client.get(f"/v1/sessions/{sid}/steps/42/mask.png").status_code == 404


def test_stale_proposal_409(client):
    doc, _ = _make_session(client, scene=lobed_scene("liver", lobe_hu_offset=45.0))
    sid = doc["session_id"]
    r = client.post(f"/v1/sessions/{sid}/command", json={"text": "expand box 15"})
    assert r.status_code == 200
    assert client.post(f"/v1/sessions/{sid}/accept").status_code == 200
    r = client.post(f"/v1/sessions/{sid}/command", json={"text": "critical points"})
    assert r.status_code == 200
    assert r.json()["critical_points"]
    client.post(f"/v1/sessions/{sid}/revert", json={"to": 0})
    resp = client.post(f"/v1/sessions/{sid}/command", json={"text": "point 0 foreground"})
    assert resp.status_code == 409


def test_engine_conflict_409(client):
    doc, _ = _make_session(client)
    sid = doc["session_id"]
    resp = client.post(f"/v1/sessions/{sid}/command", json={"text": "remove component 5"})
    assert resp.status_code == 409
    resp = client.post(f"/v1/sessions/{sid}/command", json={"text": "next"})
    assert resp.status_code == 409  # no active strategy


def test_remote_backend_down_503():
    app = create_app(ServiceConfig(backend="remote", remote_url="http://127.0.0.1:1"))
    client = TestClient(app)
    image_id = _upload_scene(client, single_organ_scene("liver"))
    resp = client.post("/v1/sessions", json={
        "image_id": image_id, "slice": 0, "target_label": "liver",
    })
    assert resp.status_code == 503


def test_mask_png_and_export(client):
    doc, _ = _make_session(client)
    sid = doc["session_id"]
    client.post(f"/v1/sessions/{sid}/command", json={"text": "apply default"})
    export = client.get(f"/v1/sessions/{sid}").json()
    assert export["target"] == "liver"
    assert len(export["steps"]) == 2
    png = client.get(f"/v1/sessions/{sid}/steps/0/mask.png")
    assert png.status_code == 200
    assert png.headers["content-type"] == "image/png"
    # byte-for-byte the engine's own PNG encoding of step 0
    mask = rle_decode(export["steps"][0]["mask_rle"])
    assert png.content == mask_to_png(mask)


def test_accept_revert_final_endpoints(client):
    doc, _ = _make_session(client)
    sid = doc["session_id"]
    client.post(f"/v1/sessions/{sid}/command", json={"text": "threshold 0.7"})
    r = client.post(f"/v1/sessions/{sid}/accept")
    assert r.json() == {"cursor": 1, "accepted_step": 1}
    r = client.post(f"/v1/sessions/{sid}/revert", json={"to": 0})
    assert r.json()["cursor"] == 0
    r = client.post(f"/v1/sessions/{sid}/final", json={"step": 1})
    assert r.json() == {"final": 1}
    export = client.get(f"/v1/sessions/{sid}").json()
    assert export["final"] == 1 and export["cursor"] == 0


def test_trajectory_with_and_without_gt(client):
    doc, _ = _make_session(client)  # phantom scenes carry ground truth
    sid = doc["session_id"]
    client.post(f"/v1/sessions/{sid}/command", json={"text": "apply default"})
    client.post(f"/v1/sessions/{sid}/accept")
    resp = client.get(f"/v1/sessions/{sid}/trajectory")
    assert resp.status_code == 200
    body = resp.json()
    assert body["series"] and "verdict" in body["summary"]

    vol, _ = render_phantom(single_organ_scene("liver"))
    upload = client.post("/v1/images", content=write_nifti(vol))
    resp = client.post("/v1/sessions", json={
        "image_id": upload.json()["image_id"], "slice": 0, "target_label": "liver",
    })
    sid2 = resp.json()["session_id"]
    assert client.get(f"/v1/sessions/{sid2}/trajectory").status_code == 404


def test_help_endpoint(client):
    resp = client.get("/v1/help")
    assert resp.status_code == 200
    assert "Command grammar" in resp.text


def test_slice_png_endpoint(client):
    scene = single_organ_scene("liver")
    image_id = _upload_scene(client, scene)
    resp = client.get(f"/v1/images/{image_id}/slices/0.png?center=60&width=160")
    assert resp.status_code == 200
    assert resp.headers["content-type"] == "image/png"
    assert client.get(f"/v1/images/{image_id}/slices/7.png").status_code == 404


def test_api_engine_parity(client):
    """Every transition via the API matches the same commands via the engine."""
    scene = single_organ_scene("liver")
    doc, _ = _make_session(client, scene=scene)
    sid = doc["session_id"]
    phrases = ["apply default", "accept", "threshold 0.4", "accept",
               "expand box 5", "accept", "revert to step 1",
               "center click", "accept", "final step 2"]
    for phrase in phrases:
        resp = client.post(f"/v1/sessions/{sid}/command", json={"text": phrase})
        assert resp.status_code == 200, (phrase, resp.text)
    api_export = client.get(f"/v1/sessions/{sid}").json()

    vol, gt = render_phantom(scene)
    session = create_session(
        slice_transversal(vol, 0), "liver", SyntheticBackend(),
        gt=gt.mask_for(0, "liver"), session_id=api_export["session"],
        image_ref=api_export["image"],
    )
    for phrase in phrases:
        session.apply_command(parse(phrase))
    assert session.export() == api_export


def test_data_dir_persists_session_exports(tmp_path):
    app = create_app(ServiceConfig(data_dir=str(tmp_path / "exports")))
    client = TestClient(app)
    doc, _ = _make_session(client)
    sid = doc["session_id"]
    client.post(f"/v1/sessions/{sid}/command", json={"text": "apply default"})
    client.post(f"/v1/sessions/{sid}/accept")
    on_disk = json.loads((tmp_path / "exports" / f"{sid}.json").read_text())
    assert on_disk == client.get(f"/v1/sessions/{sid}").json()
