import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from deskbench.bench import RunConfig
from deskbench.service import PointingSession, build_app, build_embed_app


def _session(timeout=30.0, **cfg_overrides):
    base = dict(tasks=("T01",), levels=("L1",), episodes_per_cell=1, seeds=(0,),
                modality="pointing")
    base.update(cfg_overrides)
    session = PointingSession(
        cfg=RunConfig(**base), idle_timeout_s=timeout, expose_debug_targets=True
    )
    session.start()
    return session


def _wait_for(predicate, timeout=20.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        if predicate():
            return True
        time.sleep(0.02)
    return False


def test_pointing_episode_end_to_end():
    session = _session()
    client = TestClient(build_app(session))

    assert _wait_for(lambda: session.status()["awaiting_points"])
    status = client.get("/status").json()
    assert status["awaiting_points"] is True
    assert status["instruction"]
    targets = status["debug_targets"]
    assert targets

    png = client.get("/observation")
    assert png.status_code == 200
    assert png.headers["content-type"] == "image/png"
    assert png.content[:8] == b"\x89PNG\r\n\x1a\n"

    resp = client.post(
        "/points", json={"points": [{"x": int(t[0]), "y": int(t[1])} for t in targets]}
    )
    assert resp.status_code == 200

    assert _wait_for(lambda: session.status()["episodes_done"] >= 1)
    outcome = session.status()["last_outcome"]
    assert outcome["success"] is True


def test_points_validation_errors():
    session = _session()
    client = TestClient(build_app(session))
    assert _wait_for(lambda: session.status()["awaiting_points"])

    assert client.post("/points", json={"points": []}).status_code == 400
    assert client.post(
        "/points", json={"points": [{"x": 300, "y": 10}]}
    ).status_code == 400
    assert client.post(
        "/points", json={"points": [{"x": 1.5, "y": 10}]}
    ).status_code == 400
    assert client.post("/points", json={"points": [{"x": 10}]}).status_code == 400


def test_instruction_override():
    session = _session()
    client = TestClient(build_app(session))
    assert _wait_for(lambda: session.status()["awaiting_points"])
    resp = client.post("/instruction", json={"text": "Put the thing in the thing."})
    assert resp.status_code == 200
    assert session.status()["instruction"] == "Put the thing in the thing."
    assert client.post("/instruction", json={"text": "  "}).status_code == 400


def test_idle_timeout_scores_no_user_input():
    session = _session(timeout=0.2)
    assert _wait_for(lambda: session.status()["episodes_done"] >= 1, timeout=15)
    outcome = session.status()["last_outcome"]
    assert outcome["success"] is False
    assert outcome["reason"] == "no_user_input"


# ---------------- remote embedder protocol ----------------


def test_embed_endpoint_text_and_image():
    import base64
    import io

    from PIL import Image

    from deskbench.render import render_observation
    from deskbench.retrieval import embed_text
    from conftest import make_world

    client = TestClient(build_embed_app())
    resp = client.post("/embed", json={"kind": "text", "payload": "the red block"})
    assert resp.status_code == 200
    vec = np.array(resp.json()["vector"])
    assert np.allclose(vec, embed_text("the red block").vector)

    img = render_observation(
        make_world(("block", "solid", "red", None, 0.5, 0.0)), shadows=False
    )
    buf = io.BytesIO()
    Image.fromarray(img).save(buf, format="PNG")
    payload = base64.b64encode(buf.getvalue()).decode()
    resp = client.post("/embed", json={"kind": "image", "payload": payload})
    assert resp.status_code == 200
    assert len(resp.json()["vector"]) == len(vec)

    assert client.post(
        "/embed", json={"kind": "text", "payload": "zzz qqq"}
    ).status_code == 422
    assert client.post(
        "/embed", json={"kind": "alien", "payload": "x"}
    ).status_code == 400


@pytest.mark.slow
def test_remote_embedder_client_round_trip():
    import socket
    import threading

    import uvicorn

    from deskbench.retrieval import RemoteEmbedder, embed_text

    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]

    config = uvicorn.Config(build_embed_app(), host="127.0.0.1", port=port,
                            log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 15
    while not server.started and time.time() < deadline:
        time.sleep(0.05)
    assert server.started

    try:
        client = RemoteEmbedder(f"http://127.0.0.1:{port}")
        assert client.dim == len(embed_text("the red block").vector)
        remote = client.embed_text("the green and purple polka dot block")
        local = embed_text("the green and purple polka dot block")
        assert np.allclose(remote.vector, local.vector)
    finally:
        server.should_exit = True
        thread.join(timeout=10)
