import json

import pytest
from starlette.testclient import TestClient

from dimreal.detection import DetectorNoise, GroundTruthDetector, Tracker
from dimreal.inpaint import BaselineEngine
from dimreal.pipeline import Pipeline
from dimreal.scene import (BackgroundSpec, CameraIntrinsics, ObjectSpec, RectShape,
                           SceneRenderer, SceneSpec, TextureSpec)
from dimreal.server import LiveServer, create_app
from dimreal.service import LocalEngineClient
from dimreal.wsproto import decode_frame_msg

INTR = CameraIntrinsics(fx=100.0, fy=100.0, cx=32.0, cy=18.0, width=64, height=36)


def live_app():
    scene = SceneSpec(
        background=BackgroundSpec(depth=3.0, texture=TextureSpec(
            kind="constant", color_a=(120, 120, 120))),
        objects=(ObjectSpec(id=1, class_label="monitor",
                            shape=RectShape(0.0, 0.0, 0.2, 0.15),
                            depth=1.0, albedo=(220, 40, 40)),),
        intrinsics=INTR, seed=0)
    pipeline = Pipeline(intrinsics=INTR,
                        detector=GroundTruthDetector(DetectorNoise()),
                        client=LocalEngineClient(BaselineEngine(64, 36)),
                        tracker=Tracker())
    server = LiveServer(pipeline, SceneRenderer(scene), target_fps=60.0)
    return create_app(server), server


def recv(ws):
    msg = ws.receive()
    if msg.get("type") == "websocket.close":
        raise AssertionError("server closed the socket")
    if "text" in msg and msg["text"] is not None:
        return ("text", json.loads(msg["text"]))
    return ("bytes", msg["bytes"])


def pump_until(ws, predicate, limit=400):
    for _ in range(limit):
        kind, payload = recv(ws)
        if predicate(kind, payload):
            return payload
    raise AssertionError("condition not met within message budget")


IDENTITY_POSE = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]


def test_operator_flow_end_to_end():
    app, _server = live_app()
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            kind, hello = recv(ws)
            assert kind == "text" and hello["type"] == "config"
            assert hello["intrinsics"]["width"] == 64

            # frames stream before calibration; no object updates yet
            payload = pump_until(ws, lambda k, p: k == "bytes", limit=40)
            frame_id, jpeg = decode_frame_msg(payload)
            assert jpeg[:2] == b"\xff\xd8"

            ws.send_text(json.dumps({"type": "calibration", "pose": IDENTITY_POSE}))
            ws.send_text(json.dumps({"type": "confirm"}))

            update = pump_until(
                ws, lambda k, p: k == "text" and p.get("type") == "objects"
                and p["objects"])
            obj = update["objects"][0]
            assert obj["state"] == "public"

            ws.send_text(json.dumps({"type": "toggle", "id": obj["id"]}))
            flipped = pump_until(
                ws, lambda k, p: k == "text" and p.get("type") == "objects"
                and any(o["id"] == obj["id"] and o["state"] == "private"
                        for o in p["objects"]))
            assert flipped is not None


def test_viewer_is_read_only():
    app, _server = live_app()
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as operator:
            recv(operator)  # config hello
            operator.send_text(json.dumps({"type": "calibration",
                                           "pose": IDENTITY_POSE}))
            operator.send_text(json.dumps({"type": "confirm"}))
            pump_until(operator, lambda k, p: k == "text"
                       and p.get("type") == "objects" and p["objects"])

            with client.websocket_connect("/ws?role=viewer") as viewer:
                recv(viewer)  # config hello
                update = pump_until(viewer, lambda k, p: k == "text"
                                    and p.get("type") == "objects" and p["objects"])
                obj_id = update["objects"][0]["id"]
                viewer.send_text(json.dumps({"type": "toggle", "id": obj_id}))
                # pump plenty of frames: the toggle must NOT take effect
                for _ in range(40):
                    kind, payload = recv(viewer)
                    if kind == "text" and payload.get("type") == "objects":
                        assert all(o["state"] == "public"
                                   for o in payload["objects"])


def test_malformed_operator_message_gets_error_reply():
    app, _server = live_app()
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            recv(ws)
            ws.send_text("{broken json")
            reply = pump_until(ws, lambda k, p: k == "text"
                               and p.get("type") == "error")
            assert "json" in reply["reason"]


def test_index_serves_fallback_page():
    app, _server = live_app()
    with TestClient(app) as client:
        body = client.get("/").text
        assert "dimreal" in body


def test_index_serves_built_ui_when_present():
    from pathlib import Path

    from dimreal.server import create_app

    dist = Path(__file__).resolve().parents[1] / "frontend" / "dist"
    if not (dist / "index.html").is_file():
        pytest.skip("frontend bundle not built")
    _app, server = live_app()
    app = create_app(server, ui_dir=dist)
    with TestClient(app) as client:
        index = client.get("/").text
        assert "/assets/main.js" in index
        js = client.get("/assets/main.js")
        assert js.status_code == 200
        assert "OperatorClient" in js.text
