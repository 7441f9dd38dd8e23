"""Live operator server: streams privatized frames and object boxes over a
websocket, accepts toggle/calibration messages back, and drives the frame
loop on a background thread.

One operator client holds write access; any number of viewers receive the
same stream read-only.  Protocol pings are configured at the uvicorn layer
(5 s interval) when serving over a real socket.
"""

from __future__ import annotations

import asyncio
import contextlib
import logging
import threading
import time
from pathlib import Path

import cv2
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import FileResponse, HTMLResponse
from fastapi.staticfiles import StaticFiles

from .errors import ProtocolError
from .pipeline import Pipeline
from .scene import SceneRenderer, TrajectoryParams, camera_trajectory
from .wsproto import (canonical_json, encode_frame_msg, parse_client_message,
                      serialize_config, serialize_object_update)

logger = logging.getLogger(__name__)

_FALLBACK_PAGE = """<!doctype html>
<html><head><title>dimreal</title></head>
<body><h1>dimreal operator console</h1>
<p>No UI bundle found. Build the frontend (see README) and pass --ui-dir,
or connect to <code>/ws</code> with your own client.</p></body></html>"""


class LiveServer:
    def __init__(self, pipeline: Pipeline, renderer: SceneRenderer,
                 trajectory: str = "static",
                 trajectory_params: TrajectoryParams | None = None,
                 frame_limit: int | None = None, target_fps: float = 0.0,
                 jpeg_quality: int = 80):
        self.pipeline = pipeline
        self.renderer = renderer
        self.trajectory = trajectory
        self.trajectory_params = trajectory_params or TrajectoryParams()
        self.frame_limit = frame_limit
        self.target_fps = target_fps
        self.jpeg_quality = jpeg_quality
        self.frames_done = 0
        self._clients: dict[WebSocket, str] = {}
        self._clients_lock = threading.Lock()
        self._operator: WebSocket | None = None
        self._loop: asyncio.AbstractEventLoop | None = None
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    # -- connection handling -------------------------------------------------

    async def handle_ws(self, ws: WebSocket) -> None:
        await ws.accept()
        requested = ws.query_params.get("role")
        with self._clients_lock:
            if requested != "viewer" and self._operator is None:
                role = "operator"
                self._operator = ws
            else:
                role = "viewer"
            self._clients[ws] = role
        intr = self.pipeline.intrinsics
        await ws.send_text(serialize_config(intr.width, intr.height, intr.fx,
                                            intr.fy, intr.cx, intr.cy))
        try:
            while True:
                text = await ws.receive_text()
                if role != "operator":
                    continue
                try:
                    self.pipeline.submit(parse_client_message(text))
                except ProtocolError as exc:
                    await ws.send_text(canonical_json(
                        {"type": "error", "reason": str(exc)}))
        except WebSocketDisconnect:
            pass
        finally:
            with self._clients_lock:
                self._clients.pop(ws, None)
                if self._operator is ws:
                    self._operator = None

    async def _broadcast(self, frame_bytes: bytes, objects_text: str | None) -> None:
        with self._clients_lock:
            targets = list(self._clients)
        for ws in targets:
            try:
                await ws.send_bytes(frame_bytes)
                if objects_text is not None:
                    await ws.send_text(objects_text)
            except Exception:
                with self._clients_lock:
                    self._clients.pop(ws, None)
                    if self._operator is ws:
                        self._operator = None

    # -- frame loop -----------------------------------------------------------

    def _run_loop(self) -> None:
        interval = 1.0 / self.target_fps if self.target_fps > 0 else 0.0
        t = 0
        while not self._stop.is_set():
            if self.frame_limit is not None and t >= self.frame_limit:
                break
            tick = time.perf_counter()
            pose = camera_trajectory(self.trajectory, t, self.trajectory_params)
            frame, truth = self.renderer.render(pose, t)
            capture_ms = (time.perf_counter() - tick) * 1e3
            result = self.pipeline.step(frame, truth, capture_ms)

            bgr = cv2.cvtColor(result.output, cv2.COLOR_RGB2BGR)
            ok, jpeg = cv2.imencode(".jpg", bgr,
                                    [cv2.IMWRITE_JPEG_QUALITY, self.jpeg_quality])
            if ok:
                objects_text = None
                if self.pipeline.calibration.confirmed:
                    objects_text = serialize_object_update(
                        result.tracks, self.pipeline.calibration, result.frame_id)
                if self._loop is not None:
                    future = asyncio.run_coroutine_threadsafe(
                        self._broadcast(encode_frame_msg(result.frame_id,
                                                         jpeg.tobytes()),
                                        objects_text), self._loop)
                    with contextlib.suppress(Exception):
                        future.result(timeout=2.0)
            self.frames_done += 1
            t += 1
            if interval:
                time.sleep(max(0.0, interval - (time.perf_counter() - tick)))

    def start(self, loop: asyncio.AbstractEventLoop) -> None:
        self._loop = loop
        self._stop.clear()
        self._thread = threading.Thread(target=self._run_loop, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=10.0)
            self._thread = None


def create_app(server: LiveServer, ui_dir: str | Path | None = None) -> FastAPI:
    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        server.start(asyncio.get_running_loop())
        try:
            yield
        finally:
            server.stop()

    app = FastAPI(lifespan=lifespan)
    app.state.live = server

    ui_path = Path(ui_dir) if ui_dir else None

    @app.get("/")
    async def index():
        if ui_path and (ui_path / "index.html").is_file():
            return FileResponse(ui_path / "index.html")
        return HTMLResponse(_FALLBACK_PAGE)

    if ui_path and ui_path.is_dir():
        app.mount("/assets", StaticFiles(directory=ui_path), name="assets")

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await server.handle_ws(ws)

    return app
