"""Process-boundary transport for the inpainting engine.

Binary request/response protocol over a local stream socket, one request in
flight at a time (the writer finishes before the reader starts).  An
in-process client with the same surface covers single-binary runs.

Request:  magic "DRIP" | version u8 | frame_id u64 | width u16 | height u16
          | rgb (3*w*h bytes) | mask (w*h bytes, 0/255)
Response: magic "DRIP" | version u8 | frame_id u64 | status u8 (0 ok, 1 err)
          | rgb (3*w*h bytes, present iff ok) | inference_ms f32

All multi-byte integers are little-endian.  Engine memory persists across
requests within a connection and resets when a new connection starts.
"""

from __future__ import annotations

import socket
import socketserver
import struct
import threading
import time

import numpy as np

from .errors import EngineNumericError, ProtocolError
from .inpaint.base import InpaintEngine
from .masks import BinaryMask

MAGIC = b"DRIP"
VERSION = 1
_REQ_HEADER = struct.Struct("<4sBQHH")
_RESP_HEADER = struct.Struct("<4sBQB")

STATUS_OK = 0
STATUS_ERROR = 1


def encode_request(frame_id: int, rgb: np.ndarray, mask: BinaryMask) -> bytes:
    h, w = rgb.shape[:2]
    if w > 0xFFFF or h > 0xFFFF:
        raise ProtocolError("dimensions", f"{w}x{h} exceeds 65535")
    if mask.bits.shape != (h, w):
        raise ProtocolError("dimensions", "mask does not match frame")
    header = _REQ_HEADER.pack(MAGIC, VERSION, frame_id, w, h)
    mask_bytes = (mask.bits.astype(np.uint8) * 255).tobytes()
    return header + np.ascontiguousarray(rgb, dtype=np.uint8).tobytes() + mask_bytes


def decode_request(data: bytes) -> tuple[int, np.ndarray, BinaryMask]:
    if len(data) < _REQ_HEADER.size:
        raise ProtocolError("length", f"message is {len(data)} bytes, header needs "
                                      f"{_REQ_HEADER.size}")
    magic, version, frame_id, w, h = _REQ_HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ProtocolError("magic", f"got {magic!r}")
    if version != VERSION:
        raise ProtocolError("version", f"got {version}")
    if w == 0 or h == 0:
        raise ProtocolError("dimensions", "zero width or height")
    expected = _REQ_HEADER.size + 4 * w * h
    if len(data) != expected:
        raise ProtocolError("length", f"expected {expected} bytes, got {len(data)}")
    offset = _REQ_HEADER.size
    rgb = np.frombuffer(data, dtype=np.uint8, count=3 * w * h, offset=offset) \
        .reshape(h, w, 3).copy()
    offset += 3 * w * h
    mask = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=offset) \
        .reshape(h, w) >= 128
    return frame_id, rgb, BinaryMask(mask)


def encode_response(frame_id: int, status: int, rgb: np.ndarray | None,
                    inference_ms: float) -> bytes:
    header = _RESP_HEADER.pack(MAGIC, VERSION, frame_id, status)
    payload = b""
    if status == STATUS_OK:
        if rgb is None:
            raise ProtocolError("payload", "ok response requires an rgb payload")
        payload = np.ascontiguousarray(rgb, dtype=np.uint8).tobytes()
    return header + payload + struct.pack("<f", inference_ms)


def decode_response(data: bytes, width: int, height: int
                    ) -> tuple[int, int, np.ndarray | None, float]:
    if len(data) < _RESP_HEADER.size + 4:
        raise ProtocolError("length", f"message is {len(data)} bytes")
    magic, version, frame_id, status = _RESP_HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ProtocolError("magic", f"got {magic!r}")
    if version != VERSION:
        raise ProtocolError("version", f"got {version}")
    payload_len = 3 * width * height if status == STATUS_OK else 0
    expected = _RESP_HEADER.size + payload_len + 4
    if len(data) != expected:
        raise ProtocolError("length", f"expected {expected} bytes, got {len(data)}")
    rgb = None
    if status == STATUS_OK:
        rgb = np.frombuffer(data, dtype=np.uint8, count=payload_len,
                            offset=_RESP_HEADER.size).reshape(height, width, 3).copy()
    (inference_ms,) = struct.unpack_from("<f", data, len(data) - 4)
    return frame_id, status, rgb, inference_ms


def _read_exact(stream, n: int) -> bytes | None:
    """Read exactly n bytes from a file-like stream; None on clean EOF."""
    buf = b""
    while len(buf) < n:
        chunk = stream.read(n - len(buf))
        if not chunk:
            return None if not buf else buf  # partial read surfaces as short buffer
        buf += chunk
    return buf


def serve_session(engine: InpaintEngine, rfile, wfile) -> None:
    """One session: answer requests in order until the peer disconnects.

    Engine failures (wrong resolution, numeric errors) produce a status-1
    response and the session continues; corrupt framing ends the session
    since a byte stream cannot be resynchronized.
    """
    memory = engine.zero_memory()
    while True:
        header = _read_exact(rfile, _REQ_HEADER.size)
        if header is None:
            return
        if len(header) < _REQ_HEADER.size:
            return  # peer died mid-frame
        magic, version, frame_id, w, h = _REQ_HEADER.unpack_from(header)
        if magic != MAGIC or version != VERSION:
            return
        body = _read_exact(rfile, 4 * w * h)
        if body is None or len(body) < 4 * w * h:
            return
        try:
            _, rgb, mask = decode_request(header + body)
            result = engine.inpaint(rgb, mask, memory)
        except Exception:
            wfile.write(encode_response(frame_id, STATUS_ERROR, None, 0.0))
            wfile.flush()
            continue
        memory = result.memory
        wfile.write(encode_response(frame_id, STATUS_OK, result.rgb, result.inference_ms))
        wfile.flush()


class _SessionHandler(socketserver.StreamRequestHandler):
    def handle(self):
        engine = self.server.engine_factory()
        serve_session(engine, self.rfile, self.wfile)


class EngineServer:
    """TCP listener; each connection gets a fresh engine (fresh memory)."""

    def __init__(self, engine_factory, host: str = "127.0.0.1", port: int = 0):
        self._server = socketserver.ThreadingTCPServer((host, port), _SessionHandler,
                                                       bind_and_activate=True)
        self._server.daemon_threads = True
        self._server.engine_factory = engine_factory
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address[:2]

    def start(self) -> "EngineServer":
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        kwargs={"poll_interval": 0.05}, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread:
            self._thread.join(timeout=5.0)


class InpaintCall:
    __slots__ = ("rgb", "inference_ms", "prep_ms", "transport_ms")

    def __init__(self, rgb, inference_ms, prep_ms, transport_ms):
        self.rgb = rgb
        self.inference_ms = inference_ms
        self.prep_ms = prep_ms
        self.transport_ms = transport_ms


class LocalEngineClient:
    """In-process adapter with the same surface as the socket client."""

    def __init__(self, engine: InpaintEngine):
        self.engine = engine
        self.memory = engine.zero_memory()

    def inpaint_frame(self, frame_id: int, rgb: np.ndarray, mask: BinaryMask) -> InpaintCall:
        t0 = time.perf_counter()
        result = self.engine.inpaint(rgb, mask, self.memory)
        wall_ms = (time.perf_counter() - t0) * 1e3
        self.memory = result.memory
        return InpaintCall(result.rgb, result.inference_ms, 0.0,
                           max(0.0, wall_ms - result.inference_ms))

    def reset(self) -> None:
        self.memory = self.engine.zero_memory()

    def close(self) -> None:
        pass


class SocketEngineClient:
    """Speaks the byte protocol to an EngineServer over loopback."""

    def __init__(self, host: str, port: int):
        self.host = host
        self.port = port
        self._sock: socket.socket | None = None
        self._stream = None

    def _ensure_connected(self):
        if self._sock is None:
            self._sock = socket.create_connection((self.host, self.port))
            self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            self._stream = self._sock.makefile("rwb")

    def inpaint_frame(self, frame_id: int, rgb: np.ndarray, mask: BinaryMask) -> InpaintCall:
        self._ensure_connected()
        t0 = time.perf_counter()
        request = encode_request(frame_id, rgb, mask)
        prep_ms = (time.perf_counter() - t0) * 1e3
        h, w = rgb.shape[:2]
        t1 = time.perf_counter()
        self._stream.write(request)
        self._stream.flush()
        header = _read_exact(self._stream, _RESP_HEADER.size)
        if header is None or len(header) < _RESP_HEADER.size:
            raise ProtocolError("length", "connection closed mid-response")
        _, _, _, status = _RESP_HEADER.unpack_from(header)
        payload_len = (3 * w * h if status == STATUS_OK else 0) + 4
        rest = _read_exact(self._stream, payload_len)
        if rest is None or len(rest) < payload_len:
            raise ProtocolError("length", "connection closed mid-response")
        wall_ms = (time.perf_counter() - t1) * 1e3
        resp_id, status, out, inference_ms = decode_response(header + rest, w, h)
        if resp_id != frame_id:
            raise ProtocolError("frame_id", f"sent {frame_id}, got {resp_id}")
        if status != STATUS_OK:
            raise EngineNumericError(f"engine returned error status for frame {frame_id}")
        return InpaintCall(out, inference_ms, prep_ms,
                           max(0.0, wall_ms - inference_ms))

    def reset(self) -> None:
        """Reconnect: the server binds a fresh engine (memory zeroed)."""
        self.close()

    def close(self) -> None:
        if self._stream is not None:
            try:
                self._stream.close()
            except OSError:
                pass
            self._stream = None
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
            self._sock = None
