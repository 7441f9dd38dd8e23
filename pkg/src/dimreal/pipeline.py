"""Per-frame orchestration: drain operator changes, detect/track, redact,
inpaint, upscale/composite, and back-project the point cloud — with per-stage
timings and fail-closed behavior on engine faults (masked regions go black,
source pixels never leak).
"""

from __future__ import annotations

import json
import logging
import threading
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._kernels import pack_pointcloud, upscale2x_u8
from .detection import (Detector, PrivacyState, TrackedObject, Tracker,
                        bbox3d_from_detection)
from .errors import InputError, NoDepthError
from .geometry import CalibrationState, Pose
from .masks import BinaryMask, merge_private_masks, redact
from .scene import CameraIntrinsics, FrameRGBD, GroundTruth

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Operator messages and the change queue

@dataclass(frozen=True)
class ToggleObject:
    track_id: int


@dataclass(frozen=True)
class SetCalibration:
    pose: Pose


@dataclass(frozen=True)
class ConfirmCalibration:
    pass


class ChangeQueue:
    """Many-producer / single-consumer FIFO; nothing is ever dropped."""

    def __init__(self):
        self._lock = threading.Lock()
        self._items: deque = deque()
        self.enqueued = 0
        self.consumed = 0

    def put(self, msg) -> None:
        with self._lock:
            self._items.append(msg)
            self.enqueued += 1

    def drain(self) -> list:
        with self._lock:
            items = list(self._items)
            self._items.clear()
            self.consumed += len(items)
        return items

    def __len__(self) -> int:
        with self._lock:
            return len(self._items)


def apply_changes(tracks: list[TrackedObject], messages) -> list[TrackedObject]:
    """Apply privacy toggles in arrival order.

    ``messages`` may be a ChangeQueue (drained here) or an already-drained
    list.  Toggles naming dead track ids are discarded with a warning.
    Non-toggle messages are ignored; the pipeline routes those itself.
    """
    if isinstance(messages, ChangeQueue):
        messages = messages.drain()
    by_id = {t.id: t for t in tracks}
    for msg in messages:
        if not isinstance(msg, ToggleObject):
            continue
        track = by_id.get(msg.track_id)
        if track is None:
            logger.warning("toggle for unknown/dead track id %d discarded", msg.track_id)
            continue
        track.state = (PrivacyState.PRIVATE if track.state is PrivacyState.PUBLIC
                       else PrivacyState.PUBLIC)
    return tracks


# ---------------------------------------------------------------------------
# Timing record

@dataclass
class StageTiming:
    frame_id: int
    capture_ms: float = 0.0
    detect_ms: float = 0.0
    redact_ms: float = 0.0
    inpaint_prep_ms: float = 0.0
    inpaint_infer_ms: float = 0.0
    inpaint_post_ms: float = 0.0
    transport_ms: float = 0.0
    pointcloud_ms: float = 0.0
    total_ms: float = 0.0
    engine_failed: bool = False

    def to_json_line(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)


# ---------------------------------------------------------------------------
# Upscaling

def upscale2x(raster: np.ndarray) -> np.ndarray:
    """Bilinear 2x upscale of a uint8 raster, half-pixel-center convention.

    Output sample 2i+k (k in {0,1}) blends source i with its clamped
    neighbor at weights 3/4 and 1/4 per axis; exact integer arithmetic with
    a single round-half-up at the end:

        out[2y+ky, 2x+kx] = (9*a[y,x] + 3*a[y2,x] + 3*a[y,x2] + a[y2,x2] + 8) >> 4
    """
    if raster.dtype != np.uint8:
        raise InputError("upscale2x expects a uint8 raster")
    return upscale2x_u8(raster)


# ---------------------------------------------------------------------------
# Point clouds

@dataclass(frozen=True)
class PointCloud:
    xyz: np.ndarray           # (N, 3) float32, camera frame
    rgb: np.ndarray           # (N, 3) uint8
    frame_id: int

    def __len__(self) -> int:
        return self.xyz.shape[0]


def transplant_pointcloud(rgb: np.ndarray, depth: np.ndarray,
                          intrinsics: CameraIntrinsics, frame_id: int = -1) -> PointCloud:
    """Back-project every valid-depth pixel, coloring it from the inpainted
    raster.  Depth is never modified, so removed objects keep their original
    surface — the documented ghosting artifact.
    """
    if rgb.shape[:2] != depth.shape:
        raise InputError("rgb and depth dimensions differ")
    xyz, colors = pack_pointcloud(depth, rgb, intrinsics.fx, intrinsics.fy,
                                  intrinsics.cx, intrinsics.cy)
    return PointCloud(xyz=xyz, rgb=colors, frame_id=frame_id)


def export_ply(cloud: PointCloud, path) -> None:
    """ASCII PLY with x y z r g b vertices; floats keep float32 round-trip
    precision.  The source frame id rides along in a comment."""
    lines = [
        "ply",
        "format ascii 1.0",
        f"comment frame_id {cloud.frame_id}",
        f"element vertex {len(cloud)}",
        "property float x",
        "property float y",
        "property float z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
        "end_header",
    ]
    body = [
        f"{x:.9g} {y:.9g} {z:.9g} {r} {g} {b}"
        for (x, y, z), (r, g, b) in zip(cloud.xyz.tolist(), cloud.rgb.tolist())
    ]
    Path(path).write_text("\n".join(lines + body) + "\n")


def load_ply(path) -> PointCloud:
    text = Path(path).read_text().splitlines()
    frame_id = -1
    count = 0
    idx = 0
    for idx, line in enumerate(text):
        if line.startswith("comment frame_id"):
            frame_id = int(line.split()[-1])
        elif line.startswith("element vertex"):
            count = int(line.split()[-1])
        elif line == "end_header":
            break
    rows = [line.split() for line in text[idx + 1: idx + 1 + count]]
    xyz = np.array([[float(v) for v in r[:3]] for r in rows], dtype=np.float32) \
        .reshape(count, 3)
    rgb = np.array([[int(v) for v in r[3:6]] for r in rows], dtype=np.uint8) \
        .reshape(count, 3)
    return PointCloud(xyz=xyz, rgb=rgb, frame_id=frame_id)


def _composite_upscaled(up_original: np.ndarray, inpainted: np.ndarray,
                        mask: BinaryMask) -> np.ndarray:
    """Composite at display resolution: bilinear rgb inside the
    nearest-neighbor-upscaled mask, the upscaled original everywhere else.

    The inpainted raster equals the original outside the mask, so its
    bilinear upscale only needs computing around the mask's bounding box
    (2 source pixels of padding cover the interpolation support).
    """
    x, y, w, h = mask.tight_bbox()
    height, width = inpainted.shape[:2]
    sx0, sy0 = max(0, x - 2), max(0, y - 2)
    sx1, sy1 = min(width, x + w + 2), min(height, y + h + 2)
    crop_up = upscale2x(np.ascontiguousarray(inpainted[sy0:sy1, sx0:sx1]))
    mask_crop_up = np.repeat(np.repeat(mask.bits[sy0:sy1, sx0:sx1], 2, axis=0),
                             2, axis=1)
    out = up_original.copy()
    region = out[2 * sy0:2 * sy1, 2 * sx0:2 * sx1]
    region[mask_crop_up] = crop_up[mask_crop_up]
    return out


# ---------------------------------------------------------------------------
# The frame loop

@dataclass
class StepResult:
    frame_id: int
    output: np.ndarray        # privatized frame, 2x capture resolution
    inpainted: np.ndarray     # capture-resolution inpainted rgb
    mask: BinaryMask
    cloud: PointCloud
    timing: StageTiming
    tracks: list[TrackedObject]


class Pipeline:
    """Single frame loop; exclusively mutates the tracker and engine client.

    Operator messages arrive concurrently through ``submit`` and are drained
    at the top of every step, before detection.
    """

    def __init__(self, intrinsics: CameraIntrinsics, detector: Detector,
                 client, tracker: Tracker | None = None,
                 calibration: CalibrationState | None = None):
        self.intrinsics = intrinsics
        self.detector = detector
        self.client = client
        self.tracker = tracker or Tracker()
        self.calibration = calibration or CalibrationState()
        self.changes = ChangeQueue()

    def submit(self, msg) -> None:
        self.changes.put(msg)

    def _route_messages(self) -> None:
        messages = self.changes.drain()
        toggles = []
        for msg in messages:
            if isinstance(msg, SetCalibration):
                self.calibration.set_marker(msg.pose)
            elif isinstance(msg, ConfirmCalibration):
                self.calibration.confirm()
            else:
                toggles.append(msg)
        apply_changes(self.tracker.tracks, toggles)

    def step(self, frame: FrameRGBD, truth: GroundTruth,
             capture_ms: float = 0.0) -> StepResult:
        t_start = time.perf_counter()
        self._route_messages()

        t0 = time.perf_counter()
        detections = self.detector.detect(frame, truth)
        tracks = self.tracker.associate(detections, frame.frame_id)
        if self.calibration.confirmed:
            for track in tracks:
                try:
                    center, size = bbox3d_from_detection(
                        track.latest, frame.depth, self.intrinsics)
                    track.bbox3d_center, track.bbox3d_size = center, size
                except NoDepthError:
                    pass  # keep the previous box
        detect_ms = (time.perf_counter() - t0) * 1e3

        t0 = time.perf_counter()
        mask = merge_private_masks(tracks, frame.width, frame.height)
        redacted = redact(frame, mask)
        redact_ms = (time.perf_counter() - t0) * 1e3

        engine_failed = False
        inference_ms = prep_ms = transport_ms = 0.0
        try:
            call = self.client.inpaint_frame(frame.frame_id, redacted.rgb, mask)
            inpainted = call.rgb
            inference_ms, prep_ms, transport_ms = \
                call.inference_ms, call.prep_ms, call.transport_ms
        except Exception:
            logger.exception("inpainting failed on frame %d; failing closed",
                             frame.frame_id)
            engine_failed = True
            inpainted = redacted.rgb  # masked regions stay black

        t0 = time.perf_counter()
        up_original = upscale2x(frame.rgb)
        if mask.is_empty() and not engine_failed:
            output = up_original
        elif engine_failed:
            output = up_original.copy()
            output[mask.upscale_nearest(2).bits] = 0
        else:
            output = _composite_upscaled(up_original, inpainted, mask)
        post_ms = (time.perf_counter() - t0) * 1e3

        t0 = time.perf_counter()
        cloud = transplant_pointcloud(inpainted, frame.depth, self.intrinsics,
                                      frame.frame_id)
        pointcloud_ms = (time.perf_counter() - t0) * 1e3

        timing = StageTiming(
            frame_id=frame.frame_id,
            capture_ms=capture_ms,
            detect_ms=detect_ms,
            redact_ms=redact_ms,
            inpaint_prep_ms=prep_ms,
            inpaint_infer_ms=inference_ms,
            inpaint_post_ms=post_ms,
            transport_ms=transport_ms,
            pointcloud_ms=pointcloud_ms,
            total_ms=(time.perf_counter() - t_start) * 1e3 + capture_ms,
            engine_failed=engine_failed,
        )
        return StepResult(frame_id=frame.frame_id, output=output, inpainted=inpainted,
                          mask=mask, cloud=cloud, timing=timing, tracks=tracks)
