"""Operator-facing wire messages.

Server -> client: per-frame object updates as canonical JSON text (sorted
keys, floats at 6 significant digits, no whitespace) so golden files stay
byte-stable, plus binary frame messages (8-byte little-endian frame id,
then JPEG bytes).  Client -> server: toggle / calibration / confirm.
"""

from __future__ import annotations

import json
import struct

from .detection import PrivacyState, TrackedObject
from .errors import ProtocolError
from .geometry import CalibrationState, Pose, transform_point
from .pipeline import ConfirmCalibration, SetCalibration, ToggleObject


def _canonical(value):
    if isinstance(value, float):
        return float(f"{value:.6g}")
    if isinstance(value, dict):
        return {k: _canonical(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_canonical(v) for v in value]
    return value


def canonical_json(obj) -> str:
    return json.dumps(_canonical(obj), sort_keys=True, separators=(",", ":"))


def serialize_object_update(tracks: list[TrackedObject],
                            calibration: CalibrationState, frame_id: int) -> str:
    """One entry per live track with viewer-world coordinates.

    Camera-frame coordinates never appear on the wire: centers pass through
    the calibrated camera->world transform.  Tracks missed this frame keep
    their last-known box and are flagged stale.
    """
    if not calibration.confirmed or calibration.camera_world is None:
        raise ProtocolError("calibration", "object updates require confirmed calibration")
    objects = []
    for track in sorted(tracks, key=lambda t: t.id):
        if track.bbox3d_center is None or track.bbox3d_size is None:
            continue  # no 3-D fix yet (only possible immediately after confirm)
        center = transform_point(calibration.camera_world, track.bbox3d_center)
        objects.append({
            "id": track.id,
            "class": track.class_label,
            "state": "private" if track.state is PrivacyState.PRIVATE else "public",
            "center": [center.x, center.y, center.z],
            "size": [float(v) for v in track.bbox3d_size],
            "stale": track.missed_frames > 0,
        })
    return canonical_json({"type": "objects", "frame_id": frame_id, "objects": objects})


def parse_client_message(text: str):
    """Strict parse into a queue message; extra fields are ignored."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError("json", str(exc)) from exc
    if not isinstance(doc, dict):
        raise ProtocolError("json", "message must be an object")
    msg_type = doc.get("type")
    if msg_type is None:
        raise ProtocolError("type", "missing")
    if msg_type == "toggle":
        obj_id = doc.get("id")
        if not isinstance(obj_id, int) or isinstance(obj_id, bool) or obj_id < 0:
            raise ProtocolError("id", "toggle id must be a non-negative integer")
        return ToggleObject(track_id=obj_id)
    if msg_type == "calibration":
        pose = doc.get("pose")
        if not isinstance(pose, list) or len(pose) != 12:
            raise ProtocolError("pose", "arity: need 12 values (9 rotation + 3 translation)")
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in pose):
            raise ProtocolError("pose", "values must be numbers")
        try:
            return SetCalibration(pose=Pose.from_flat(pose))
        except Exception as exc:
            raise ProtocolError("pose", str(exc)) from exc
    if msg_type == "confirm":
        return ConfirmCalibration()
    raise ProtocolError("type", f"unknown type {msg_type!r}")


def serialize_client_message(msg) -> str:
    if isinstance(msg, ToggleObject):
        return canonical_json({"type": "toggle", "id": msg.track_id})
    if isinstance(msg, SetCalibration):
        return canonical_json({"type": "calibration", "pose": msg.pose.to_flat()})
    if isinstance(msg, ConfirmCalibration):
        return canonical_json({"type": "confirm"})
    raise ProtocolError("type", f"cannot serialize {type(msg).__name__}")


def serialize_config(width: int, height: int, fx: float, fy: float,
                     cx: float, cy: float, display_scale: int = 2) -> str:
    """Connection hello: capture intrinsics so the client can project boxes."""
    return canonical_json({
        "type": "config",
        "intrinsics": {"fx": fx, "fy": fy, "cx": cx, "cy": cy,
                       "width": width, "height": height},
        "display_scale": display_scale,
    })


def encode_frame_msg(frame_id: int, jpeg: bytes) -> bytes:
    return struct.pack("<Q", frame_id) + jpeg


def decode_frame_msg(data: bytes) -> tuple[int, bytes]:
    if len(data) < 8:
        raise ProtocolError("length", "frame message shorter than its id prefix")
    (frame_id,) = struct.unpack_from("<Q", data)
    return frame_id, data[8:]
