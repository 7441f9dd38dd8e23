"""Rigid-body pose algebra and camera/viewer perspective alignment.

Poses map points from their own frame into the parent frame:
``x_parent = R @ x_local + t``.  The calibration helpers express the capture
camera in the viewer's neutral frame so that camera-frame detections can be
rendered in viewer-world space.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ConfigError

# Orthonormality drift beyond this triggers polar re-orthonormalization.
_DRIFT_TOL = 1e-6
# Drift beyond this is treated as a broken rotation, not accumulated error.
_REJECT_TOL = 1e-3


class Point3(NamedTuple):
    x: float
    y: float
    z: float

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)

    @staticmethod
    def from_array(a) -> "Point3":
        return Point3(float(a[0]), float(a[1]), float(a[2]))


def _orthonormality_error(rotation: np.ndarray) -> float:
    return float(np.max(np.abs(rotation.T @ rotation - np.eye(3))))


def _polar_correct(rotation: np.ndarray) -> np.ndarray:
    # Nearest rotation in Frobenius norm: R = U diag(1,1,det(UV^T)) V^T.
    u, _, vt = np.linalg.svd(rotation)
    d = np.sign(np.linalg.det(u @ vt))
    return u @ np.diag([1.0, 1.0, d]) @ vt


@dataclass(frozen=True)
class Pose:
    """Rigid transform: 3x3 rotation plus translation in meters."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not (np.isfinite(rotation).all() and np.isfinite(translation).all()):
            raise ConfigError("pose contains non-finite values")
        err = _orthonormality_error(rotation)
        if err > _DRIFT_TOL:
            if err > _REJECT_TOL:
                raise ConfigError(f"rotation is not orthonormal (error {err:.3e})")
            rotation = _polar_correct(rotation)
        if np.linalg.det(rotation) < 0:
            raise ConfigError("rotation has determinant -1 (reflection)")
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", translation)

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(3), np.zeros(3))

    def compose(self, other: "Pose") -> "Pose":
        """Pose applying ``other`` first, then ``self``."""
        return Pose(self.rotation @ other.rotation,
                    self.rotation @ other.translation + self.translation)

    def inverse(self) -> "Pose":
        rt = self.rotation.T
        return Pose(rt, -rt @ self.translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform an (..., 3) array of points into the parent frame."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def apply_point(self, p: Point3) -> Point3:
        return Point3.from_array(self.apply(p.to_array()))

    def to_flat(self) -> list[float]:
        """Row-major 9-element rotation followed by the 3-element translation."""
        return [float(v) for v in self.rotation.reshape(-1)] + \
               [float(v) for v in self.translation]

    @staticmethod
    def from_flat(values) -> "Pose":
        vals = list(values)
        if len(vals) != 12:
            raise ConfigError(f"pose needs 12 values (9 rotation + 3 translation), got {len(vals)}")
        arr = np.asarray(vals, dtype=np.float64)
        return Pose(arr[:9].reshape(3, 3), arr[9:])

    def to_json(self) -> str:
        return json.dumps({"rotation": self.to_flat()[:9],
                           "translation": self.to_flat()[9:]})

    @staticmethod
    def from_json(text: str) -> "Pose":
        doc = json.loads(text)
        return Pose.from_flat(list(doc["rotation"]) + list(doc["translation"]))

    def allclose(self, other: "Pose", atol: float = 1e-9) -> bool:
        return bool(np.allclose(self.rotation, other.rotation, atol=atol) and
                    np.allclose(self.translation, other.translation, atol=atol))


def compose(a: Pose, b: Pose) -> Pose:
    return a.compose(b)


def invert(p: Pose) -> Pose:
    return p.inverse()


def calibrate_relative(marker: Pose, viewer: Pose) -> Pose:
    """Pose of the capture camera in the viewer's neutral frame.

    ``marker`` is the pose of the virtual camera box the operator placed over
    the physical camera; ``viewer`` is the operator's pose at that moment.
    Position and rotation are both pulled back through the viewer pose.
    """
    r_inv = viewer.rotation.T
    position = r_inv @ (marker.translation - viewer.translation)
    rotation = r_inv @ marker.rotation
    return Pose(rotation, position)


def camera_world_pose(viewer_now: Pose, camera_in_viewer: Pose) -> Pose:
    """Current world pose of the capture camera given the viewer's pose."""
    translation = viewer_now.rotation @ camera_in_viewer.translation + viewer_now.translation
    rotation = viewer_now.rotation @ camera_in_viewer.rotation
    return Pose(rotation, translation)


def transform_point(camera_world: Pose, p: Point3) -> Point3:
    """Map a camera-frame point into viewer-world coordinates."""
    return camera_world.apply_point(p)


@dataclass
class CalibrationState:
    """Tracks the camera/viewer alignment driven by operator messages.

    ``camera_world`` is recomputed only when a calibration message arrives
    (re-placing the marker), not continuously.
    """

    viewer_pose: Pose = field(default_factory=Pose.identity)
    camera_in_viewer: Pose | None = None
    camera_world: Pose | None = None
    confirmed: bool = False

    def set_marker(self, marker: Pose) -> None:
        """Recalibrate from a newly placed camera marker pose."""
        self.camera_in_viewer = calibrate_relative(marker, self.viewer_pose)
        self.camera_world = camera_world_pose(self.viewer_pose, self.camera_in_viewer)

    def confirm(self) -> None:
        if self.camera_world is None:
            # Confirming without placing the marker accepts the identity pose.
            self.set_marker(Pose.identity())
        self.confirmed = True
