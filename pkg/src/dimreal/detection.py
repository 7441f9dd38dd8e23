"""Object detection and tracking.

The detector interface is pluggable; the default implementation reads
simulator ground truth and perturbs it with seeded dropout/jitter to emulate
the flicker of a learned segmenter.  3-D boxes are derived by averaging depth
readings inside the 2-D box, which knowingly biases the estimate toward the
viewer when an occluder overlaps the region (see estimate_region_depth).
"""

from __future__ import annotations

import enum
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NoDepthError
from .geometry import Point3
from .masks import BinaryMask
from .scene import CameraIntrinsics, FrameRGBD, GroundTruth

# Association tuning: brief detector dropout must not destroy a track, but a
# true departure should expire within ~0.75 s at 20 fps.
IOU_THRESHOLD = 0.3
TRACK_LOSS_FRAMES = 15

# 3-D box depth extent heuristic: the capture stream gives no information
# about how deep an object is, so assume a fraction of its smaller face.
MIN_BOX_DEPTH_M = 0.05
BOX_DEPTH_RATIO = 0.25


class PrivacyState(enum.Enum):
    PUBLIC = "public"
    PRIVATE = "private"


@dataclass(frozen=True)
class Detection2D:
    class_label: str
    mask: BinaryMask
    bbox2d: tuple[int, int, int, int]    # x, y, w, h — tight around the mask
    confidence: float

    @classmethod
    def from_mask(cls, class_label: str, mask: BinaryMask,
                  confidence: float = 1.0) -> "Detection2D":
        if mask.is_empty():
            raise InputError("detection mask must be non-empty")
        return cls(class_label=class_label, mask=mask,
                   bbox2d=mask.tight_bbox(), confidence=confidence)


@dataclass(frozen=True)
class DetectorNoise:
    dropout_prob: float = 0.0
    jitter_px: int = 0
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.dropout_prob <= 1.0):
            raise InputError("dropout_prob must be in [0, 1]")
        if self.jitter_px < 0:
            raise InputError("jitter_px must be >= 0")


@dataclass
class TrackedObject:
    id: int
    class_label: str
    latest: Detection2D
    bbox3d_center: Point3 | None = None
    bbox3d_size: np.ndarray | None = None
    state: PrivacyState = PrivacyState.PUBLIC
    missed_frames: int = 0


class Detector(ABC):
    """Detector interface so a learned segmenter can be plugged in later."""

    @abstractmethod
    def detect(self, frame: FrameRGBD, truth: GroundTruth) -> list[Detection2D]:
        ...


class GroundTruthDetector(Detector):
    """Reads simulator ground truth, with seeded dropout and pixel jitter."""

    def __init__(self, noise: DetectorNoise | None = None,
                 class_labels: dict[int, str] | None = None):
        self.noise = noise or DetectorNoise()
        self._class_labels = class_labels or {}

    def detect(self, frame: FrameRGBD, truth: GroundTruth) -> list[Detection2D]:
        detections: list[Detection2D] = []
        for obj_id in sorted(truth.object_masks):
            mask = truth.object_masks[obj_id]
            if mask.bits.shape != frame.rgb.shape[:2]:
                raise InputError("ground-truth mask dimensions do not match frame")
            if mask.is_empty():
                continue
            rng = np.random.default_rng([self.noise.seed, frame.frame_id, obj_id])
            if self.noise.dropout_prob > 0 and rng.random() < self.noise.dropout_prob:
                continue
            if self.noise.jitter_px > 0:
                j = self.noise.jitter_px
                dx, dy = (int(v) for v in rng.integers(-j, j + 1, size=2))
                mask = mask.shifted(dx, dy)
                if mask.is_empty():
                    continue
            label = self._class_labels.get(obj_id, f"object-{obj_id}")
            detections.append(Detection2D.from_mask(label, mask, confidence=1.0))
        return detections


def estimate_region_depth(depth: np.ndarray, bbox2d: tuple[int, int, int, int]) -> float:
    """Arithmetic mean of the valid (> 0) depth pixels inside the box.

    This reproduces the documented estimation bias: an occluder overlapping
    the 2-D box drags the mean toward the viewer.  The sum is exactly rounded
    (math.fsum) so the result is bit-reproducible against a direct oracle.
    """
    x, y, w, h = bbox2d
    if x < 0 or y < 0 or w <= 0 or h <= 0 or \
            y + h > depth.shape[0] or x + w > depth.shape[1]:
        raise InputError("bbox2d outside raster bounds")
    region = depth[y:y + h, x:x + w]
    valid = region[region > 0]
    if valid.size == 0:
        raise NoDepthError("no valid depth pixels in region")
    return math.fsum(valid.astype(np.float64).tolist()) / valid.size


def bbox3d_from_detection(det: Detection2D, depth: np.ndarray,
                          intrinsics: CameraIntrinsics) -> tuple[Point3, np.ndarray]:
    """Back-project a 2-D detection to a camera-frame 3-D box.

    Center: pinhole back-projection of the 2-D box center at the region's
    mean depth.  Size: box extent at that depth; the depth extent is a fixed
    heuristic since the capture stream carries no information about it.
    """
    x, y, w, h = det.bbox2d
    d = estimate_region_depth(depth, det.bbox2d)
    u = x + w / 2.0
    v = y + h / 2.0
    center = Point3((u - intrinsics.cx) * d / intrinsics.fx,
                    (v - intrinsics.cy) * d / intrinsics.fy,
                    d)
    sx = w * d / intrinsics.fx
    sy = h * d / intrinsics.fy
    sz = max(MIN_BOX_DEPTH_M, BOX_DEPTH_RATIO * min(sx, sy))
    return center, np.array([sx, sy, sz], dtype=np.float64)


@dataclass
class Tracker:
    """Greedy IoU tracker; owns track identity and privacy-state lifecycle.

    Exactly one execution context (the pipeline loop) mutates a Tracker.
    """

    iou_threshold: float = IOU_THRESHOLD
    loss_frames: int = TRACK_LOSS_FRAMES
    tracks: list[TrackedObject] = field(default_factory=list)
    _next_id: int = 1

    def associate(self, detections: list[Detection2D], frame_id: int) -> list[TrackedObject]:
        """Match detections to tracks by descending mask IoU (greedy).

        Matched tracks refresh and reset ``missed_frames``.  Unmatched tracks
        age and are dropped past the loss horizon — their privacy state is
        discarded with them, so a rediscovered object returns Public under a
        fresh id.  Ties break toward the lower track id, then detection index.
        """
        candidates = []
        for ti, track in enumerate(self.tracks):
            for di, det in enumerate(detections):
                iou = track.latest.mask.iou(det.mask)
                if iou >= self.iou_threshold:
                    candidates.append((iou, track.id, di, ti))
        candidates.sort(key=lambda c: (-c[0], c[1], c[2]))

        matched_tracks: set[int] = set()
        matched_dets: set[int] = set()
        for iou, _tid, di, ti in candidates:
            if ti in matched_tracks or di in matched_dets:
                continue
            matched_tracks.add(ti)
            matched_dets.add(di)
            track = self.tracks[ti]
            track.latest = detections[di]
            track.missed_frames = 0

        survivors: list[TrackedObject] = []
        for ti, track in enumerate(self.tracks):
            if ti not in matched_tracks:
                track.missed_frames += 1
                if track.missed_frames > self.loss_frames:
                    continue  # track lost; privacy state dies with it
            survivors.append(track)

        for di, det in enumerate(detections):
            if di in matched_dets:
                continue
            survivors.append(TrackedObject(id=self._next_id, class_label=det.class_label,
                                           latest=det, state=PrivacyState.PUBLIC))
            self._next_id += 1

        self.tracks = survivors
        return self.tracks
