"""Binary redaction masks: construction, merging, frame redaction, and the
randomized rectangle/stroke mask generator used for training-style evaluation.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import cv2
import numpy as np
from scipy import ndimage

from .errors import ConfigError, DegenerateMaskError, InputError

# 3x3 cross structuring element: predictable diamond growth under dilation.
_CROSS = ndimage.generate_binary_structure(2, 1)


class BinaryMask:
    """Per-pixel boolean redaction region.

    Treated as immutable once constructed; the tight bounding box is computed
    lazily and cached.
    """

    __slots__ = ("bits", "_bbox")

    def __init__(self, bits: np.ndarray):
        bits = np.asarray(bits)
        if bits.dtype != np.bool_:
            bits = bits.astype(bool)
        if bits.ndim != 2:
            raise InputError("mask must be a 2-D raster")
        self.bits = bits
        self._bbox: tuple[int, int, int, int] | None = None

    @classmethod
    def empty(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.zeros((height, width), dtype=bool))

    @classmethod
    def full(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.ones((height, width), dtype=bool))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def area(self) -> int:
        return int(np.count_nonzero(self.bits))

    def area_fraction(self) -> float:
        return self.area() / self.bits.size

    def is_empty(self) -> bool:
        return not self.bits.any()

    def union(self, other: "BinaryMask") -> "BinaryMask":
        if other.bits.shape != self.bits.shape:
            raise InputError("mask dimensions differ")
        return BinaryMask(self.bits | other.bits)

    def intersection(self, other: "BinaryMask") -> "BinaryMask":
        if other.bits.shape != self.bits.shape:
            raise InputError("mask dimensions differ")
        return BinaryMask(self.bits & other.bits)

    def iou(self, other: "BinaryMask") -> float:
        inter = np.count_nonzero(self.bits & other.bits)
        if inter == 0:
            return 0.0
        union = np.count_nonzero(self.bits | other.bits)
        return inter / union

    def tight_bbox(self) -> tuple[int, int, int, int]:
        """Tight bounding rectangle (x, y, w, h) of the true pixels."""
        if self._bbox is None:
            rows = self.bits.any(axis=1)
            cols = self.bits.any(axis=0)
            ys = np.flatnonzero(rows)
            if ys.size == 0:
                raise InputError("empty mask has no bounding box")
            xs = np.flatnonzero(cols)
            self._bbox = (int(xs[0]), int(ys[0]),
                          int(xs[-1] - xs[0] + 1), int(ys[-1] - ys[0] + 1))
        return self._bbox

    def shifted(self, dx: int, dy: int) -> "BinaryMask":
        """Translate with zero fill (pixels shifted off the frame are lost)."""
        out = np.zeros_like(self.bits)
        h, w = self.bits.shape
        src_x = slice(max(0, -dx), min(w, w - dx))
        src_y = slice(max(0, -dy), min(h, h - dy))
        dst_x = slice(max(0, dx), min(w, w + dx))
        dst_y = slice(max(0, dy), min(h, h + dy))
        out[dst_y, dst_x] = self.bits[src_y, src_x]
        return BinaryMask(out)

    def upscale_nearest(self, factor: int = 2) -> "BinaryMask":
        return BinaryMask(np.repeat(np.repeat(self.bits, factor, axis=0), factor, axis=1))

    def to_png_bytes(self) -> bytes:
        ok, buf = cv2.imencode(".png", self.bits.astype(np.uint8) * 255)
        if not ok:
            raise RuntimeError("PNG encoding failed")
        return buf.tobytes()

    @classmethod
    def from_png_bytes(cls, data: bytes) -> "BinaryMask":
        raster = cv2.imdecode(np.frombuffer(data, dtype=np.uint8), cv2.IMREAD_GRAYSCALE)
        if raster is None:
            raise InputError("not a decodable PNG")
        return cls(raster >= 128)

    def __eq__(self, other) -> bool:
        return isinstance(other, BinaryMask) and \
            self.bits.shape == other.bits.shape and bool(np.array_equal(self.bits, other.bits))

    def __repr__(self) -> str:
        return f"BinaryMask({self.width}x{self.height}, area={self.area()})"


def merge_private_masks(tracks, width: int, height: int) -> BinaryMask:
    """Union of the masks of all tracks currently in the Private state."""
    from .detection import PrivacyState

    merged = np.zeros((height, width), dtype=bool)
    for track in tracks:
        if track.state is not PrivacyState.PRIVATE:
            continue
        bits = track.latest.mask.bits
        if bits.shape != merged.shape:
            raise InputError(
                f"track {track.id} mask is {bits.shape[1]}x{bits.shape[0]}, "
                f"frame is {width}x{height}")
        merged |= bits
    return BinaryMask(merged)


def redact(frame, mask: BinaryMask):
    """Zero the rgb pixels inside the mask; depth is deliberately untouched."""
    if mask.bits.shape != frame.rgb.shape[:2]:
        raise InputError("mask dimensions do not match frame")
    rgb = frame.rgb.copy()
    if not mask.is_empty():
        x, y, w, h = mask.tight_bbox()
        rgb[y:y + h, x:x + w][mask.bits[y:y + h, x:x + w]] = 0
    rgb.flags.writeable = False
    return dataclasses.replace(frame, rgb=rgb)


@dataclass(frozen=True)
class MaskGenSpec:
    """Randomized evaluation masks: rectangles or multi-stroke scribbles,
    area-adjusted to cover between ``area_min`` and ``area_max`` of the frame.
    """

    width: int
    height: int
    kind: str = "rectangle"              # rectangle | strokes
    stability: str = "stable"            # stable | per-frame
    area_min: float = 0.05
    area_max: float = 0.30
    stroke_count: tuple[int, int] = (1, 5)
    stroke_thickness: tuple[int, int] = (5, 20)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("rectangle", "strokes"):
            raise ConfigError(f"unknown mask kind {self.kind!r}")
        if self.stability not in ("stable", "per-frame"):
            raise ConfigError(f"unknown mask stability {self.stability!r}")
        if not (0.0 < self.area_min < self.area_max < 1.0):
            raise ConfigError("need 0 < area_min < area_max < 1")


def adjust_mask_area(mask: BinaryMask, area_min: float, area_max: float) -> BinaryMask:
    """Dilate while below the lower bound, then erode while above the upper.

    Uses the 3x3 cross element; erosion treats off-frame pixels as empty, so
    a full-frame mask shrinks inward from the borders.
    """
    if mask.is_empty():
        raise DegenerateMaskError("cannot adjust an empty mask")
    total = mask.bits.size
    bits = mask.bits
    while np.count_nonzero(bits) / total < area_min:
        grown = ndimage.binary_dilation(bits, structure=_CROSS)
        if np.count_nonzero(grown) == np.count_nonzero(bits):
            break  # saturated the frame
        bits = grown
    while np.count_nonzero(bits) / total > area_max:
        bits = ndimage.binary_erosion(bits, structure=_CROSS)
        if not bits.any():
            raise DegenerateMaskError("mask eroded to empty before reaching bounds")
    return BinaryMask(bits)


def _gen_rectangle(rng: np.random.Generator, w: int, h: int,
                   area_min: float, area_max: float) -> np.ndarray:
    frac = rng.uniform(area_min, area_max)
    aspect = rng.uniform(0.5, 2.0)
    rw = int(np.clip(round(np.sqrt(frac * w * h * aspect)), 1, w))
    rh = int(np.clip(round(frac * w * h / rw), 1, h))
    x = int(rng.integers(0, w - rw + 1))
    y = int(rng.integers(0, h - rh + 1))
    bits = np.zeros((h, w), dtype=bool)
    bits[y:y + rh, x:x + rw] = True
    return bits


def _gen_strokes(rng: np.random.Generator, w: int, h: int,
                 count_range: tuple[int, int], thickness_range: tuple[int, int]) -> np.ndarray:
    canvas = np.zeros((h, w), dtype=np.uint8)
    n = int(rng.integers(count_range[0], count_range[1] + 1))
    for _ in range(n):
        npts = int(rng.integers(2, 5))
        pts = np.stack([rng.integers(0, w, size=npts),
                        rng.integers(0, h, size=npts)], axis=1).astype(np.int32)
        thickness = int(rng.integers(thickness_range[0], thickness_range[1] + 1))
        cv2.polylines(canvas, [pts], isClosed=False, color=255, thickness=thickness)
    return canvas > 0


def gen_mask(spec: MaskGenSpec, frame_index: int) -> BinaryMask:
    """Deterministic mask for (spec, frame_index).

    Stable specs ignore the frame index so one mask propagates across the
    whole sequence; per-frame specs reseed per index.
    """
    if spec.stability == "stable":
        rng = np.random.default_rng([spec.seed, 0xA5])
    else:
        rng = np.random.default_rng([spec.seed, 0xA5, frame_index])
    if spec.kind == "rectangle":
        bits = _gen_rectangle(rng, spec.width, spec.height, spec.area_min, spec.area_max)
    else:
        bits = _gen_strokes(rng, spec.width, spec.height,
                            spec.stroke_count, spec.stroke_thickness)
        if not bits.any():
            # Degenerate polyline draw (e.g. repeated points); fall back to a
            # seed-determined single pixel and let area adjustment grow it.
            bits[int(rng.integers(0, spec.height)), int(rng.integers(0, spec.width))] = True
    return adjust_mask_area(BinaryMask(bits), spec.area_min, spec.area_max)
