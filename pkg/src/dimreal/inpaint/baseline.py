"""Classical real-time fill: multiscale push-pull diffusion.

Pull: build a pyramid of validity-weighted 2x2 box averages.  Push: walk back
down, replacing invalid pixels with the coarser level's estimate.  A final
clamp to the mask's boundary-ring value range keeps the fill inside the range
a true diffusion would produce, even when coarse averages mixed in far-away
content.
"""

from __future__ import annotations

import time

import numpy as np
from scipy import ndimage

from ..masks import BinaryMask
from .base import InpaintEngine
from .memory import InpaintMemory

_RING_ELEMENT = np.ones((3, 3), dtype=bool)


def _block2(a: np.ndarray) -> np.ndarray:
    """Sum over 2x2 blocks; odd dimensions are zero-padded first."""
    h, w = a.shape[:2]
    if h % 2 or w % 2:
        pad = [(0, h % 2), (0, w % 2)] + [(0, 0)] * (a.ndim - 2)
        a = np.pad(a, pad)
    return a[0::2, 0::2] + a[1::2, 0::2] + a[0::2, 1::2] + a[1::2, 1::2]


def _upsample2(a: np.ndarray, h: int, w: int) -> np.ndarray:
    return np.repeat(np.repeat(a, 2, axis=0), 2, axis=1)[:h, :w]


def pull_push_fill(rgb: np.ndarray, valid: np.ndarray,
                   fallback: float | np.ndarray = 128.0) -> np.ndarray:
    """Fill pixels where ``valid`` is 0 by push-pull diffusion.

    ``rgb`` is float32 (H, W, 3); ``valid`` is float32 (H, W) in [0, 1].
    ``fallback`` fills frames with no valid pixels at all.
    """
    colors = [rgb]
    weights = [valid]
    while colors[-1].shape[0] > 1 or colors[-1].shape[1] > 1:
        c, w = colors[-1], weights[-1]
        sum_cw = _block2(c * w[..., None])
        sum_w = _block2(w)
        with np.errstate(invalid="ignore"):
            c2 = np.where(sum_w[..., None] > 0, sum_cw / np.maximum(sum_w, 1e-12)[..., None], 0.0)
        colors.append(c2.astype(np.float32))
        weights.append((sum_w / 4.0).astype(np.float32))

    coarse = colors[-1]
    coarse = np.where(weights[-1][..., None] > 0, coarse,
                      np.broadcast_to(np.asarray(fallback, dtype=np.float32), coarse.shape))
    for level in range(len(colors) - 2, -1, -1):
        c, w = colors[level], weights[level]
        up = _upsample2(coarse, c.shape[0], c.shape[1])
        alpha = np.clip(w, 0.0, 1.0)[..., None]
        coarse = alpha * c + (1.0 - alpha) * up
    return coarse


def _clamp_to_boundary_ring(filled: np.ndarray, rgb: np.ndarray,
                            mask_bits: np.ndarray) -> np.ndarray:
    """Clamp filled pixels to the per-channel range of the mask's boundary ring."""
    ring = ndimage.binary_dilation(mask_bits, structure=_RING_ELEMENT) & ~mask_bits
    if not ring.any():
        return filled
    ring_vals = rgb[ring]
    lo = ring_vals.min(axis=0).astype(np.float32)
    hi = ring_vals.max(axis=0).astype(np.float32)
    filled[mask_bits] = np.clip(filled[mask_bits], lo, hi)
    return filled


class BaselineEngine(InpaintEngine):
    """Push-pull diffusion engine; memory holds the previous output frame,
    whose per-channel mean seeds the fill when the whole frame is masked.
    """

    def __init__(self, width: int = 640, height: int = 360):
        self._width = width
        self._height = height

    @property
    def width(self) -> int:
        return self._width

    @property
    def height(self) -> int:
        return self._height

    def zero_memory(self) -> InpaintMemory:
        zero = np.zeros((self._height, self._width, 3), dtype=np.uint8)
        return InpaintMemory.from_zero_slot(zero)

    def _fill(self, rgb: np.ndarray, mask: BinaryMask, memory: InpaintMemory):
        t0 = time.perf_counter()
        if mask.is_empty():
            filled_u8 = rgb
        else:
            # The fill only depends on content near the hole; running the
            # pyramid on a padded crop around the mask keeps frame time flat.
            x, y, w, h = mask.tight_bbox()
            pad = 32
            sx0, sy0 = max(0, x - pad), max(0, y - pad)
            sx1 = min(self._width, x + w + pad)
            sy1 = min(self._height, y + h + pad)
            sub_rgb = rgb[sy0:sy1, sx0:sx1]
            sub_bits = mask.bits[sy0:sy1, sx0:sx1]
            if bool(sub_bits.all()):
                # No valid pixels anywhere: seed from the previous frame.
                fallback = memory.slots[-1].reshape(-1, 3).mean(axis=0) \
                    .astype(np.float32) if memory.warm else 128.0
            else:
                fallback = 128.0  # unreachable: the 1x1 pyramid root has weight
            filled = pull_push_fill(sub_rgb.astype(np.float32),
                                    (~sub_bits).astype(np.float32), fallback)
            filled = _clamp_to_boundary_ring(filled, sub_rgb, sub_bits)
            filled_u8 = rgb.copy()
            filled_u8[mask.bits] = \
                np.clip(np.round(filled), 0, 255).astype(np.uint8)[sub_bits]
        inference_ms = (time.perf_counter() - t0) * 1e3
        return filled_u8, filled_u8, inference_ms
