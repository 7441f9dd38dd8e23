"""Engine interface shared by every inpainting backend.

The final composite step here is the privacy guarantee: whatever an engine
hallucinates, output pixels outside the mask are copied bit-exactly from the
input, and engine output inside the mask never includes source content
(engines only ever see the redacted frame).
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, EngineNumericError, InputError
from ..masks import BinaryMask
from .memory import InpaintMemory


@dataclass(frozen=True)
class EngineResult:
    rgb: np.ndarray            # (H, W, 3) uint8, same dims as input
    memory: InpaintMemory
    inference_ms: float


class InpaintEngine(ABC):
    """Fills masked regions of a redacted frame; carries two-slot memory.

    An engine instance serves one session at a time; weights are immutable
    once constructed.
    """

    @property
    @abstractmethod
    def width(self) -> int: ...

    @property
    @abstractmethod
    def height(self) -> int: ...

    @abstractmethod
    def zero_memory(self) -> InpaintMemory:
        """Cold-start memory: two zero slots of this engine's feature shape."""

    @abstractmethod
    def _fill(self, rgb: np.ndarray, mask: BinaryMask,
              memory: InpaintMemory) -> tuple[np.ndarray, object, float]:
        """Produce (filled uint8 rgb, new memory slot, inference ms)."""

    def inpaint(self, rgb: np.ndarray, mask: BinaryMask,
                memory: InpaintMemory | None = None) -> EngineResult:
        """Fill the masked region of a redacted frame.

        ``rgb`` must already be redacted (zero inside the mask) and match the
        engine's fixed resolution.  The memory FIFO advances exactly once per
        call, also for empty masks, so slots stay warm on quiet frames.
        """
        if rgb.shape != (self.height, self.width, 3):
            raise ConfigError(
                f"frame is {rgb.shape[1]}x{rgb.shape[0]}, engine expects "
                f"{self.width}x{self.height}")
        if mask.bits.shape != rgb.shape[:2]:
            raise ConfigError("mask dimensions do not match engine resolution")
        if rgb.dtype != np.uint8:
            raise InputError("engine input must be an 8-bit rgb raster")
        if memory is None:
            memory = self.zero_memory()

        if mask.is_empty():
            filled, slot, inference_ms = self._fill(rgb, mask, memory)
            return EngineResult(rgb=rgb, memory=memory.push(slot),
                                inference_ms=inference_ms)

        x, y, w, h = mask.tight_bbox()
        sub = mask.bits[y:y + h, x:x + w]
        if rgb[y:y + h, x:x + w][sub].any():
            raise InputError("input is not redacted: nonzero pixels inside mask")

        filled, slot, inference_ms = self._fill(rgb, mask, memory)

        if filled.dtype != np.uint8:
            if not np.isfinite(filled).all():
                raise EngineNumericError("engine produced non-finite values")
            filled = np.clip(np.round(filled), 0, 255).astype(np.uint8)
        out = rgb.copy()
        out[y:y + h, x:x + w][sub] = filled[y:y + h, x:x + w][sub]
        return EngineResult(rgb=out, memory=memory.push(slot), inference_ms=inference_ms)
