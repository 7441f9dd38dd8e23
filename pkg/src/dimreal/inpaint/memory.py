"""Two-slot FIFO feature memory carried across inpainted frames."""

from __future__ import annotations

from ..errors import ConfigError

SLOT_COUNT = 2


class InpaintMemory:
    """Exactly two feature tensors in FIFO order, oldest first.

    Before warm-up the missing slots are zero tensors; ``pushes`` counts how
    many real frames have been folded in.  Slots may be numpy arrays or torch
    tensors — whatever the owning engine produces — as long as every slot
    keeps the same shape.
    """

    __slots__ = ("slots", "pushes")

    def __init__(self, slots, pushes: int = 0):
        slots = tuple(slots)
        if len(slots) != SLOT_COUNT:
            raise ConfigError(f"memory must hold exactly {SLOT_COUNT} slots, got {len(slots)}")
        shape = tuple(slots[0].shape)
        for s in slots[1:]:
            if tuple(s.shape) != shape:
                raise ConfigError("memory slots must share one shape")
        self.slots = slots
        self.pushes = pushes

    @classmethod
    def from_zero_slot(cls, zero_slot) -> "InpaintMemory":
        return cls((zero_slot, zero_slot), pushes=0)

    @property
    def slot_shape(self) -> tuple[int, ...]:
        return tuple(self.slots[0].shape)

    def push(self, slot) -> "InpaintMemory":
        """Evict the oldest slot and append the new one."""
        if tuple(slot.shape) != self.slot_shape:
            raise ConfigError(
                f"slot shape {tuple(slot.shape)} does not match memory {self.slot_shape}")
        return InpaintMemory((self.slots[1], slot), pushes=self.pushes + 1)

    @property
    def warm(self) -> bool:
        return self.pushes > 0


def memory_push(memory: InpaintMemory, slot) -> InpaintMemory:
    return memory.push(slot)
