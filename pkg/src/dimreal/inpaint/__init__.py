from .base import EngineResult, InpaintEngine
from .baseline import BaselineEngine, pull_push_fill
from .dstt import DsttConfig, DsttEngine, DsttModel, scaled_dot_product
from .loss import weighted_l1
from .memory import InpaintMemory, memory_push
from .weights import load_weights, save_weights

__all__ = [
    "BaselineEngine",
    "DsttConfig",
    "DsttEngine",
    "DsttModel",
    "EngineResult",
    "InpaintEngine",
    "InpaintMemory",
    "load_weights",
    "memory_push",
    "pull_push_fill",
    "save_weights",
    "scaled_dot_product",
    "weighted_l1",
]
