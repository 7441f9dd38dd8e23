"""Static-shape decoupled spatial/temporal transformer inpainter.

Design constraints carried over from the deployment-oriented variant of this
architecture family:

* fixed input resolution — every shape is a config-time constant,
* exactly two memory slots (token features of the two previous frames),
* a fixed alternating sequence of spatial and temporal blocks instead of
  dynamically interleaved layers,
* token-to-raster reconstruction via a reduction (transposed) convolution
  with overlap-sum semantics and a final crop, instead of a fold op.

Spatial blocks attend within the current frame's token grid; temporal blocks
attend across {current tokens} ∪ {memory slots} inside fixed contiguous
row-band groups of the token grid.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from ..errors import ConfigError, EngineNumericError
from ..masks import BinaryMask
from .base import InpaintEngine
from .memory import InpaintMemory
from .weights import load_weights, save_weights


@dataclass(frozen=True)
class DsttConfig:
    width: int = 640
    height: int = 360
    patch: int = 8
    channels: int = 64
    kernel: int = 10            # reconstruction kernel; > patch means overlap
    heads: int = 4
    temporal_groups: int = 3
    blocks: tuple[str, ...] = ("S", "T", "S", "T")

    def __post_init__(self):
        if self.width % self.patch or self.height % self.patch:
            raise ConfigError("width and height must be divisible by patch size")
        if self.channels % self.heads:
            raise ConfigError("channels must be divisible by head count")
        if self.kernel < self.patch:
            raise ConfigError("reconstruction kernel must be >= patch size")
        if self.token_rows % self.temporal_groups:
            raise ConfigError("token rows must split evenly into temporal groups")
        if not self.blocks or any(b not in ("S", "T") for b in self.blocks):
            raise ConfigError("block sequence must be a nonempty mix of 'S'/'T'")

    @property
    def token_rows(self) -> int:
        return self.height // self.patch

    @property
    def token_cols(self) -> int:
        return self.width // self.patch

    @property
    def tokens(self) -> int:
        return self.token_rows * self.token_cols

    @classmethod
    def small(cls) -> "DsttConfig":
        """Desk-scale config used by the test suite and the fps-gated bench."""
        return cls(width=64, height=36, patch=4, channels=32, kernel=6,
                   heads=2, temporal_groups=3, blocks=("S", "T", "S", "T"))

    def to_dict(self) -> dict:
        return {"width": self.width, "height": self.height, "patch": self.patch,
                "channels": self.channels, "kernel": self.kernel, "heads": self.heads,
                "temporal_groups": self.temporal_groups, "blocks": list(self.blocks)}

    @classmethod
    def from_dict(cls, doc: dict) -> "DsttConfig":
        doc = dict(doc)
        if "blocks" in doc:
            doc["blocks"] = tuple(doc["blocks"])
        return cls(**doc)


def scaled_dot_product(q: torch.Tensor, k: torch.Tensor, v: torch.Tensor
                       ) -> tuple[torch.Tensor, torch.Tensor]:
    """Attention with scale 1/sqrt(head_dim); returns (values, weights).

    Weights are returned (softmax computed explicitly) so the row-sum
    invariant is checkable on the exact path inference uses.
    """
    scale = 1.0 / math.sqrt(q.shape[-1])
    scores = torch.matmul(q, k.transpose(-2, -1)) * scale
    weights = torch.softmax(scores, dim=-1)
    return torch.matmul(weights, v), weights


class MultiHeadAttention(nn.Module):
    def __init__(self, channels: int, heads: int):
        super().__init__()
        self.heads = heads
        self.q_proj = nn.Linear(channels, channels)
        self.k_proj = nn.Linear(channels, channels)
        self.v_proj = nn.Linear(channels, channels)
        self.out_proj = nn.Linear(channels, channels)

    def forward(self, q_tokens: torch.Tensor, kv_tokens: torch.Tensor) -> torch.Tensor:
        b, tq, c = q_tokens.shape
        tk = kv_tokens.shape[1]
        dh = c // self.heads
        q = self.q_proj(q_tokens).view(b, tq, self.heads, dh).transpose(1, 2)
        k = self.k_proj(kv_tokens).view(b, tk, self.heads, dh).transpose(1, 2)
        v = self.v_proj(kv_tokens).view(b, tk, self.heads, dh).transpose(1, 2)
        att, _ = scaled_dot_product(q, k, v)
        att = att.transpose(1, 2).reshape(b, tq, c)
        return self.out_proj(att)


class _FeedForward(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(channels, channels * 2),
            nn.GELU(),
            nn.Linear(channels * 2, channels),
        )

    def forward(self, x):
        return self.net(x)


class SpatialBlock(nn.Module):
    """Pre-norm transformer block attending within the frame's token grid."""

    def __init__(self, config: DsttConfig):
        super().__init__()
        self.norm1 = nn.LayerNorm(config.channels)
        self.attn = MultiHeadAttention(config.channels, config.heads)
        self.norm2 = nn.LayerNorm(config.channels)
        self.ffn = _FeedForward(config.channels)

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        y = self.norm1(tokens)
        tokens = tokens + self.attn(y, y)
        tokens = tokens + self.ffn(self.norm2(tokens))
        return tokens


class TemporalBlock(nn.Module):
    """Attends across current tokens and both memory slots, per row band."""

    def __init__(self, config: DsttConfig):
        super().__init__()
        self.rows = config.token_rows
        self.cols = config.token_cols
        self.groups = config.temporal_groups
        self.norm1 = nn.LayerNorm(config.channels)
        self.attn = MultiHeadAttention(config.channels, config.heads)
        self.norm2 = nn.LayerNorm(config.channels)
        self.ffn = _FeedForward(config.channels)

    def _band(self, tokens: torch.Tensor) -> torch.Tensor:
        # (B, T, C) -> (B*groups, T/groups, C), contiguous row bands.
        b, _, c = tokens.shape
        band_rows = self.rows // self.groups
        return tokens.view(b, self.groups, band_rows * self.cols, c) \
                     .reshape(b * self.groups, band_rows * self.cols, c)

    def _unband(self, banded: torch.Tensor, batch: int) -> torch.Tensor:
        bg, tg, c = banded.shape
        return banded.view(batch, self.groups * tg, c)

    def forward(self, tokens: torch.Tensor,
                memory: tuple[torch.Tensor, torch.Tensor]) -> torch.Tensor:
        b = tokens.shape[0]
        for slot in memory:
            if tuple(slot.shape[-2:]) != tuple(tokens.shape[-2:]):
                raise ConfigError(
                    f"memory slot shape {tuple(slot.shape)} does not match tokens "
                    f"{tuple(tokens.shape[-2:])}")
        y = self.norm1(tokens)
        q = self._band(y)
        kv_parts = [q]
        for slot in memory:
            slot_b = slot if slot.dim() == 3 else slot.unsqueeze(0).expand(b, -1, -1)
            kv_parts.append(self._band(self.norm1(slot_b)))
        kv = torch.cat(kv_parts, dim=1)
        att = self._unband(self.attn(q, kv), b)
        tokens = tokens + att
        tokens = tokens + self.ffn(self.norm2(tokens))
        return tokens


class Vec2Patch(nn.Module):
    """Token sequence back to a raster: reduction convolution plus crop.

    Each token contributes a kernel x kernel patch placed at its grid cell's
    stride offset; overlapping contributions sum (transposed convolution with
    stride = patch), then the raster is cropped to exactly height x width.
    """

    def __init__(self, config: DsttConfig, out_channels: int):
        super().__init__()
        self.config = config
        self.deconv = nn.ConvTranspose2d(config.channels, out_channels,
                                         kernel_size=config.kernel, stride=config.patch)
        self.offset = (config.kernel - config.patch) // 2

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        cfg = self.config
        if tokens.shape[1] != cfg.tokens:
            raise ConfigError(f"expected {cfg.tokens} tokens, got {tokens.shape[1]}")
        grid = tokens.transpose(1, 2).reshape(
            tokens.shape[0], cfg.channels, cfg.token_rows, cfg.token_cols)
        full = self.deconv(grid)
        o = self.offset
        return full[:, :, o:o + cfg.height, o:o + cfg.width]


class DsttModel(nn.Module):
    """patch embed -> fixed alternating S/T blocks -> vec2patch -> rgb decode.

    The new memory slot is the token tensor after the block stack (before
    reconstruction), matching what temporal attention consumes.
    """

    def __init__(self, config: DsttConfig):
        super().__init__()
        self.config = config
        self.embed = nn.Conv2d(4, config.channels, kernel_size=config.patch,
                               stride=config.patch)
        self.blocks = nn.ModuleList(
            SpatialBlock(config) if kind == "S" else TemporalBlock(config)
            for kind in config.blocks)
        self.vec2patch = Vec2Patch(config, config.channels)
        self.decode = nn.Sequential(
            nn.Conv2d(config.channels, config.channels, 3, padding=1),
            nn.LeakyReLU(0.2),
            nn.Conv2d(config.channels, 3, 3, padding=1),
        )

    def patch_embed(self, rgb: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        """(B, 3, H, W) + (B, 1, H, W) -> (B, T, C) token sequence."""
        cfg = self.config
        if rgb.shape[-2:] != (cfg.height, cfg.width):
            raise ConfigError(
                f"input is {rgb.shape[-1]}x{rgb.shape[-2]}, model is fixed at "
                f"{cfg.width}x{cfg.height}")
        x = torch.cat([rgb, mask], dim=1)
        return self.embed(x).flatten(2).transpose(1, 2)

    def forward(self, rgb: torch.Tensor, mask: torch.Tensor,
                memory: tuple[torch.Tensor, torch.Tensor]
                ) -> tuple[torch.Tensor, torch.Tensor]:
        tokens = self.patch_embed(rgb, mask)
        for block in self.blocks:
            if isinstance(block, TemporalBlock):
                tokens = block(tokens, memory)
            else:
                tokens = block(tokens)
        new_slot = tokens
        raster = self.vec2patch(tokens)
        out = (torch.tanh(self.decode(raster)) + 1.0) * 0.5
        return out, new_slot


def _seed_parameters(model: nn.Module, seed: int) -> None:
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for name, p in model.named_parameters():
            if p.dim() >= 2:
                fan_in = int(np.prod(p.shape[1:]))
                p.copy_(torch.randn(p.shape, generator=gen) * math.sqrt(2.0 / fan_in))
            elif name.endswith("weight"):
                p.fill_(1.0)   # layer norms
            else:
                p.zero_()


class DsttEngine(InpaintEngine):
    """Engine wrapper running the transformer on CPU tensors.

    Ships with seeded random weights; ``fit_toy`` can nudge them on short
    simulator sequences.  Acceptance rests on structural invariants, not
    perceptual quality.
    """

    def __init__(self, config: DsttConfig | None = None, seed: int = 0,
                 weights_path=None):
        self.config = config or DsttConfig()
        self.model = DsttModel(self.config)
        _seed_parameters(self.model, seed)
        if weights_path is not None:
            self.load_weights(weights_path)
        self.model.eval()

    @property
    def width(self) -> int:
        return self.config.width

    @property
    def height(self) -> int:
        return self.config.height

    def zero_memory(self) -> InpaintMemory:
        zero = torch.zeros(self.config.tokens, self.config.channels)
        return InpaintMemory.from_zero_slot(zero)

    def _fill(self, rgb: np.ndarray, mask: BinaryMask, memory: InpaintMemory):
        rgb01 = torch.from_numpy(np.array(rgb, copy=True)).float().div_(255.0) \
            .permute(2, 0, 1).unsqueeze(0)
        mask01 = torch.from_numpy(mask.bits.astype(np.float32))[None, None]
        slots = tuple(s.unsqueeze(0) for s in memory.slots)
        t0 = time.perf_counter()
        with torch.no_grad():
            out01, new_slot = self.model(rgb01, mask01, slots)
        inference_ms = (time.perf_counter() - t0) * 1e3
        if not bool(torch.isfinite(out01).all()):
            raise EngineNumericError("model produced non-finite output")
        filled = out01.squeeze(0).permute(1, 2, 0).mul(255.0).round() \
            .clamp(0, 255).to(torch.uint8).numpy()
        return filled, new_slot.squeeze(0).detach(), inference_ms

    def save_weights(self, path) -> None:
        save_weights([p.detach().numpy() for p in self.model.state_dict().values()], path)

    def load_weights(self, path) -> None:
        arrays = load_weights(path)
        state = self.model.state_dict()
        if len(arrays) != len(state):
            raise ConfigError(
                f"weights file has {len(arrays)} tensors, model needs {len(state)}")
        for (name, current), arr in zip(state.items(), arrays):
            if tuple(arr.shape) != tuple(current.shape):
                raise ConfigError(f"tensor {name}: file shape {arr.shape} != "
                                  f"model shape {tuple(current.shape)}")
            state[name] = torch.from_numpy(arr.copy())
        self.model.load_state_dict(state)


def fit_toy(engine: DsttEngine, sequence, epochs: int = 10, lr: float = 1e-3,
            w_mask: float = 10.0, w_valid: float = 1.0) -> list[float]:
    """Tiny gradient-descent fitting on one simulator sequence.

    ``sequence`` yields (redacted_rgb uint8, BinaryMask, target_rgb uint8)
    triples.  Returns the per-epoch loss history.  This exists to exercise
    the training path end to end, not to reach perceptual quality.
    """
    from .loss import weighted_l1

    model = engine.model
    model.train()
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    history: list[float] = []
    items = [
        (torch.from_numpy(np.ascontiguousarray(r)).float().div(255).permute(2, 0, 1)[None],
         torch.from_numpy(m.bits.astype(np.float32))[None, None],
         torch.from_numpy(np.ascontiguousarray(t)).float().div(255).permute(2, 0, 1)[None],
         m)
        for r, m, t in sequence
    ]
    for _ in range(epochs):
        opt.zero_grad()
        memory = tuple(s.unsqueeze(0) for s in engine.zero_memory().slots)
        total = 0.0
        for rgb01, mask01, target01, mask in items:
            out01, slot = model(rgb01, mask01, memory)
            loss = weighted_l1(out01, target01, torch.from_numpy(mask.bits)[None, None],
                               w_mask=w_mask, w_valid=w_valid)
            loss.backward()
            total += float(loss.detach())
            memory = (memory[1], slot.detach())
        opt.step()
        history.append(total / len(items))
    model.eval()
    return history
