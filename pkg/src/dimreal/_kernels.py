"""Numba kernels for the per-frame hot paths (2x upscale, point-cloud pack).

Kept separate so the algorithmic modules stay plain numpy; everything here
has a straightforward scalar definition that the tests check independently.
"""

from __future__ import annotations

import numba
import numpy as np


@numba.njit(parallel=True, cache=True)
def _upscale2x_u8(a: np.ndarray, out: np.ndarray) -> None:
    """Bilinear 2x with half-pixel centers and round-half-up.

    out[2y+ky, 2x+kx] = (9*a[y,x] + 3*a[y2,x] + 3*a[y,x2] + a[y2,x2] + 8) >> 4
    where (y2, x2) are the clamped neighbors toward the sample point.
    """
    h, w, c = a.shape
    # Plain if-statements: conditional expressions on the parallel index
    # break numba's parfor typing.
    for y in numba.prange(h):
        yu = y - 1
        if yu < 0:
            yu = 0
        yd = y + 1
        if yd >= h:
            yd = h - 1
        for x in range(w):
            xl = x - 1
            if xl < 0:
                xl = 0
            xr = x + 1
            if xr >= w:
                xr = w - 1
            for ch in range(c):
                cc = np.int32(a[y, x, ch]) * 9
                nu = np.int32(a[yu, x, ch]) * 3
                nd = np.int32(a[yd, x, ch]) * 3
                nl = np.int32(a[y, xl, ch]) * 3
                nr = np.int32(a[y, xr, ch]) * 3
                out[2 * y, 2 * x, ch] = (cc + nu + nl + a[yu, xl, ch] + 8) >> 4
                out[2 * y, 2 * x + 1, ch] = (cc + nu + nr + a[yu, xr, ch] + 8) >> 4
                out[2 * y + 1, 2 * x, ch] = (cc + nd + nl + a[yd, xl, ch] + 8) >> 4
                out[2 * y + 1, 2 * x + 1, ch] = (cc + nd + nr + a[yd, xr, ch] + 8) >> 4


@numba.njit(parallel=True, cache=True)
def _pack_pointcloud(depth: np.ndarray, rgb: np.ndarray, inv_fx: float,
                     inv_fy: float, cx: float, cy: float,
                     offsets: np.ndarray, xyz: np.ndarray, colors: np.ndarray) -> None:
    """Back-project valid-depth pixels row by row into preallocated arrays.

    ``offsets[y]`` is the output index of row y's first valid pixel
    (exclusive prefix sum of per-row valid counts).
    """
    h, w = depth.shape
    for y in numba.prange(h):
        idx = offsets[y]
        for x in range(w):
            d = depth[y, x]
            if d > 0.0:
                xyz[idx, 0] = (x - cx) * inv_fx * d
                xyz[idx, 1] = (y - cy) * inv_fy * d
                xyz[idx, 2] = d
                colors[idx, 0] = rgb[y, x, 0]
                colors[idx, 1] = rgb[y, x, 1]
                colors[idx, 2] = rgb[y, x, 2]
                idx += 1


def upscale2x_u8(raster: np.ndarray) -> np.ndarray:
    squeeze = raster.ndim == 2
    a = raster[..., None] if squeeze else raster
    a = np.ascontiguousarray(a)
    out = np.empty((2 * a.shape[0], 2 * a.shape[1], a.shape[2]), dtype=np.uint8)
    _upscale2x_u8(a, out)
    return out[..., 0] if squeeze else out


def pack_pointcloud(depth: np.ndarray, rgb: np.ndarray, fx: float, fy: float,
                    cx: float, cy: float) -> tuple[np.ndarray, np.ndarray]:
    depth = np.ascontiguousarray(depth, dtype=np.float32)
    rgb = np.ascontiguousarray(rgb)
    row_counts = np.count_nonzero(depth > 0, axis=1)
    offsets = np.zeros(depth.shape[0], dtype=np.int64)
    np.cumsum(row_counts[:-1], out=offsets[1:])
    total = int(offsets[-1] + row_counts[-1]) if depth.shape[0] else 0
    xyz = np.empty((total, 3), dtype=np.float32)
    colors = np.empty((total, 3), dtype=np.uint8)
    _pack_pointcloud(depth, rgb, 1.0 / fx, 1.0 / fy, cx, cy, offsets, xyz, colors)
    return xyz, colors
