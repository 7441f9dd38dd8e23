"""Masked-weighted L1 reconstruction loss."""

from __future__ import annotations

import numpy as np
import torch

from ..errors import InputError


def weighted_l1(pred, truth, mask, w_mask: float = 10.0, w_valid: float = 1.0):
    """Per-pixel L1, weighted toward the masked region:

        w_mask * mean(|pred - truth| inside mask)
      + w_valid * mean(|pred - truth| outside mask)

    An empty mask (or empty complement) contributes 0 to its term.  Torch
    inputs keep the autograd graph; numpy inputs return a plain float.
    """
    if not w_mask > w_valid > 0:
        raise InputError("need w_mask > w_valid > 0")
    was_numpy = isinstance(pred, np.ndarray)
    if was_numpy:
        pred = torch.from_numpy(np.ascontiguousarray(pred, dtype=np.float64))
        truth = torch.from_numpy(np.ascontiguousarray(truth, dtype=np.float64))
    if isinstance(mask, np.ndarray):
        mask_t = torch.from_numpy(np.ascontiguousarray(mask))
    else:
        mask_t = mask
    mask_t = mask_t.bool()
    if pred.shape != truth.shape:
        raise InputError("pred and truth shapes differ")
    mask_b = torch.broadcast_to(mask_t, pred.shape)

    diff = (pred - truth).abs()
    loss = pred.new_zeros(())
    if bool(mask_b.any()):
        loss = loss + w_mask * diff[mask_b].mean()
    if not bool(mask_b.all()):
        loss = loss + w_valid * diff[~mask_b].mean()
    return float(loss) if was_numpy else loss
