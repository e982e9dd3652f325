"""Conversions between full-resolution integer masks and stride-grid label fields.

A label field is an ``(h, w, K+1)`` float array whose cells lie on the
probability simplex; channel 0 is background.
"""

from __future__ import annotations

import numpy as np

from ._validation import check_label_field, check_mask, pad_to_multiple

__all__ = ["init_from_annotation", "to_mask", "harden", "bilinear_resize"]


def init_from_annotation(mask, stride: int = 8, n_classes: int | None = None) -> np.ndarray:
    """One-hot label field from an annotation, one cell per stride block.

    The mask is replicate-padded to a stride multiple; each cell takes the
    majority class of its block, ties going to the lowest class id.
    """
    mask = check_mask(mask)
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    k1 = int(mask.max()) + 1 if n_classes is None else int(n_classes)
    if mask.max() >= k1:
        raise ValueError(f"mask holds id {mask.max()} but n_classes={k1}")
    padded = pad_to_multiple(mask, stride)
    h, w = padded.shape[0] // stride, padded.shape[1] // stride
    blocks = padded.reshape(h, stride, w, stride).transpose(0, 2, 1, 3).reshape(h, w, -1)
    counts = np.zeros((h, w, k1), dtype=np.int64)
    for c in range(k1):
        counts[..., c] = (blocks == c).sum(axis=2)
    winner = np.argmax(counts, axis=2)  # first max -> lowest id on ties
    return np.eye(k1)[winner]


def harden(field) -> np.ndarray:
    """Replace every cell by the one-hot of its arg-max (lowest id on ties)."""
    field = np.asarray(field, dtype=np.float64)
    return np.eye(field.shape[2])[np.argmax(field, axis=2)]


def _interp_axis(n_in: int, n_out: int):
    # half-pixel-centred sampling positions, clamped at the borders
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(np.int64)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    return lo, hi, frac


def bilinear_resize(planes: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinearly resample an (h, w, c) array to (out_h, out_w, c)."""
    h, w = planes.shape[:2]
    ylo, yhi, fy = _interp_axis(h, out_h)
    xlo, xhi, fx = _interp_axis(w, out_w)
    rows = planes[ylo] * (1.0 - fy)[:, None, None] + planes[yhi] * fy[:, None, None]
    return rows[:, xlo] * (1.0 - fx)[None, :, None] + rows[:, xhi] * fx[None, :, None]


def to_mask(field, out_h: int, out_w: int) -> np.ndarray:
    """Upsample each class plane bilinearly, then take the per-pixel arg-max."""
    field = check_label_field(field)
    h, w = field.shape[:2]
    if out_h < h or out_w < w:
        raise ValueError(f"output size {out_h}x{out_w} smaller than grid {h}x{w}")
    up = bilinear_resize(field, out_h, out_w)
    return np.argmax(up, axis=2).astype(np.int64)
