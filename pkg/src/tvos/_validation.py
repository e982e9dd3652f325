"""Input validation shared by the estimators and the functional API."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array

SIMPLEX_ATOL = 1e-5


def check_affinity(w, *, name: str = "W") -> np.ndarray:
    """Validate a dense affinity matrix: square, finite, non-negative."""
    w = check_array(w, dtype=np.float64, ensure_2d=True, ensure_min_samples=1)
    if w.shape[0] != w.shape[1]:
        raise ValueError(f"{name} must be square, got shape {w.shape}")
    if np.any(w < 0):
        raise ValueError(f"{name} has negative entries; affinities must be >= 0")
    return w


def check_label_matrix(y, n: int, *, name: str = "y0") -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    if y.ndim != 2 or y.shape[0] != n:
        raise ValueError(f"{name} must have {n} rows, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise ValueError(f"{name} contains non-finite values")
    return y


def check_label_field(field, *, name: str = "field") -> np.ndarray:
    """Validate an (h, w, K+1) soft label field lying on the simplex."""
    field = np.asarray(field, dtype=np.float64)
    if field.ndim != 3 or field.shape[2] < 1:
        raise ValueError(f"{name} must be (h, w, n_classes), got shape {field.shape}")
    if np.any(field < -SIMPLEX_ATOL):
        raise ValueError(f"{name} has negative probabilities")
    sums = field.sum(axis=2)
    if np.any(np.abs(sums - 1.0) > SIMPLEX_ATOL):
        raise ValueError(f"{name} cells must sum to 1 (max deviation "
                         f"{np.max(np.abs(sums - 1.0)):.3g})")
    return field


def check_mask(mask, *, name: str = "mask") -> np.ndarray:
    mask = np.asarray(mask)
    if mask.ndim != 2 or mask.size == 0:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {mask.shape}")
    if not np.issubdtype(mask.dtype, np.integer):
        if not np.all(mask == np.round(mask)):
            raise ValueError(f"{name} must hold integer object ids")
        mask = mask.astype(np.int64)
    if mask.min() < 0:
        raise ValueError(f"{name} has negative object ids")
    return mask


def check_frame(frame, *, name: str = "frame") -> np.ndarray:
    """Validate an 8-bit RGB frame of shape (H, W, 3)."""
    frame = np.asarray(frame)
    if frame.ndim != 3 or frame.shape[2] != 3:
        raise ValueError(f"{name} must be (H, W, 3), got shape {frame.shape}")
    if frame.dtype != np.uint8:
        raise ValueError(f"{name} must be uint8, got {frame.dtype}")
    return frame


def pad_to_multiple(img: np.ndarray, stride: int) -> np.ndarray:
    """Replicate-edge pad the two leading axes up to multiples of ``stride``."""
    h, w = img.shape[:2]
    ph = (-h) % stride
    pw = (-w) % stride
    if ph == 0 and pw == 0:
        return img
    pad = [(0, ph), (0, pw)] + [(0, 0)] * (img.ndim - 2)
    return np.pad(img, pad, mode="edge")
