"""Optical flow read off the propagation weights.

For every cell ``i`` of frame t+1, the flow is the expected displacement
``sum_j s_ij (loc(i) - loc(j))`` over the cells ``j`` of frame t, using the
same row-normalized weights as label propagation. Units are grid cells;
multiply by the stride for pixels.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .similarity import LOCAL, FeatureGrid, SpatialParams, cell_coords, similarity_rows

__all__ = ["DisplacementField", "displacement_field", "write_flow_text", "read_flow_text",
           "flow_to_color"]


@dataclass
class DisplacementField:
    """Per-cell ``(dx, dy)`` in cell units plus a validity mask.

    ``valid`` is False for cells within ``4 * sigma`` of the grid border,
    where the spatial prior is cut off asymmetrically.
    """

    vectors: np.ndarray  # (h, w, 2) as (dx, dy)
    valid: np.ndarray    # (h, w) bool
    stride: int = 8

    @property
    def shape(self):
        return self.vectors.shape[:2]

    def in_pixels(self) -> np.ndarray:
        return self.vectors * self.stride


def displacement_field(features_t: FeatureGrid, features_t1: FeatureGrid,
                       p: SpatialParams | None = None, use_spatial: bool = True) -> DisplacementField:
    """Similarity-weighted expected displacement from frame t to frame t+1."""
    p = p or SpatialParams()
    if features_t.shape != features_t1.shape:
        raise ValueError(f"grid shapes differ: {features_t.shape} vs {features_t1.shape}")
    sigma = p.sigma_cells("local", features_t.stride) if use_spatial else float("inf")
    weights = similarity_rows(features_t1, [(features_t, LOCAL if use_spatial else sigma)], p)
    h, w = features_t.shape
    coords = cell_coords(h, w)  # (y, x)
    expected_src = weights @ coords
    disp = coords - expected_src  # loc(i) - E[loc(j)]
    vectors = disp[:, ::-1].reshape(h, w, 2)

    margin = int(np.ceil(4 * sigma)) if np.isfinite(sigma) else 0
    valid = np.zeros((h, w), dtype=bool)
    if 2 * margin < h and 2 * margin < w:
        valid[margin:h - margin, margin:w - margin] = True
    return DisplacementField(vectors, valid, features_t.stride)


def write_flow_text(path, flow: DisplacementField) -> None:
    """Header ``h w`` then one ``dx dy`` line per cell, row-major."""
    h, w = flow.shape
    lines = [f"{h} {w}"]
    lines += [f"{dx!r} {dy!r}" for dx, dy in flow.vectors.reshape(-1, 2).tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_flow_text(path) -> np.ndarray:
    lines = Path(path).read_text().split("\n")
    h, w = (int(v) for v in lines[0].split())
    vals = np.array([[float(v) for v in ln.split()] for ln in lines[1:1 + h * w]])
    return vals.reshape(h, w, 2)


def flow_to_color(vectors: np.ndarray, max_magnitude: float | None = None) -> np.ndarray:
    """Color-wheel rendering: hue from direction, saturation from magnitude."""
    dx, dy = vectors[..., 0], vectors[..., 1]
    mag = np.hypot(dx, dy)
    scale = max_magnitude or (mag.max() if mag.max() > 0 else 1.0)
    hue = (np.arctan2(-dy, -dx) / np.pi + 1.0) / 2.0
    sat = np.clip(mag / scale, 0.0, 1.0)
    # HSV -> RGB with value fixed at 1
    i = np.floor(hue * 6.0).astype(int) % 6
    f = hue * 6.0 - np.floor(hue * 6.0)
    p_ = 1.0 - sat
    q = 1.0 - sat * f
    t = 1.0 - sat * (1.0 - f)
    one = np.ones_like(sat)
    r = np.choose(i, [one, q, p_, p_, t, one])
    g = np.choose(i, [t, one, one, q, p_, p_])
    b = np.choose(i, [p_, p_, t, one, one, q])
    return (np.stack([r, g, b], axis=-1) * 255.0 + 0.5).astype(np.uint8)
