"""Appearance-times-locality affinities between feature grids.

A pair of cells ``i`` (target) and ``j`` (reference) has affinity

    w_ij = exp(f_i . f_j / temperature) * exp(-||loc(i) - loc(j)||^2 / sigma^2)

and online propagation uses the row-normalized weights
``s_ij = w_ij / sum_k w_ik`` over every cell of every reference frame.
Everything is computed in log space with per-row max subtraction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

__all__ = [
    "FeatureGrid",
    "SpatialParams",
    "LOCAL",
    "DISTANT",
    "pair_affinity",
    "cell_coords",
    "log_affinity_block",
    "similarity_rows",
    "truncated_equivalence_check",
]

LOCAL = "local"
DISTANT = "distant"

_NORM_EPS = 1e-12


def _unit_normalize(data: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(data, axis=-1, keepdims=True)
    out = np.divide(data, norms, out=np.zeros_like(data), where=norms > _NORM_EPS)
    # all-zero cells become e_1 so every cell stays on the unit sphere
    dead = norms[..., 0] <= _NORM_EPS
    if np.any(dead):
        out[dead] = 0.0
        out[dead, 0] = 1.0
    return out


class FeatureGrid:
    """Per-frame embedding field: ``data`` of shape (h, w, c), unit-norm cells.

    Vectors are unit-normalized on construction; pass ``normalize=False``
    only for data that is already normalized.
    """

    __slots__ = ("data", "stride")

    def __init__(self, data, stride: int = 8, normalize: bool = True):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 3 or min(data.shape) < 1:
            raise ValueError(f"feature grid must be (h, w, c), got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("feature grid contains non-finite values")
        if stride < 1:
            raise ValueError(f"stride must be >= 1, got {stride}")
        self.data = _unit_normalize(data) if normalize else data
        self.data.setflags(write=False)
        self.stride = int(stride)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[:2]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def flat(self) -> np.ndarray:
        return self.data.reshape(-1, self.data.shape[2])

    def __repr__(self):
        h, w, c = self.data.shape
        return f"FeatureGrid(h={h}, w={w}, c={c}, stride={self.stride})"


@dataclass(frozen=True)
class SpatialParams:
    """Locality and sharpness controls.

    ``sigma`` is used for references tagged local, ``sigma_distant`` for
    distant ones. ``sigma_units`` says whether both are measured in grid
    cells or image pixels (divided by the grid stride before use).
    """

    sigma: float = 8.0
    sigma_distant: float = 21.0
    temperature: float = 0.1
    window_radius: int | None = None
    sigma_units: str = "cells"

    def __post_init__(self):
        if not self.sigma > 0 or not self.sigma_distant > 0:
            raise ValueError(f"sigma values must be > 0, got {self.sigma}, {self.sigma_distant}")
        if not self.temperature > 0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")
        if self.window_radius is not None and self.window_radius < 0:
            raise ValueError(f"window_radius must be >= 0, got {self.window_radius}")
        if self.sigma_units not in ("cells", "pixels"):
            raise ValueError(f"sigma_units must be 'cells' or 'pixels', got {self.sigma_units!r}")

    def sigma_cells(self, sigma_class: Union[str, float], stride: int = 1) -> float:
        """Resolve a sigma class (or a literal sigma) to grid-cell units."""
        if sigma_class == LOCAL:
            sigma = self.sigma
        elif sigma_class == DISTANT:
            sigma = self.sigma_distant
        elif isinstance(sigma_class, (int, float)) and sigma_class > 0:
            sigma = float(sigma_class)
        else:
            raise ValueError(f"unknown sigma class {sigma_class!r}")
        if self.sigma_units == "pixels" and np.isfinite(sigma):
            sigma = sigma / stride
        return sigma


def pair_affinity(f_i, f_j, loc_i, loc_j, p: SpatialParams, sigma=None) -> float:
    """Affinity of one target/reference cell pair.

    ``loc_i`` and ``loc_j`` are ``(x, y)`` cell coordinates; ``sigma``
    defaults to ``p.sigma``.
    """
    f_i = np.asarray(f_i, dtype=np.float64)
    f_j = np.asarray(f_j, dtype=np.float64)
    if f_i.shape != f_j.shape or f_i.ndim != 1:
        raise ValueError(f"feature vectors must be 1-D of equal length, got {f_i.shape}, {f_j.shape}")
    sigma = p.sigma if sigma is None else sigma
    d2 = float((loc_i[0] - loc_j[0]) ** 2 + (loc_i[1] - loc_j[1]) ** 2)
    return float(np.exp(f_i @ f_j / p.temperature) * np.exp(-d2 / sigma ** 2))


def cell_coords(h: int, w: int) -> np.ndarray:
    """Row-major (y, x) coordinates of an h x w grid, shape (h*w, 2)."""
    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64),
                         indexing="ij")
    return np.stack([yy.ravel(), xx.ravel()], axis=1)


def _sq_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    dy = a[:, 0:1] - b[None, :, 0]
    dx = a[:, 1:2] - b[None, :, 1]
    return dy * dy + dx * dx


def log_affinity_block(targets: FeatureGrid, reference: FeatureGrid, sigma: float,
                       temperature: float, window_radius=None,
                       rows: slice = slice(None)) -> np.ndarray:
    """Log affinities of target cells ``rows`` against every reference cell.

    ``sigma=inf`` disables the spatial term. Pairs farther apart than
    ``window_radius`` cells get ``-inf``.
    """
    if targets.shape != reference.shape:
        raise ValueError(f"grid shapes differ: {targets.shape} vs {reference.shape}")
    if targets.channels != reference.channels:
        raise ValueError(f"channel counts differ: {targets.channels} vs {reference.channels}")
    ft = targets.flat()[rows]
    fr = reference.flat()
    logits = (ft @ fr.T) / temperature
    need_dist = np.isfinite(sigma) or window_radius is not None
    if need_dist:
        coords = cell_coords(*targets.shape)
        d2 = _sq_dist(coords[rows], coords)
        if np.isfinite(sigma):
            logits -= d2 / (sigma * sigma)
        if window_radius is not None:
            logits[d2 > float(window_radius) ** 2] = -np.inf
    return logits


def _resolve_references(references, p: SpatialParams):
    if len(references) == 0:
        raise ValueError("similarity needs at least one reference frame")
    out = []
    for item in references:
        if isinstance(item, FeatureGrid):
            grid, cls = item, LOCAL
        else:
            grid, cls = item
        out.append((grid, p.sigma_cells(cls, grid.stride)))
    return out


def similarity_rows(targets: FeatureGrid, references: Sequence, p: SpatialParams | None = None,
                    chunk: int = 2048) -> np.ndarray:
    """Row-stochastic weights from each target cell to all reference cells.

    Parameters
    ----------
    targets : FeatureGrid
    references : sequence of ``(FeatureGrid, sigma_class)``
        ``sigma_class`` is ``"local"``, ``"distant"`` or a literal sigma
        (``float('inf')`` drops the spatial term). Bare grids count as local.
    p : SpatialParams

    Returns
    -------
    ndarray of shape (h*w, n_refs*h*w)
        Reference cells are laid out frame by frame in the given order,
        each frame row-major.
    """
    p = p or SpatialParams()
    refs = _resolve_references(references, p)
    n_t = targets.shape[0] * targets.shape[1]
    n_r = sum(g.shape[0] * g.shape[1] for g, _ in refs)
    out = np.empty((n_t, n_r))
    for start in range(0, n_t, chunk):
        rows = slice(start, min(start + chunk, n_t))
        logits = np.concatenate(
            [log_affinity_block(targets, g, s, p.temperature, p.window_radius, rows)
             for g, s in refs], axis=1)
        row_max = logits.max(axis=1, keepdims=True)
        if not np.all(np.isfinite(row_max)):
            raise ValueError("a target cell has no reference within window_radius")
        e = np.exp(logits - row_max)
        out[rows] = e / e.sum(axis=1, keepdims=True)
    return out


def truncated_equivalence_check(targets: FeatureGrid, references: Sequence,
                                p: SpatialParams) -> float:
    """Max-abs gap between window-truncated and exact row weights."""
    if p.window_radius is None:
        raise ValueError("truncated_equivalence_check needs p.window_radius set")
    exact = similarity_rows(targets, references, SpatialParams(
        sigma=p.sigma, sigma_distant=p.sigma_distant, temperature=p.temperature,
        window_radius=None, sigma_units=p.sigma_units))
    truncated = similarity_rows(targets, references, p)
    return float(np.max(np.abs(truncated - exact)))
