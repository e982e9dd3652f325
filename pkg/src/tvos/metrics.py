"""Region (J), boundary (F) and global (G) segmentation measures.

J is the intersection-over-union of an object's masks. F is the harmonic
mean of boundary precision and recall, where a boundary pixel counts as
matched if a boundary pixel of the other mask lies within
``ceil(tolerance_frac * image_diagonal)`` pixels. G averages the two.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .io import list_frames, read_pgm

__all__ = [
    "region_j",
    "boundary_pixels",
    "boundary_f",
    "EvalReport",
    "evaluate_masks",
    "evaluate_sequence",
    "per_frame_series",
]


def _binary_pair(pred, gt, object_id):
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"mask shapes differ: {pred.shape} vs {gt.shape}")
    return pred == object_id, gt == object_id


def region_j(pred, gt, object_id: int = 1) -> float:
    """IoU of one object; 1.0 if absent from both masks."""
    p, g = _binary_pair(pred, gt, object_id)
    union = np.count_nonzero(p | g)
    if union == 0:
        return 1.0
    return np.count_nonzero(p & g) / union


def boundary_pixels(mask) -> np.ndarray:
    """Foreground pixels with a 4-neighbour outside the mask (image edge counts)."""
    mask = np.asarray(mask, dtype=bool)
    padded = np.pad(mask, 1, constant_values=False)
    interior = (padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:])
    return mask & ~interior


def tolerance_radius(shape, tolerance_frac: float) -> int:
    return int(math.ceil(tolerance_frac * math.hypot(*shape)))


def _matched_fraction(src: np.ndarray, dst: np.ndarray, radius: int) -> float:
    # share of src pixels within `radius` of some dst pixel
    dist = ndimage.distance_transform_edt(~dst)
    return np.count_nonzero(src & (dist <= radius)) / np.count_nonzero(src)


def boundary_f(pred, gt, object_id: int = 1, tolerance_frac: float = 0.008) -> float:
    """Boundary F-measure of one object; 1.0 if absent from both masks."""
    p, g = _binary_pair(pred, gt, object_id)
    bp, bg = boundary_pixels(p), boundary_pixels(g)
    n_p, n_g = np.count_nonzero(bp), np.count_nonzero(bg)
    if n_p == 0 and n_g == 0:
        return 1.0
    if n_p == 0 or n_g == 0:
        return 0.0
    if not math.isfinite(tolerance_frac):
        return 1.0
    r = tolerance_radius(p.shape, tolerance_frac)
    precision = _matched_fraction(bp, bg, r)
    recall = _matched_fraction(bg, bp, r)
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass
class EvalReport:
    """Per-object means, per-frame IoU series, and aggregate J/F/G."""

    object_ids: list[int]
    per_object: dict[int, tuple[float, float]]
    per_frame: list[list[float]]
    frame_indices: list[int]
    J_mean: float
    F_mean: float
    G_mean: float
    per_frame_f: list[list[float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "J_mean": self.J_mean,
            "F_mean": self.F_mean,
            "G_mean": self.G_mean,
            "per_object": {str(k): {"J": j, "F": f} for k, (j, f) in self.per_object.items()},
            "per_frame": [{"frame": t, "J": dict(zip(map(str, self.object_ids), row))}
                          for t, row in zip(self.frame_indices, self.per_frame)],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def evaluate_masks(preds, gts, skip_first: bool = True, tolerance_frac: float = 0.008,
                   object_ids=None) -> EvalReport:
    """Evaluate aligned lists of predicted and ground-truth masks."""
    preds = [np.asarray(m) for m in preds]
    gts = [np.asarray(m) for m in gts]
    if len(preds) != len(gts):
        raise ValueError(f"{len(preds)} predicted frames vs {len(gts)} ground-truth frames")
    if not gts:
        raise ValueError("no frames to evaluate")
    gt_ids = sorted(set(np.unique(np.concatenate([g.ravel() for g in gts]))) - {0})
    pred_ids = set(np.unique(np.concatenate([p.ravel() for p in preds]))) - {0}
    if object_ids is None:
        object_ids = gt_ids
    object_ids = [int(i) for i in object_ids]
    extra = sorted(int(i) for i in pred_ids - set(object_ids))
    if extra:
        raise ValueError(f"predictions contain object ids {extra} absent from the ground truth")
    frames = list(range(1 if skip_first and len(gts) > 1 else 0, len(gts)))
    if skip_first and len(gts) == 1:
        frames = []
    j_rows, f_rows = [], []
    for t in frames:
        j_rows.append([region_j(preds[t], gts[t], k) for k in object_ids])
        f_rows.append([boundary_f(preds[t], gts[t], k, tolerance_frac) for k in object_ids])
    per_object = {}
    for col, k in enumerate(object_ids):
        if frames:
            per_object[k] = (float(np.mean([r[col] for r in j_rows])),
                             float(np.mean([r[col] for r in f_rows])))
        else:
            per_object[k] = (1.0, 1.0)
    if per_object:
        j_mean = float(np.mean([v[0] for v in per_object.values()]))
        f_mean = float(np.mean([v[1] for v in per_object.values()]))
    else:
        j_mean = f_mean = 1.0
    return EvalReport(object_ids, per_object, j_rows, frames, j_mean, f_mean,
                      (j_mean + f_mean) / 2.0, f_rows)


def evaluate_sequence(pred_dir, gt_dir, skip_first: bool = True,
                      tolerance_frac: float = 0.008) -> EvalReport:
    """Evaluate two directories of identically named PGM masks."""
    gt_files = list_frames(gt_dir, ".pgm")
    pred_dir = Path(pred_dir)
    missing = [f.name for f in gt_files if not (pred_dir / f.name).exists()]
    if missing:
        raise FileNotFoundError(f"{pred_dir}: missing predicted frames {missing[:5]}"
                                + (" ..." if len(missing) > 5 else ""))
    gts = [read_pgm(f) for f in gt_files]
    preds = [read_pgm(pred_dir / f.name) for f in gt_files]
    return evaluate_masks(preds, gts, skip_first, tolerance_frac)


def per_frame_series(report: EvalReport) -> str:
    """Plain-text IoU table: one row per evaluated frame, one column per object."""
    lines = ["frame" + "".join(f" obj{k}" for k in report.object_ids)]
    if not report.object_ids:
        return lines[0] + "\n"
    for t, row in zip(report.frame_indices, report.per_frame):
        lines.append(f"{t}" + "".join(f" {v!r}" for v in row))
    return "\n".join(lines) + "\n"
