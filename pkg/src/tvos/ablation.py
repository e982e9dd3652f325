"""Tracking ablation over the six reference schedules."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .metrics import evaluate_masks
from .propagation import PropagationConfig, run_sequence
from .sampling import ablation_grid
from .similarity import SpatialParams

__all__ = ["run_ablation", "find_sequences", "format_ablation_table"]


def run_ablation(sequences, spatial: SpatialParams | None = None, stride: int = 8,
                 provider=None) -> dict[str, list[float]]:
    """Mean J per sequence for every schedule, in table column order.

    ``sequences`` is a list of ``(frames, masks)`` pairs; frame 0's mask is
    the annotation and the rest are ground truth.
    """
    spatial = spatial or SpatialParams()
    table = {name: [] for name, _ in ablation_grid()}
    for frames, masks in sequences:
        for name, strategy in ablation_grid():
            cfg = PropagationConfig(strategy, spatial, stride)
            pred = run_sequence(list(frames), masks[0], cfg, provider)
            table[name].append(evaluate_masks(pred, list(masks)).J_mean)
    return table


def find_sequences(corpus) -> list[Path]:
    """A corpus is one sequence directory (``frames/`` + ``gt/``) or a directory of them."""
    corpus = Path(corpus)
    if not corpus.is_dir():
        raise FileNotFoundError(f"{corpus}: corpus directory not found")
    if (corpus / "frames").is_dir():
        return [corpus]
    seqs = sorted(p for p in corpus.iterdir() if (p / "frames").is_dir() and (p / "gt").is_dir())
    if not seqs:
        raise FileNotFoundError(f"{corpus}: no sequence directories with frames/ and gt/")
    return seqs


def format_ablation_table(table: dict[str, list[float]], names=None) -> str:
    """Tab-separated table: header, one row per sequence, then the mean row."""
    cols = list(table)
    n = len(next(iter(table.values()), []))
    names = names or [str(i) for i in range(n)]
    lines = ["sequence\t" + "\t".join(cols)]
    for i in range(n):
        lines.append(names[i] + "\t" + "\t".join(f"{table[c][i]:.4f}" for c in cols))
    lines.append("mean\t" + "\t".join(f"{np.mean(table[c]):.4f}" for c in cols))
    return "\n".join(lines) + "\n"
