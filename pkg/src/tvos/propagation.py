"""Online label propagation through a cached history of embeddings.

For each incoming frame the tracker embeds it once, gathers the reference
frames named by the sampling schedule from the history bank, and sets every
target cell's label to the similarity-weighted average of the reference
cells' labels. Frame 0 keeps its annotation; every later bank entry holds a
prediction. Nothing after the current frame is ever read.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_label_field, check_mask, pad_to_multiple
from .labels import harden, init_from_annotation, to_mask
from .sampling import ReferenceSet, SamplingStrategy, parse_strategy, select_references
from .similarity import FeatureGrid, SpatialParams, log_affinity_block, similarity_rows

__all__ = [
    "PropagationConfig",
    "HistoryBank",
    "ProviderError",
    "propagate_frame",
    "frame_energy",
    "SequenceTracker",
    "run_sequence",
    "TransductiveSegmenter",
]

DEFAULT_CAPACITY = 41


class ProviderError(RuntimeError):
    """An embedding provider failed on a specific frame."""

    def __init__(self, index: int, cause: BaseException):
        super().__init__(f"embedding provider failed on frame {index}: {cause}")
        self.index = index


@dataclass(frozen=True)
class PropagationConfig:
    """Schedule, affinity parameters and grid stride for a tracking run."""

    strategy: SamplingStrategy = field(default_factory=SamplingStrategy)
    spatial: SpatialParams = field(default_factory=SpatialParams)
    stride: int = 8
    harden_history: bool = False
    capacity: int | None = None

    def __post_init__(self):
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.capacity is not None and self.capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {self.capacity}")

    @property
    def bank_capacity(self) -> int:
        # large enough for the farthest reference the schedule can ask for
        need = self.strategy.max_offset + 1
        return max(self.capacity or DEFAULT_CAPACITY, need)


class HistoryBank:
    """Bounded, index-ordered cache of ``(features, label field)`` per frame.

    Holds at most ``capacity`` entries besides the pinned frame 0, which is
    never evicted. Adding an index twice is an error: each frame's features
    are computed and stored exactly once.
    """

    def __init__(self, capacity: int = DEFAULT_CAPACITY):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.pinned: tuple[FeatureGrid, np.ndarray] | None = None
        self._entries: OrderedDict[int, tuple[FeatureGrid, np.ndarray]] = OrderedDict()

    def add(self, index: int, features: FeatureGrid, labels: np.ndarray) -> None:
        if index in self or (self._entries and index <= next(reversed(self._entries))):
            raise ValueError(f"frame {index} already cached or out of order")
        labels = np.asarray(labels, dtype=np.float64)
        labels.setflags(write=False)
        if index == 0:
            self.pinned = (features, labels)
            return
        self._entries[index] = (features, labels)
        while len(self._entries) > self.capacity:
            self._entries.popitem(last=False)

    def __contains__(self, index: int) -> bool:
        return (index == 0 and self.pinned is not None) or index in self._entries

    def get(self, index: int) -> tuple[FeatureGrid, np.ndarray]:
        if index == 0 and self.pinned is not None:
            return self.pinned
        try:
            return self._entries[index]
        except KeyError:
            raise KeyError(f"frame {index} is not in the history bank") from None

    def indices(self) -> list[int]:
        head = [0] if self.pinned is not None else []
        return head + list(self._entries)

    def __len__(self):
        return len(self._entries) + (self.pinned is not None)


def _gather(bank: HistoryBank, refs: ReferenceSet, target: FeatureGrid):
    missing = [i for i in refs.indices if i not in bank]
    if missing:
        raise KeyError(f"history bank lacks reference frames {missing}")
    grids, labels = [], []
    for idx, cls in refs:
        g, lab = bank.get(idx)
        if g.shape != target.shape or g.channels != target.channels:
            raise ValueError(f"frame {idx} grid {g.shape}x{g.channels} does not match target "
                             f"{target.shape}x{target.channels}")
        grids.append((g, cls))
        labels.append(lab.reshape(-1, lab.shape[-1]))
    return grids, np.concatenate(labels)


def propagate_frame(bank: HistoryBank, t: int, target_features: FeatureGrid,
                    cfg: PropagationConfig) -> np.ndarray:
    """Soft labels for frame ``t`` from its sampled references in ``bank``."""
    refs = select_references(t, cfg.strategy)
    grids, labels = _gather(bank, refs, target_features)
    weights = similarity_rows(target_features, grids, cfg.spatial)
    h, w = target_features.shape
    return (weights @ labels).reshape(h, w, labels.shape[1])


def frame_energy(bank: HistoryBank, t: int, target_features: FeatureGrid, field,
                 cfg: PropagationConfig) -> float:
    """Bipartite smoothness energy between frame ``t``'s cells and its references.

    ``sum_i sum_j w_ij || y_i / sqrt(d_i) - y_j / sqrt(d_j) ||^2`` where
    ``d_i`` sums the affinities of target cell ``i`` and ``d_j`` those of
    reference cell ``j``. Affinities are rescaled by a global constant,
    which leaves the energy unchanged.
    """
    field = check_label_field(field)
    target = target_features
    if field.shape[:2] != target.shape:
        raise ValueError(f"field grid {field.shape[:2]} does not match features {target.shape}")
    refs = select_references(t, cfg.strategy)
    grids, labels = _gather(bank, refs, target)
    p = cfg.spatial
    logits = np.concatenate([log_affinity_block(target, g, p.sigma_cells(c, g.stride),
                                                p.temperature, p.window_radius)
                             for g, c in grids], axis=1)
    top = np.max(logits)
    if not np.isfinite(top):
        return 0.0
    w = np.exp(logits - top)
    d_t = w.sum(axis=1)
    d_r = w.sum(axis=0)
    yt = field.reshape(-1, field.shape[-1])
    zt = np.divide(yt, np.sqrt(d_t)[:, None], out=np.zeros_like(yt), where=d_t[:, None] > 0)
    zr = np.divide(labels, np.sqrt(d_r)[:, None], out=np.zeros_like(labels),
                   where=d_r[:, None] > 0)
    pair = ((zt * zt).sum(1)[:, None] + (zr * zr).sum(1)[None, :] - 2.0 * zt @ zr.T)
    return float((w * np.maximum(pair, 0.0)).sum())


class SequenceTracker:
    """Stateful online tracker for one video sequence.

    ``start`` consumes frame 0 and its annotation; each ``step`` consumes the
    next frame and returns its predicted mask. ``provider.embed`` is called
    exactly once per frame.
    """

    def __init__(self, provider, cfg: PropagationConfig | None = None):
        self.provider = provider
        self.cfg = cfg or PropagationConfig()
        self.bank = HistoryBank(self.cfg.bank_capacity)
        self.t = -1
        self.fields: list[np.ndarray] = []
        self._grid_shape = None

    def _embed(self, frame, index: int) -> FeatureGrid:
        try:
            grid = self.provider.embed(frame, self.cfg.stride)
        except Exception as exc:
            raise ProviderError(index, exc) from exc
        if self._grid_shape is not None and grid.shape != self._grid_shape:
            raise ValueError(f"frame {index} embeds to grid {grid.shape}, expected {self._grid_shape}")
        return grid

    def start(self, frame, first_mask, n_classes: int | None = None) -> np.ndarray:
        first_mask = check_mask(first_mask, name="first_mask")
        self.out_shape = first_mask.shape
        padded = pad_to_multiple(first_mask, self.cfg.stride)
        self._grid_shape = None
        field0 = init_from_annotation(padded, self.cfg.stride, n_classes)
        self.n_classes = field0.shape[2]
        grid = self._embed(frame, 0)
        if grid.shape != field0.shape[:2]:
            raise ValueError(f"frame 0 embeds to grid {grid.shape} but the mask gives {field0.shape[:2]}")
        self._grid_shape = grid.shape
        self.bank.add(0, grid, field0)
        self.t = 0
        self.fields = [field0]
        return first_mask.copy()

    def step(self, frame) -> np.ndarray:
        if self.t < 0:
            raise RuntimeError("call start() with the annotated first frame before step()")
        t = self.t + 1
        grid = self._embed(frame, t)
        field = propagate_frame(self.bank, t, grid, self.cfg)
        stored = harden(field) if self.cfg.harden_history else field
        self.bank.add(t, grid, stored)
        self.t = t
        self.fields.append(field)
        return self.mask_of(field)

    def mask_of(self, field) -> np.ndarray:
        h, w = field.shape[:2]
        s = self.cfg.stride
        full = to_mask(field, h * s, w * s)
        return full[:self.out_shape[0], :self.out_shape[1]]


def run_sequence(frames: Iterable, first_mask, cfg: PropagationConfig | None = None,
                 provider=None, n_classes: int | None = None) -> list[np.ndarray]:
    """Track a whole sequence; returns one integer mask per frame.

    ``frames`` is any ordered iterable of whatever ``provider.embed``
    accepts (images for the handcrafted provider, indices for precomputed
    embeddings). The first output echoes ``first_mask``.
    """
    if provider is None:
        from .embedding import HandcraftedEmbedder
        provider = HandcraftedEmbedder()
    tracker = SequenceTracker(provider, cfg)
    masks = []
    for t, frame in enumerate(frames):
        masks.append(tracker.start(frame, first_mask, n_classes) if t == 0 else tracker.step(frame))
    if not masks:
        raise ValueError("run_sequence needs at least one frame")
    return masks


class TransductiveSegmenter(BaseEstimator):
    """Semi-supervised video object segmenter (estimator interface).

    ``fit(frames, first_mask)`` tracks the sequence; results land in
    ``masks_`` and ``fields_``. Defaults are the sparse-dense schedule with
    the two-scale motion prior.

    Parameters
    ----------
    strategy : str or SamplingStrategy, default="sparse-dense+motion"
    sigma_local, sigma_distant : float, default=8, 21
    sigma_units : {"cells", "pixels"}, default="cells"
    temperature : float, default=0.1
    stride : int, default=8
    window_radius : int or None, default=None
    harden_history : bool, default=False
    embedder : provider or None
        Defaults to the handcrafted features at ``stride``.
    """

    def __init__(self, strategy="sparse-dense+motion", sigma_local=8.0, sigma_distant=21.0,
                 sigma_units="cells", temperature=0.1, stride=8, window_radius=None,
                 harden_history=False, embedder=None):
        self.strategy = strategy
        self.sigma_local = sigma_local
        self.sigma_distant = sigma_distant
        self.sigma_units = sigma_units
        self.temperature = temperature
        self.stride = stride
        self.window_radius = window_radius
        self.harden_history = harden_history
        self.embedder = embedder

    def _config(self) -> PropagationConfig:
        strategy = (self.strategy if isinstance(self.strategy, SamplingStrategy)
                    else parse_strategy(self.strategy))
        spatial = SpatialParams(self.sigma_local, self.sigma_distant, self.temperature,
                                self.window_radius, self.sigma_units)
        return PropagationConfig(strategy, spatial, self.stride, self.harden_history)

    def _provider(self):
        if self.embedder is not None:
            return self.embedder
        from .embedding import HandcraftedEmbedder
        return HandcraftedEmbedder(self.stride)

    def fit(self, X: Sequence, y, n_classes: int | None = None):
        """Track frames ``X`` from the frame-0 annotation ``y``."""
        tracker = SequenceTracker(self._provider(), self._config())
        masks = []
        for t, frame in enumerate(X):
            masks.append(tracker.start(frame, y, n_classes) if t == 0 else tracker.step(frame))
        if not masks:
            raise ValueError("need at least one frame")
        self.masks_ = masks
        self.fields_ = tracker.fields
        self.n_classes_ = tracker.n_classes
        return self

    def predict(self, X=None, y=None):
        """Masks for every frame; refits when given new frames."""
        if X is not None:
            self.fit(X, y)
        check_is_fitted(self, "masks_")
        return np.stack(self.masks_)

    def fit_predict(self, X, y):
        return self.fit(X, y).predict()
