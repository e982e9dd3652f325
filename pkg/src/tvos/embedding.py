"""Appearance embeddings: a handcrafted trunk, precomputed features, and a
trainable per-cell projection head.

The head is an affine map followed by unit normalization. It is trained by
predicting each target cell's label as a softmax-weighted vote of reference
cell labels (appearance only) and minimizing cross-entropy against the
ground truth; gradients are analytic.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_frame, pad_to_multiple
from .io import read_emb1
from .labels import init_from_annotation
from .sampling import TRAIN_STRATEGIES, select_references
from .similarity import FeatureGrid, SpatialParams, similarity_rows

__all__ = [
    "handcrafted_features",
    "HandcraftedEmbedder",
    "PrecomputedEmbedder",
    "load_embeddings",
    "predict_train",
    "training_loss",
    "head_gradient",
    "TrainConfig",
    "train_head",
    "ProjectionHead",
    "PROB_FLOOR",
]

logger = logging.getLogger(__name__)

PROB_FLOOR = 1e-12
_LUMA = np.array([0.299, 0.587, 0.114])


def handcrafted_features(frame, stride: int = 8) -> FeatureGrid:
    """Six per-cell statistics, unit-normalized.

    Channels, in order: mean R, mean G, mean B, mean |Sobel-x|, mean
    |Sobel-y| and the grayscale standard deviation within the cell. The frame
    is replicate-padded to a stride multiple first; Sobel uses replicate
    borders too.
    """
    frame = check_frame(frame)
    img = pad_to_multiple(frame, stride).astype(np.float64) / 255.0
    gray = img @ _LUMA
    sx = np.abs(ndimage.sobel(gray, axis=1, mode="nearest"))
    sy = np.abs(ndimage.sobel(gray, axis=0, mode="nearest"))
    H, W = gray.shape
    h, w = H // stride, W // stride

    def cells(a):
        return a.reshape(h, stride, w, stride).swapaxes(1, 2).reshape(h, w, stride * stride)

    rgb = img.reshape(h, stride, w, stride, 3).mean(axis=(1, 3))
    data = np.concatenate([
        rgb,
        cells(sx).mean(axis=2)[..., None],
        cells(sy).mean(axis=2)[..., None],
        cells(gray).std(axis=2)[..., None],
    ], axis=2)
    return FeatureGrid(data, stride=stride)


class HandcraftedEmbedder(BaseEstimator, TransformerMixin):
    """Stateless provider wrapping :func:`handcrafted_features`."""

    n_channels = 6
    deterministic = True

    def __init__(self, stride=8):
        self.stride = stride

    def embed(self, frame, stride: int | None = None) -> FeatureGrid:
        return handcrafted_features(frame, self.stride if stride is None else stride)

    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        """Frames (T, H, W, 3) to stacked feature arrays (T, h, w, 6)."""
        return np.stack([self.embed(f).data for f in X])


class PrecomputedEmbedder:
    """Provider serving externally computed grids; ``embed`` takes a frame index."""

    deterministic = True

    def __init__(self, grids: Sequence[FeatureGrid]):
        if len(grids) == 0:
            raise ValueError("no embeddings supplied")
        self.grids = list(grids)
        self.n_channels = self.grids[0].channels

    @classmethod
    def from_file(cls, path, stride: int = 8):
        return cls(load_embeddings(path, stride))

    def __len__(self):
        return len(self.grids)

    def embed(self, index, stride: int | None = None) -> FeatureGrid:
        grid = self.grids[int(index)]
        if stride is not None and stride != grid.stride:
            raise ValueError(f"embedding stride {grid.stride} != requested {stride}")
        return grid


def load_embeddings(path, stride: int = 8) -> list[FeatureGrid]:
    """Read an EMB1 file into unit-normalized feature grids."""
    arr = read_emb1(path)
    return [FeatureGrid(a, stride=stride) for a in arr]


def _as_rows(x) -> np.ndarray:
    if isinstance(x, FeatureGrid):
        return x.flat()
    x = np.asarray(x, dtype=np.float64)
    return x.reshape(-1, x.shape[-1])


def predict_train(target_features: FeatureGrid, references, temperature: float = 0.1) -> np.ndarray:
    """Appearance-only soft labels for every target cell.

    ``references`` is a sequence of ``(FeatureGrid, label_field)``. Returns an
    ``(h, w, K+1)`` field.
    """
    if len(references) == 0:
        raise ValueError("predict_train needs at least one reference")
    weights = similarity_rows(target_features, [(g, float("inf")) for g, _ in references],
                              SpatialParams(temperature=temperature))
    labels = np.concatenate([np.asarray(lab, dtype=np.float64).reshape(-1, np.shape(lab)[-1])
                             for _, lab in references])
    h, w = target_features.shape
    return (weights @ labels).reshape(h, w, -1)


def training_loss(pred, gt) -> float:
    """Summed cross-entropy ``-sum_i log pred_i[gt_i]`` with a 1e-12 floor."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(f"prediction {pred.shape} and ground truth {gt.shape} differ")
    k = pred.shape[-1]
    p = pred.reshape(-1, k)[np.arange(pred.size // k), np.argmax(gt.reshape(-1, k), axis=1)]
    return float(-np.log(np.maximum(p, PROB_FLOOR)).sum())


def _head_forward(x, weight, bias):
    z = x @ weight + bias
    norm = np.linalg.norm(z, axis=1, keepdims=True)
    if np.any(norm < 1e-12):
        raise FloatingPointError("projection collapsed a cell to the zero vector")
    return z / norm, norm


def head_gradient(base_targets, base_refs, ref_labels, gt, weight, bias,
                  temperature: float = 0.1) -> tuple[float, np.ndarray, np.ndarray]:
    """Loss and exact gradient w.r.t. the head's weight and bias.

    Parameters
    ----------
    base_targets : (n_t, c_in) array or FeatureGrid
    base_refs : (n_r, c_in) array or FeatureGrid
        Reference cells of all reference frames, stacked.
    ref_labels : (n_r, K+1) array
        One-hot labels of the reference cells.
    gt : (n_t, K+1) one-hot array or (n_t,) class ids
    weight : (c_in, c_out) array
    bias : (c_out,) array

    Returns
    -------
    loss, d_weight, d_bias
        ``loss`` is the summed cross-entropy of :func:`training_loss`.
    """
    xt, xr = _as_rows(base_targets), _as_rows(base_refs)
    yr = np.asarray(ref_labels, dtype=np.float64).reshape(xr.shape[0], -1)
    gt = np.asarray(gt)
    gt_ids = gt.reshape(xt.shape[0], -1).argmax(axis=1) if gt.ndim > 1 else gt.astype(np.int64)
    weight = np.asarray(weight, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    if xt.shape[1] != weight.shape[0] or xr.shape[1] != weight.shape[0]:
        raise ValueError(f"base channels {xt.shape[1]}/{xr.shape[1]} != head c_in {weight.shape[0]}")

    ft, nt = _head_forward(xt, weight, bias)
    fr, nr = _head_forward(xr, weight, bias)
    logits = ft @ fr.T / temperature
    logits -= logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    p /= p.sum(axis=1, keepdims=True)
    y_match = yr[:, gt_ids].T  # y_match[i, j] = 1 if reference j carries target i's class
    q = (p * y_match).sum(axis=1)
    live = q > PROB_FLOOR
    loss = float(-np.log(np.maximum(q, PROB_FLOOR)).sum())

    # d loss / d logit_ij = p_ij (1 - y_match_ij / q_i) on rows above the floor
    g = np.zeros_like(p)
    g[live] = p[live] - p[live] * y_match[live] / q[live, None]
    if not np.all(np.isfinite(g)):
        raise FloatingPointError("non-finite softmax gradient")
    d_ft = g @ fr / temperature
    d_fr = g.T @ ft / temperature
    # back through z / ||z||
    d_zt = (d_ft - ft * (d_ft * ft).sum(axis=1, keepdims=True)) / nt
    d_zr = (d_fr - fr * (d_fr * fr).sum(axis=1, keepdims=True)) / nr
    d_weight = xt.T @ d_zt + xr.T @ d_zr
    d_bias = d_zt.sum(axis=0) + d_zr.sum(axis=0)
    return loss, d_weight, d_bias


@dataclass(frozen=True)
class TrainConfig:
    """Plain gradient descent settings.

    ``strategy`` names one of the training reference schedules
    (``"1 frame"``, ``"3 frames"``, ``"9 frames"``, ``"uniform sample"``,
    ``"sparse sample"``). ``snippet_length`` target frames are drawn per
    sequence per epoch; ``None`` uses every annotated frame after the first
    (full-batch, deterministic).
    """

    learning_rate: float = 0.05
    epochs: int = 50
    snippet_length: int | None = 4
    strategy: str = "9 frames"
    temperature: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.snippet_length is not None and self.snippet_length < 1:
            raise ValueError(f"snippet_length must be >= 1, got {self.snippet_length}")
        if self.strategy not in TRAIN_STRATEGIES:
            raise ValueError(f"unknown training strategy {self.strategy!r}; "
                             f"choose from {sorted(TRAIN_STRATEGIES)}")


def _init_head(c_in: int, c_out: int, init: str, rng: np.random.Generator):
    if init == "identity":
        if c_out < c_in:
            raise ValueError(f"identity init needs c_out >= c_in ({c_out} < {c_in})")
        weight = np.zeros((c_in, c_out))
        weight[:, :c_in] = np.eye(c_in)
    elif init == "random":
        weight = rng.normal(0.0, 1.0 / np.sqrt(c_in), size=(c_in, c_out))
    else:
        raise ValueError(f"unknown init {init!r}")
    return weight, np.zeros(c_out)


def train_head(sequences, cfg: TrainConfig, weight, bias, base=None):
    """Gradient descent on the head over fully annotated sequences.

    ``sequences`` is a list of ``(frames, masks)`` pairs. Each epoch draws
    ``cfg.snippet_length`` target frames per sequence from the seeded
    generator and takes their references from the configured schedule. The
    objective is the per-frame summed cross-entropy averaged over the drawn
    frames. Returns ``(weight, bias, losses)``, where ``losses[e]`` is that
    average measured before epoch ``e``'s update.
    """
    base = base or HandcraftedEmbedder()
    strategy = TRAIN_STRATEGIES[cfg.strategy]
    data = []
    for frames, masks in sequences:
        if len(frames) < 2 or len(frames) != len(masks):
            raise ValueError("each training sequence needs >= 2 frames with one mask per frame")
        k1 = int(max(np.max(m) for m in masks)) + 1
        feats = [_as_rows(base.embed(f)) for f in frames]
        fields = [init_from_annotation(m, base.stride, k1).reshape(-1, k1) for m in masks]
        data.append((feats, fields))

    rng = np.random.default_rng(cfg.seed)
    weight = np.array(weight, dtype=np.float64)
    bias = np.array(bias, dtype=np.float64)
    losses = []
    for epoch in range(cfg.epochs):
        total, n_targets = 0.0, 0
        g_w = np.zeros_like(weight)
        g_b = np.zeros_like(bias)
        for feats, fields in data:
            n_frames = len(feats)
            if cfg.snippet_length is None:
                picks = range(1, n_frames)
            else:
                picks = rng.integers(1, n_frames, size=cfg.snippet_length)
            for t in picks:
                refs = select_references(int(t), strategy).indices
                loss, dw, db = head_gradient(
                    feats[t], np.concatenate([feats[r] for r in refs]),
                    np.concatenate([fields[r] for r in refs]), fields[t],
                    weight, bias, cfg.temperature)
                total += loss
                n_targets += 1
                g_w += dw
                g_b += db
        mean_loss = total / n_targets
        if not (np.isfinite(mean_loss) and np.all(np.isfinite(g_w)) and np.all(np.isfinite(g_b))):
            raise FloatingPointError(f"training diverged at epoch {epoch}")
        losses.append(mean_loss)
        weight -= cfg.learning_rate * g_w / n_targets
        bias -= cfg.learning_rate * g_b / n_targets
        logger.debug("epoch %d loss %.6f", epoch, mean_loss)
    return weight, bias, losses


class ProjectionHead(BaseEstimator, TransformerMixin):
    """Trainable affine embedding head over a base provider.

    Parameters
    ----------
    n_components : int, default=16
    init : {"random", "identity"}, default="random"
    learning_rate, epochs, snippet_length, strategy, temperature, seed
        See :class:`TrainConfig`.
    base : provider, optional
        Defaults to :class:`HandcraftedEmbedder`.

    Attributes
    ----------
    weight_ : ndarray of shape (c_in, n_components)
    bias_ : ndarray of shape (n_components,)
    loss_curve_ : list of float
    """

    deterministic = True

    def __init__(self, n_components=16, init="random", learning_rate=0.05, epochs=50,
                 snippet_length=4, strategy="9 frames", temperature=0.1, seed=0, base=None):
        self.n_components = n_components
        self.init = init
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.snippet_length = snippet_length
        self.strategy = strategy
        self.temperature = temperature
        self.seed = seed
        self.base = base

    @property
    def _base(self):
        return self.base if self.base is not None else HandcraftedEmbedder()

    @property
    def stride(self):
        return self._base.stride

    def initialize(self, c_in: int | None = None):
        """Set initial parameters without training."""
        c_in = c_in or self._base.n_channels
        rng = np.random.default_rng(self.seed)
        self.weight_, self.bias_ = _init_head(c_in, self.n_components, self.init, rng)
        self.loss_curve_ = []
        return self

    @classmethod
    def from_params(cls, weight, bias, **kw):
        weight = np.asarray(weight, dtype=np.float64)
        head = cls(n_components=weight.shape[1], **kw)
        head.weight_ = weight.copy()
        head.bias_ = np.asarray(bias, dtype=np.float64).copy()
        head.loss_curve_ = []
        return head

    def fit(self, X, y=None):
        """Train on ``X``, a list of ``(frames, masks)`` annotated sequences."""
        cfg = TrainConfig(self.learning_rate, self.epochs, self.snippet_length,
                          self.strategy, self.temperature, self.seed)
        self.initialize()
        self.weight_, self.bias_, self.loss_curve_ = train_head(
            X, cfg, self.weight_, self.bias_, self._base)
        return self

    def transform(self, X) -> FeatureGrid:
        """Project a base FeatureGrid (or (h, w, c_in) array) into the head space."""
        check_is_fitted(self, "weight_")
        stride = X.stride if isinstance(X, FeatureGrid) else self.stride
        data = X.data if isinstance(X, FeatureGrid) else np.asarray(X, dtype=np.float64)
        if data.shape[-1] != self.weight_.shape[0]:
            raise ValueError(f"feature channels {data.shape[-1]} != head c_in {self.weight_.shape[0]}")
        h, w = data.shape[:2]
        z = data.reshape(-1, data.shape[-1]) @ self.weight_ + self.bias_
        return FeatureGrid(z.reshape(h, w, -1), stride=stride)

    def embed(self, frame, stride: int | None = None) -> FeatureGrid:
        return self.transform(self._base.embed(frame, stride))

    @property
    def n_channels(self):
        return self.n_components
