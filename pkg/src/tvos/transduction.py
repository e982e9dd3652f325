"""Generic graph transduction: normalized-affinity label spreading.

Dense-matrix solver for the regularization framework

    Q(Y) = sum_ij w_ij || y_i / sqrt(d_i) - y_j / sqrt(d_j) ||^2 + mu * sum_i || y_i - y0_i ||^2

solved either by the fixed-point iteration ``Y <- alpha * S Y + (1 - alpha) * Y0``
with ``S = D^-1/2 W D^-1/2`` or by the equivalent linear solve. Meant for
graphs of up to a few thousand nodes; the video path never builds one of these.

Example
-------
>>> import numpy as np
>>> from tvos.transduction import TransductiveLabelSpreading
>>> W = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
>>> model = TransductiveLabelSpreading(alpha=0.5).fit(W, [0, -1, 1])
>>> model.transduction_
array([0, 0, 1])
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import ConvergenceWarning
from sklearn.utils.validation import check_is_fitted

from ._validation import check_affinity, check_label_matrix

__all__ = [
    "TransductionParams",
    "IterativeResult",
    "SingularSystemError",
    "normalize_affinity",
    "energy",
    "stationary_mu",
    "propagate_step",
    "solve_iterative",
    "solve_closed_form",
    "one_hot_labels",
    "TransductiveLabelSpreading",
]


class SingularSystemError(np.linalg.LinAlgError):
    """Raised when ``I - alpha * S`` cannot be inverted."""


@dataclass(frozen=True)
class TransductionParams:
    """Propagation strength and stopping rule.

    ``alpha`` and ``mu`` are two parametrizations of the same trade-off,
    tied by ``alpha = mu / (mu + 1)``. Supply either one.
    """

    alpha: float | None = None
    mu: float | None = None
    tol: float = 1e-10
    max_iters: int = 100_000

    def __post_init__(self):
        alpha, mu = self.alpha, self.mu
        if alpha is None and mu is None:
            alpha = 0.99
        if mu is not None:
            if mu <= 0:
                raise ValueError(f"mu must be > 0, got {mu}")
            implied = mu / (mu + 1.0)
            if alpha is not None and abs(alpha - implied) > 1e-12:
                raise ValueError(f"alpha={alpha} inconsistent with mu={mu} "
                                 f"(expected alpha={implied})")
            alpha = implied
        if not 0.0 <= alpha < 1.0:
            raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
        if mu is None and alpha > 0:
            mu = alpha / (1.0 - alpha)
        if self.tol <= 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        object.__setattr__(self, "alpha", float(alpha))
        object.__setattr__(self, "mu", None if mu is None else float(mu))


class IterativeResult(NamedTuple):
    labels: np.ndarray
    n_iter: int
    converged: bool


def normalize_affinity(w) -> np.ndarray:
    """Symmetrically normalize ``W`` into ``S = D^-1/2 W D^-1/2``.

    Isolated nodes (zero degree) get all-zero rows and columns instead of
    raising.
    """
    w = check_affinity(w)
    d = w.sum(axis=1)
    inv_sqrt = np.zeros_like(d)
    nz = d > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(d[nz])
    return inv_sqrt[:, None] * w * inv_sqrt[None, :]


def energy(w, y_hat, y0, mu: float, labeled=None) -> float:
    """Smoothness-plus-fitting energy of a candidate labelling.

    The smoothness sum runs over all ordered pairs ``(i, j)``. The fitting
    sum runs over the rows selected by ``labeled`` (boolean mask); by default
    every row of ``y0`` is treated as an observation, with unlabeled rows
    observed as zero. That is the form whose minimizer is the fixed point of
    :func:`propagate_step` (see :func:`stationary_mu`).
    """
    w = check_affinity(w)
    n = w.shape[0]
    y_hat = check_label_matrix(y_hat, n, name="y_hat")
    y0 = check_label_matrix(y0, n)
    if y_hat.shape != y0.shape:
        raise ValueError(f"y_hat {y_hat.shape} and y0 {y0.shape} differ in shape")
    if mu < 0:
        raise ValueError(f"mu must be >= 0, got {mu}")
    d = w.sum(axis=1)
    inv_sqrt = np.zeros_like(d)
    nz = d > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(d[nz])
    z = y_hat * inv_sqrt[:, None]
    sq = (z * z).sum(axis=1)
    # ||z_i - z_j||^2 = |z_i|^2 + |z_j|^2 - 2 z_i.z_j, clipped against cancellation
    pair = np.maximum(sq[:, None] + sq[None, :] - 2.0 * z @ z.T, 0.0)
    smooth = float((w * pair).sum())
    if labeled is None:
        rows = slice(None)
    else:
        rows = np.asarray(labeled, dtype=bool)
        if rows.shape != (n,):
            raise ValueError(f"labeled must be a boolean mask of length {n}")
    fit = float(((y_hat[rows] - y0[rows]) ** 2).sum())
    return smooth + mu * fit


def stationary_mu(alpha: float) -> float:
    """Fitting weight for which the ``alpha`` fixed point minimizes :func:`energy`.

    With the ordered-pair smoothness sum the gradient is
    ``4 (I - S) Y + 2 mu (Y - Y0)``; it vanishes at the fixed point exactly
    when ``mu = 2 (1 - alpha) / alpha``.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return 2.0 * (1.0 - alpha) / alpha


def propagate_step(s, y_k, y0, alpha: float) -> np.ndarray:
    """One spreading step: ``alpha * S @ y_k + (1 - alpha) * y0``."""
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError(f"S must be square, got shape {s.shape}")
    n = s.shape[0]
    y_k = check_label_matrix(y_k, n, name="y_k")
    y0 = check_label_matrix(y0, n)
    if y_k.shape != y0.shape:
        raise ValueError(f"y_k {y_k.shape} and y0 {y0.shape} differ in shape")
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    return alpha * (s @ y_k) + (1.0 - alpha) * y0


def solve_iterative(w, y0, params: TransductionParams | None = None) -> IterativeResult:
    """Iterate :func:`propagate_step` from ``y0`` to its fixed point.

    Stops once the max-abs update falls below ``tol * (1 - alpha)``, which
    keeps the remaining distance to the fixed point on the order of ``tol``
    even when alpha is close to 1. A run that exhausts ``max_iters`` still
    returns its last iterate, with ``converged=False`` and a
    :class:`~sklearn.exceptions.ConvergenceWarning`.
    """
    params = params or TransductionParams()
    s = normalize_affinity(w)
    y0 = check_label_matrix(y0, s.shape[0])
    alpha = params.alpha
    threshold = params.tol * (1.0 - alpha)
    y = y0.copy()
    for k in range(1, params.max_iters + 1):
        y_next = alpha * (s @ y) + (1.0 - alpha) * y0
        change = np.max(np.abs(y_next - y)) if y.size else 0.0
        y = y_next
        if change < threshold:
            return IterativeResult(y, k, True)
    warnings.warn(f"label spreading did not converge in {params.max_iters} "
                  f"iterations (last update {change:.3g})", ConvergenceWarning,
                  stacklevel=2)
    return IterativeResult(y, params.max_iters, False)


def solve_closed_form(w, y0, alpha: float) -> np.ndarray:
    """Fixed point ``(1 - alpha) (I - alpha S)^-1 y0`` by a dense linear solve."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    s = normalize_affinity(w)
    y0 = check_label_matrix(y0, s.shape[0])
    a = np.eye(s.shape[0]) - alpha * s
    try:
        out = np.linalg.solve(a, (1.0 - alpha) * y0)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"I - alpha*S is singular (alpha={alpha})") from exc
    if not np.all(np.isfinite(out)):
        raise SingularSystemError(f"linear solve produced non-finite values (alpha={alpha})")
    return out


def one_hot_labels(labels, n_classes: int | None = None) -> np.ndarray:
    """Integer labels (``-1`` for unlabeled) to a zero-padded one-hot matrix."""
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ValueError(f"labels must be 1-D, got shape {labels.shape}")
    if np.any(labels < -1):
        raise ValueError("labels must be >= -1 (-1 marks unlabeled rows)")
    if n_classes is None:
        n_classes = int(labels.max()) + 1 if labels.size and labels.max() >= 0 else 1
    y = np.zeros((labels.size, n_classes))
    rows = np.flatnonzero(labels >= 0)
    if rows.size and labels[rows].max() >= n_classes:
        raise ValueError(f"label {labels[rows].max()} out of range for {n_classes} classes")
    y[rows, labels[rows]] = 1.0
    return y


class TransductiveLabelSpreading(BaseEstimator):
    """Label spreading over a precomputed affinity matrix.

    Parameters
    ----------
    alpha : float, default=0.99
        Propagation strength in ``[0, 1)``.
    tol : float, default=1e-10
        Convergence tolerance for the iterative solver.
    max_iters : int, default=100000
    method : {"iterative", "closed_form"}, default="iterative"

    Attributes
    ----------
    label_distributions_ : ndarray of shape (n_nodes, n_classes)
        Solved soft labels (not row-normalized).
    transduction_ : ndarray of shape (n_nodes,)
        Arg-max class per node.
    n_iter_ : int
        Iterations used (0 for the closed form).
    converged_ : bool
    """

    def __init__(self, alpha=0.99, tol=1e-10, max_iters=100_000, method="iterative"):
        self.alpha = alpha
        self.tol = tol
        self.max_iters = max_iters
        self.method = method

    def fit(self, X, y):
        """Fit on affinity ``X`` and labels ``y``.

        ``y`` is either a 1-D integer vector with ``-1`` for unlabeled nodes
        or an ``(n, c)`` label matrix whose unlabeled rows are zero.
        """
        w = check_affinity(X, name="X")
        y = np.asarray(y)
        y0 = one_hot_labels(y) if y.ndim == 1 else check_label_matrix(y, w.shape[0], name="y")
        if y0.shape[0] != w.shape[0]:
            raise ValueError(f"y has {y0.shape[0]} rows but X has {w.shape[0]} nodes")
        if self.method == "iterative":
            params = TransductionParams(alpha=self.alpha, tol=self.tol, max_iters=self.max_iters)
            res = solve_iterative(w, y0, params)
            self.label_distributions_, self.n_iter_, self.converged_ = res
        elif self.method == "closed_form":
            self.label_distributions_ = solve_closed_form(w, y0, self.alpha)
            self.n_iter_, self.converged_ = 0, True
        else:
            raise ValueError(f"unknown method {self.method!r}")
        self.n_classes_ = y0.shape[1]
        self.transduction_ = np.argmax(self.label_distributions_, axis=1)
        return self

    def predict(self, X=None):
        check_is_fitted(self, "label_distributions_")
        return self.transduction_

    def predict_proba(self, X=None):
        """Row-normalized label distributions (rows with no mass stay zero)."""
        check_is_fitted(self, "label_distributions_")
        dist = np.clip(self.label_distributions_, 0.0, None)
        tot = dist.sum(axis=1, keepdims=True)
        return np.divide(dist, tot, out=np.zeros_like(dist), where=tot > 0)

    def fit_predict(self, X, y):
        return self.fit(X, y).transduction_
