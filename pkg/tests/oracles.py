"""Independent reference implementations used as test oracles.

Plain loops, ``math.exp`` and ``math.fsum``; no log-space shifts, no scipy
morphology, nothing shared with the package code paths under test.
"""

import math
from fractions import Fraction

import numpy as np


def naive_propagate(target, references, temperature):
    """Label of every target cell as an affinity-weighted average.

    ``target`` is an (h, w, c) array of unit vectors; ``references`` is a
    list of ``(features (h, w, c), labels (h, w, k), sigma)``.
    """
    h, w, _ = target.shape
    k = references[0][1].shape[2]
    out = np.zeros((h, w, k))
    for ty in range(h):
        for tx in range(w):
            f_i = target[ty, tx]
            weights, labels = [], []
            for feats, labs, sigma in references:
                for ry in range(h):
                    for rx in range(w):
                        dot = math.fsum(float(a) * float(b) for a, b in zip(f_i, feats[ry, rx]))
                        d2 = (ty - ry) ** 2 + (tx - rx) ** 2
                        spatial = 1.0 if math.isinf(sigma) else math.exp(-d2 / (sigma * sigma))
                        weights.append(math.exp(dot / temperature) * spatial)
                        labels.append(labs[ry, rx])
            total = math.fsum(weights)
            for c in range(k):
                out[ty, tx, c] = math.fsum(wt * lab[c] for wt, lab in zip(weights, labels)) / total
    return out


def boundary_set(mask):
    """Foreground pixels with a 4-neighbour that is background or off-image."""
    h, w = mask.shape
    pts = []
    for y in range(h):
        for x in range(w):
            if not mask[y, x]:
                continue
            for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                yy, xx = y + dy, x + dx
                if not (0 <= yy < h and 0 <= xx < w) or not mask[yy, xx]:
                    pts.append((y, x))
                    break
    return pts


def exhaustive_boundary_f(pred, gt, tolerance_frac=0.008):
    """Boundary F by checking every pair of boundary pixels."""
    bp, bg = boundary_set(pred), boundary_set(gt)
    if not bp and not bg:
        return 1.0
    if not bp or not bg:
        return 0.0
    h, w = pred.shape
    r = math.ceil(tolerance_frac * math.sqrt(h * h + w * w))

    def near(p, others):
        return any((p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2 <= r * r for q in others)

    precision = sum(near(p, bg) for p in bp) / len(bp)
    recall = sum(near(g, bp) for g in bg) / len(bg)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def round_half_up_spacing(lo, hi, count):
    """Endpoint-inclusive even spacing rounded half up, in exact rationals."""
    if count == 1:
        return [lo]
    out = []
    for k in range(count):
        v = Fraction(lo) + Fraction(hi - lo, count - 1) * k
        out.append(math.floor(v + Fraction(1, 2)))
    return out


def dense_energy(w, y, y0, mu, labeled=None):
    """Energy by explicit double loop over ordered pairs."""
    n = w.shape[0]
    d = w.sum(axis=1)
    smooth = []
    for i in range(n):
        for j in range(n):
            if w[i, j] == 0:
                continue
            zi = y[i] / math.sqrt(d[i])
            zj = y[j] / math.sqrt(d[j])
            smooth.append(w[i, j] * float(np.sum((zi - zj) ** 2)))
    rows = range(n) if labeled is None else [i for i in range(n) if labeled[i]]
    fit = [float(np.sum((y[i] - y0[i]) ** 2)) for i in rows]
    return math.fsum(smooth) + mu * math.fsum(fit)


def random_graph(rng, n, density=1.0):
    """Symmetric non-negative affinity matrix with a zero diagonal."""
    a = rng.random((n, n))
    if density < 1.0:
        a *= rng.random((n, n)) < density
    w = np.triu(a, 1)
    return w + w.T


def random_seed_labels(rng, n, k, n_labeled):
    """One-hot rows for ``n_labeled`` random nodes, zeros elsewhere."""
    y0 = np.zeros((n, k))
    idx = rng.choice(n, size=n_labeled, replace=False)
    y0[idx, rng.integers(0, k, size=n_labeled)] = 1.0
    return y0
