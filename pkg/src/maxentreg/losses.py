"""Loss kernels for softmax classification with entropy regularization.

Everything uses the natural logarithm and float64. The kernels:

    softmax        p_i = exp(z_i) / sum_j exp(z_j)
    cross-entropy  -log p_y
    entropy        H(p) = -sum_i p_i log p_i
    combined loss  L = -log p_y - lam * H(p)
    cell function  f(q) = q * (1 + lam*log(q) - lam*sum_j p_j log p_j)
    loss gradient  dL/dz_i = f(p_i) - [i == y]

Distributions live on the last axis, so each function accepts a single
C-vector or an (N, C) batch and returns a scalar or a length-N array
accordingly. Probabilities are floored at ``PROB_FLOOR`` inside every
logarithm and 0 * log 0 is treated as 0, which keeps all kernels finite
on the closed simplex. With ``lam=0`` the combined loss and its gradient
reduce bit-for-bit to plain cross-entropy.

All functions are pure; no shared state, safe to call from any thread.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class LossBreakdown:
    """Cross-entropy and entropy terms of the combined loss.

    ``total = ce - lam * entropy``. Fields are scalars for a single
    distribution or length-N arrays for a batch.
    """

    ce: float | np.ndarray
    entropy: float | np.ndarray
    lam: float
    total: float | np.ndarray


def _as_probs(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim not in (1, 2):
        raise ValueError(f"expected a C-vector or an (N, C) batch, got shape {p.shape}")
    if p.shape[-1] < 2:
        raise ValueError("need at least 2 classes")
    return p


def _check_labels(label, class_count: int) -> np.ndarray:
    labels = np.asarray(label)
    if not np.issubdtype(labels.dtype, np.integer):
        raise ValueError("class labels must be integers")
    if np.any(labels < 0) or np.any(labels >= class_count):
        raise ValueError(f"label out of range [0, {class_count})")
    return labels


def _gather(p: np.ndarray, label) -> float | np.ndarray:
    """p[..., y] for a scalar label (1-D p) or a label vector (2-D p)."""
    labels = _check_labels(label, p.shape[-1])
    if p.ndim == 1:
        if labels.ndim != 0:
            raise ValueError("single distribution takes a single label")
        return p[int(labels)]
    if labels.ndim == 0:
        labels = np.full(p.shape[0], int(labels))
    return np.take_along_axis(p, labels[:, None], axis=-1)[:, 0]


def _subtract_onehot(values: np.ndarray, label) -> np.ndarray:
    """values - onehot(label), matching the shapes accepted by _gather."""
    labels = _check_labels(label, values.shape[-1])
    out = values.copy()
    if out.ndim == 1:
        out[int(labels)] -= 1.0
    else:
        if labels.ndim == 0:
            labels = np.full(out.shape[0], int(labels))
        out[np.arange(out.shape[0]), labels] -= 1.0
    return out


def softmax(z, axis: int = -1) -> np.ndarray:
    """Normalized exponentials of the scores, overflow-safe.

    The maximum score is subtracted before exponentiation, which also
    makes the result invariant to adding a constant to all scores.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.shape[axis] < 2:
        raise ValueError("need at least 2 classes")
    if not np.all(np.isfinite(z)):
        raise ValueError("scores must be finite")
    shifted = z - z.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_jacobian(p) -> np.ndarray:
    """C x C matrix of dp_i/dz_j: p_i(1-p_i) on the diagonal, -p_i p_j off it."""
    p = _as_probs(p)
    if p.ndim != 1:
        raise ValueError("jacobian is defined for a single distribution")
    return np.diag(p) - np.outer(p, p)


def cross_entropy(p, label) -> float | np.ndarray:
    """-log p_y with the probability floored at PROB_FLOOR."""
    p = _as_probs(p)
    py = _gather(p, label)
    return -np.log(np.maximum(py, PROB_FLOOR))


def entropy(p) -> float | np.ndarray:
    """Shannon entropy in nats; 0 for one-hot, log(C) for uniform."""
    p = _as_probs(p)
    h = -np.sum(p * np.log(np.maximum(p, PROB_FLOOR)), axis=-1)
    # roundoff can leave a near-one-hot distribution a hair below zero
    return np.maximum(h, 0.0)


def regularized_loss(p, label, lam: float) -> LossBreakdown:
    """Cross-entropy minus lam times entropy, with the parts kept separate."""
    if lam < 0:
        raise ValueError(f"regularization weight must be >= 0, got {lam}")
    p = _as_probs(p)
    ce = cross_entropy(p, label)
    h = entropy(p)
    return LossBreakdown(ce=ce, entropy=h, lam=lam, total=ce - lam * h)


def cell_function(q, p, lam: float) -> float | np.ndarray:
    """f(q) = q * (1 + lam*log(q) - lam*sum_j p_j log p_j).

    The building block of the loss gradient; f(1/C) = 1/C at uniform p
    for every lam.
    """
    q = np.asarray(q, dtype=np.float64)
    if np.any(q <= 0):
        raise ValueError("cell function requires q > 0")
    p = _as_probs(p)
    h = entropy(p)
    return q * (1.0 + lam * np.log(np.maximum(q, PROB_FLOOR)) + lam * h)


def regularized_gradient(p, label, lam: float) -> np.ndarray:
    """Gradient of the combined loss with respect to the scores z.

    Entry i is f(p_i) - [i == y]; at lam=0 this is exactly the
    cross-entropy gradient p - onehot(y).
    """
    if lam < 0:
        raise ValueError(f"regularization weight must be >= 0, got {lam}")
    p = _as_probs(p)
    h = np.asarray(entropy(p))
    f = p * (1.0 + lam * np.log(np.maximum(p, PROB_FLOOR)) + lam * h[..., None])
    return _subtract_onehot(f, label)


def label_smoothing_loss(p, label, smoothing: float) -> float | np.ndarray:
    """Cross-entropy against the smoothed target (1-s)*onehot(y) + s/C."""
    if not 0.0 <= smoothing <= 1.0:
        raise ValueError(f"smoothing must be in [0, 1], got {smoothing}")
    p = _as_probs(p)
    logp = np.log(np.maximum(p, PROB_FLOOR))
    py_log = _gather(logp, label)
    c = p.shape[-1]
    return -(1.0 - smoothing) * py_log - (smoothing / c) * logp.sum(axis=-1)


def label_smoothing_gradient(p, label, smoothing: float) -> np.ndarray:
    """Gradient of the smoothed loss with respect to the scores: p - target."""
    if not 0.0 <= smoothing <= 1.0:
        raise ValueError(f"smoothing must be in [0, 1], got {smoothing}")
    p = _as_probs(p)
    labels = _check_labels(label, p.shape[-1])
    target = np.full_like(p, smoothing / p.shape[-1])
    if p.ndim == 1:
        if labels.ndim != 0:
            raise ValueError("single distribution takes a single label")
        target[int(labels)] += 1.0 - smoothing
    else:
        if labels.ndim == 0:
            labels = np.full(p.shape[0], int(labels))
        target[np.arange(p.shape[0]), labels] += 1.0 - smoothing
    return p - target
