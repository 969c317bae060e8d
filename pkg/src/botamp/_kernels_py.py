"""Numpy implementations of the hot kernels.

Used when the compiled ``_ckernels`` extension is unavailable, and as the
reference the compiled versions are tested against.  Arithmetic order in
``knn_vote`` matches the compiled loop so both produce identical votes.
"""
import numpy as np

PROB_EPS = 1e-12
KNN_BLOCK = 256


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def logistic_loss_grad(X, y, w, b, l2):
    """Mean clipped cross-entropy + (l2/2)|w|^2 and its gradient."""
    z = X @ w + b
    p = sigmoid(z)
    pc = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    n = X.shape[0]
    loss = -np.sum(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)) / n
    r = p - y
    gw = X.T @ r / n + l2 * w
    gb = np.sum(r) / n
    return float(loss + 0.5 * l2 * np.dot(w, w)), gw, float(gb)


def hinge_loss_subgrad(X, ys, w, b, l2):
    """Mean hinge loss + (l2/2)|w|^2 and a subgradient; ``ys`` in {-1, +1}."""
    n = X.shape[0]
    m = ys * (X @ w + b)
    active = m < 1.0
    loss = np.sum(np.where(active, 1.0 - m, 0.0)) / n
    ya = np.where(active, ys, 0.0)
    gw = -(X.T @ ya) / n + l2 * w
    gb = -np.sum(ya) / n
    return float(loss + 0.5 * l2 * np.dot(w, w)), gw, float(gb)


def knn_vote(X, y, Q, k):
    """Fraction of positive labels among the ``k`` nearest training rows.

    Squared Euclidean distance; equal distances rank the lower training
    index first.
    """
    n, d = X.shape
    m = Q.shape[0]
    yb = np.asarray(y, dtype=bool)
    out = np.empty(m, dtype=np.float64)
    for start in range(0, m, KNN_BLOCK):
        q = Q[start:start + KNN_BLOCK]
        dist = np.zeros((q.shape[0], n), dtype=np.float64)
        for j in range(d):
            diff = q[:, j, None] - X[None, :, j]
            dist += diff * diff
        if k == n:
            sel = np.ones_like(dist, dtype=bool)
        else:
            kth = np.partition(dist, k - 1, axis=1)[:, k - 1, None]
            below = dist < kth
            need = k - below.sum(axis=1, keepdims=True)
            tied = dist == kth
            sel = below | (tied & (np.cumsum(tied, axis=1) <= need))
        out[start:start + q.shape[0]] = (sel & yb).sum(axis=1) / k
    return out
