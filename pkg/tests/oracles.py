"""Slow, independent reference implementations used only by the tests."""

import numpy as np


def gd_ridge(Z, Y, lam, tol=1e-11, max_iter=200_000):
    """Minimize (1/M)||Y - Z W^T - b||^2 + lam ||W||^2 by plain gradient descent.

    Works on the uncentered problem with ``b`` as a free parameter, so it
    shares nothing with the centered closed-form solver.
    """
    M, p = Z.shape
    D = Y.shape[1]
    W = np.zeros((D, p))
    b = np.zeros(D)
    Za = np.hstack([Z, np.ones((M, 1))])
    # Lipschitz constant of the gradient in (W, b)
    L = 2.0 * (np.linalg.eigvalsh(Za.T @ Za / M).max() + lam)
    step = 1.0 / L
    for _ in range(max_iter):
        R = Z @ W.T + b - Y
        gW = 2.0 / M * R.T @ Z + 2.0 * lam * W
        gb = 2.0 / M * R.sum(axis=0)
        if np.sqrt(np.sum(gW ** 2) + np.sum(gb ** 2)) < tol:
            break
        W -= step * gW
        b -= step * gb
    return W, b


def pair_count_auc(scores, positives):
    """AUC by counting every (positive, negative) pair; ties count one half."""
    pos = [s for s, p in zip(scores, positives) if p]
    neg = [s for s, p in zip(scores, positives) if not p]
    total = 0.0
    for a in pos:
        for b in neg:
            total += 1.0 if a > b else 0.5 if a == b else 0.0
    return total / (len(pos) * len(neg))


def nearest_neighbour_distances(points):
    pts = [np.asarray(p, dtype=float) for p in points]
    out = []
    for i, a in enumerate(pts):
        out.append(min(float(np.sqrt(np.sum((a - b) ** 2))) for j, b in enumerate(pts) if j != i))
    return out


def central_difference(f, x, eps=1e-6):
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        up, dn = x.copy(), x.copy()
        up[idx] += eps
        dn[idx] -= eps
        g[idx] = (f(up) - f(dn)) / (2 * eps)
    return g
