"""Exact Euclidean projection onto l1 balls (sort-and-threshold), single and batched."""

from __future__ import annotations

import numpy as np


def project_l1(v: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection of v onto {w : ||w||_1 <= radius}."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    v = np.asarray(v, dtype=np.float64)
    if radius == 0.0:
        return np.zeros_like(v)
    a = np.abs(v)
    if a.sum() <= radius:
        return v.copy()
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    j = np.arange(1, v.size + 1)
    rho = int(np.nonzero(u * j > (css - radius))[0][-1])
    theta = (css[rho] - radius) / (rho + 1.0)
    return np.sign(v) * np.maximum(a - theta, 0.0)


def project_l1_columns(V: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """Project each column of V onto the l1 ball of its own radius.

    Vectorized over columns; columns already inside their ball are copied.
    """
    V = np.asarray(V, dtype=np.float64)
    radii = np.asarray(radii, dtype=np.float64)
    if np.any(radii < 0):
        raise ValueError("radii must be non-negative")
    q, m = V.shape
    out = V.copy()
    if q == 0:
        return out
    a = np.abs(V)
    l1 = a.sum(axis=0)
    zero = radii == 0.0
    out[:, zero] = 0.0
    need = (~zero) & (l1 > radii)
    if not np.any(need):
        return out
    A = a[:, need]
    U = -np.sort(-A, axis=0)
    css = np.cumsum(U, axis=0)
    j = np.arange(1, q + 1)[:, None]
    # the coordinates with U*j > css - r form a prefix; its length is the pivot
    cond = U * j > (css - radii[need][None, :])
    rho = cond.sum(axis=0) - 1
    cols = np.arange(A.shape[1])
    theta = (css[rho, cols] - radii[need]) / (rho + 1.0)
    out[:, need] = np.sign(V[:, need]) * np.maximum(A - theta[None, :], 0.0)
    return out
