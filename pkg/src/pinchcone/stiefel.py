"""Batched descent over orthonormal k-frames in R^n."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .curvature import orthonormalize

ValueGrad = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]


def random_frames(m: int, n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """``m`` Haar-distributed orthonormal ``(n, k)`` frames."""
    return orthonormalize(rng.standard_normal((m, n, k)))


def tangent_projection(F: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Riemannian gradient on the Stiefel manifold (embedded metric)."""
    FtG = np.swapaxes(F, -1, -2) @ G
    return G - F @ (0.5 * (FtG + np.swapaxes(FtG, -1, -2)))


def descend(
    fun: ValueGrad,
    F0: np.ndarray,
    iters: int = 200,
    step: float = 0.1,
    min_step: float = 1e-14,
) -> tuple[np.ndarray, np.ndarray]:
    """Projected gradient descent run independently on every frame of a batch.

    Each start keeps its own step size: it grows by 2 after an accepted step
    and halves after a rejected one, so the objective never increases.  A start
    stops once its step (times the gradient norm) drops below ``min_step``.
    """
    F = np.array(F0, dtype=float)
    val, grad = fun(F)
    eta = np.full(F.shape[0], float(step))
    active = np.ones(F.shape[0], dtype=bool)
    for _ in range(iters):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        xi = tangent_projection(F[idx], grad[idx])
        gnorm = np.sqrt(np.sum(xi**2, axis=(1, 2)))
        trial = orthonormalize(F[idx] - eta[idx, None, None] * xi)
        tval, tgrad = fun(trial)
        ok = tval < val[idx]
        acc = idx[ok]
        F[acc], val[acc], grad[acc] = trial[ok], tval[ok], tgrad[ok]
        eta[acc] *= 2.0
        eta[idx[~ok]] *= 0.5
        active[idx] = eta[idx] * gnorm > min_step
    return F, val
