"""Finite-difference verification of analytic gradients.

Central differences with h = 1e-5 on float64 give roughly 1e-10 truncation
error for smooth functions, so a relative-error threshold of 1e-4 leaves a
wide margin while still catching sign errors, missing terms, and transposed
jacobians.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor

__all__ = ["numerical_grad", "check_gradients", "max_relative_error"]

DEFAULT_H = 1e-5
DEFAULT_TOL = 1e-4


def numerical_grad(fn, t: Tensor, h: float = DEFAULT_H) -> np.ndarray:
    """Central finite differences of scalar ``fn()`` w.r.t. ``t.data``.

    ``fn`` must close over ``t`` and rebuild its forward pass on each call
    (the engine caches nothing between calls, so mutating ``t.data`` in
    place and re-running is sound).
    """
    base = t.data.copy()
    grad = np.zeros_like(base)
    flat_data = t.data.reshape(-1)
    flat_grad = grad.reshape(-1)
    for i in range(flat_data.size):
        orig = flat_data[i]
        flat_data[i] = orig + h
        f_plus = float(fn().data)
        flat_data[i] = orig - h
        f_minus = float(fn().data)
        flat_data[i] = orig
        flat_grad[i] = (f_plus - f_minus) / (2.0 * h)
    t.data[...] = base
    return grad


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """max |a - n| / max(|a|, |n|, 1); the floor of 1 keeps tiny true
    gradients from blowing the ratio up on pure rounding noise.

    Zero-size inputs agree vacuously (models built for featureless
    graphs carry empty projection weights)."""
    if analytic.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1.0)
    return float(np.max(np.abs(analytic - numeric) / denom))


def check_gradients(fn, params: list[Tensor], h: float = DEFAULT_H,
                    tol: float = DEFAULT_TOL) -> float:
    """Compare backward() gradients of scalar ``fn()`` against finite
    differences for every tensor in ``params``.

    Returns the worst relative error seen; raises AssertionError with the
    offending parameter index if it exceeds ``tol``.
    """
    for p in params:
        p.zero_grad()
    out = fn()
    out.backward()
    analytic = []
    for p in params:
        if p.grad is None:
            analytic.append(np.zeros_like(p.data))
        else:
            analytic.append(p.grad.copy())
    worst = 0.0
    for i, p in enumerate(params):
        num = numerical_grad(fn, p, h=h)
        err = max_relative_error(analytic[i], num)
        worst = max(worst, err)
        if err > tol:
            raise AssertionError(
                f"gradient check failed for parameter {i} "
                f"(shape {p.shape}): relative error {err:.3e} > {tol:.1e}"
            )
    return worst
