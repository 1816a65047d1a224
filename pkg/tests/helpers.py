"""Shared test oracles: finite differences and scalar-loop references."""

from __future__ import annotations

import numpy as np

from udml import autodiff as ad
from udml.autodiff import Tensor


def finite_difference(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of a scalar function of an array."""
    g = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return g


def rel_error(a: np.ndarray, b: np.ndarray) -> float:
    denom = np.maximum(np.abs(a) + np.abs(b), 1e-8)
    return float(np.max(np.abs(a - b) / denom))


def check_grad(build_loss, x0: np.ndarray, h: float = 1e-5) -> float:
    """Compare autodiff gradient of build_loss(Tensor) against finite differences."""
    t = Tensor(x0.copy(), requires_grad=True)
    loss = build_loss(t)
    ad.backward(loss)
    numeric = finite_difference(lambda x: build_loss(Tensor(x)).item(), x0.copy(), h)
    return rel_error(t.grad, numeric)
