"""Noise-aware uncertainty estimator: predicts injected noise intensity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .nn import Mlp

RHO_FLOOR = 1e-3


@dataclass
class NoiseGrid:
    """Discrete noise levels sampled uniformly during estimator training."""

    levels: tuple[float, ...] = tuple(float(s) for s in range(11))

    def __post_init__(self):
        lv = tuple(float(s) for s in self.levels)
        if not lv or lv[0] != 0.0:
            raise ValueError("NoiseGrid: levels must start at 0")
        if any(b <= a for a, b in zip(lv, lv[1:])):
            raise ValueError("NoiseGrid: levels must be strictly increasing")
        if any(s < 0 for s in lv):
            raise ValueError("NoiseGrid: levels must be nonnegative")
        self.levels = lv

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.choice(np.asarray(self.levels), size=n)


class NoiseEstimator:
    """MLP with two hidden layers mapping a d-vector to a nonnegative noise level."""

    def __init__(self, input_dim: int, hidden_dim: int = 64, input_mode: str = "variance"):
        if input_mode not in ("variance", "raw"):
            raise ValueError(f"NoiseEstimator: unknown input_mode {input_mode!r}")
        self.input_dim = input_dim
        self.input_mode = input_mode
        self.net = Mlp([input_dim, hidden_dim, hidden_dim, 1])

    def init(self, rng: np.random.Generator) -> None:
        self.net.init(rng)

    def named_parameters(self, prefix: str = "") -> list[tuple[str, Tensor]]:
        return self.net.named_parameters(prefix + "net.")


def predict_sigma(est: NoiseEstimator, x: Tensor) -> Tensor:
    """Per-sample nonnegative noise-level prediction, shape [batch]."""
    out = est.net(x)
    batch = out.shape[0]
    return ad.softplus(ad.reshape(out, (batch,)))


def estimator_loss(est: NoiseEstimator, detached_input: Tensor, sigma_true) -> Tensor:
    """Squared error between predicted and injected noise level.

    The input must already be detached; gradients reach only the estimator.
    """
    target = sigma_true if isinstance(sigma_true, Tensor) else Tensor(np.asarray(sigma_true, dtype=np.float64))
    pred = predict_sigma(est, detached_input)
    return ad.mse(pred, target)


def inference_uncertainty(est: NoiseEstimator, sigma2: Tensor) -> Tensor:
    """rho = sigma_hat^2 + floor; strictly positive for division safety."""
    s = predict_sigma(est, sigma2)
    return ad.add_scalar(ad.mul(s, s), RHO_FLOOR)
