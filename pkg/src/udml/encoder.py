"""Per-modality probabilistic encoders producing Gaussian embeddings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .nn import Linear, Mlp

VARIANCE_FLOOR = 1e-6


@dataclass
class GaussianEmbedding:
    """Per-sample (mu, sigma2) pair; sigma2 is a floored diagonal variance."""

    mu: Tensor
    sigma2: Tensor


class ModalityEncoder:
    """Shared MLP trunk with separate mean and variance heads."""

    def __init__(self, feat_dim: int, embed_dim: int = 32, hidden_dim: int = 64):
        self.feat_dim = feat_dim
        self.embed_dim = embed_dim
        self.trunk = Mlp([feat_dim, hidden_dim, hidden_dim])
        self.mu_head = Linear(hidden_dim, embed_dim)
        self.var_head = Linear(hidden_dim, embed_dim)

    def init(self, rng: np.random.Generator) -> None:
        self.trunk.init(rng)
        self.mu_head.init(rng)
        self.var_head.init(rng)

    def named_parameters(self, prefix: str = "") -> list[tuple[str, Tensor]]:
        return (
            self.trunk.named_parameters(prefix + "trunk.")
            + self.mu_head.named_parameters(prefix + "mu_head.")
            + self.var_head.named_parameters(prefix + "var_head.")
        )

    def encode(self, x: Tensor) -> GaussianEmbedding:
        h = self.trunk(x)
        mu = self.mu_head(h)
        sigma2 = ad.add_scalar(ad.softplus(self.var_head(h)), VARIANCE_FLOOR)
        return GaussianEmbedding(mu=mu, sigma2=sigma2)


def encode(enc: ModalityEncoder, x: Tensor) -> GaussianEmbedding:
    return enc.encode(x)


def embed_sample(e: GaussianEmbedding, mode: str, rng: np.random.Generator | None = None) -> Tensor:
    """Train mode: reparameterized sample; eval mode: the mean, deterministically."""
    if mode == "train":
        if rng is None:
            raise ValueError("embed_sample: train mode needs an rng")
        return ad.gaussian_sample(e.mu, e.sigma2, rng)
    if mode == "eval":
        return e.mu
    raise ValueError(f"embed_sample: unknown mode {mode!r}")
