"""Fusion strategies: weight computation and weighted concatenation."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .nn import Linear

STRATEGIES = ("static", "pe", "udml")


class FusionHead:
    """Linear classifier over the (weighted) concatenation of embeddings."""

    def __init__(self, num_modalities: int, embed_dim: int, num_classes: int,
                 strategy: str = "udml"):
        if strategy not in STRATEGIES:
            raise ValueError(f"FusionHead: unknown strategy {strategy!r}")
        self.num_modalities = num_modalities
        self.embed_dim = embed_dim
        self.num_classes = num_classes
        self.strategy = strategy
        self.classifier = Linear(num_modalities * embed_dim, num_classes)

    def init(self, rng: np.random.Generator) -> None:
        self.classifier.init(rng)

    def named_parameters(self, prefix: str = "") -> list[tuple[str, Tensor]]:
        return self.classifier.named_parameters(prefix + "classifier.")


def uniform_weights(batch: int, num_modalities: int) -> np.ndarray:
    return np.full((batch, num_modalities), 1.0 / num_modalities)


def unbiased_weights(rho: np.ndarray, alpha) -> np.ndarray:
    """Row-normalized 1 / (rho * alpha); rho is [batch, M], alpha is [M]."""
    rho = np.asarray(rho, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    inv = 1.0 / (rho * alpha[None, :])
    return inv / inv.sum(axis=1, keepdims=True)


def pe_baseline_weights(sigma2: list[np.ndarray]) -> np.ndarray:
    """Probabilistic-embedding baseline: weights from inverse mean variance."""
    s = np.stack([np.asarray(v, dtype=np.float64).mean(axis=1) for v in sigma2], axis=1)
    inv = 1.0 / s
    return inv / inv.sum(axis=1, keepdims=True)


def fuse(head: FusionHead, z: list[Tensor], w: np.ndarray | None) -> Tensor:
    """Scale each modality by M * w[:, m], concatenate, classify.

    w=None means static fusion: uniform weights, i.e. scale factors of 1.
    """
    if len(z) != head.num_modalities:
        raise ad.ShapeError(
            f"fuse: got {len(z)} embeddings for {head.num_modalities} modalities"
        )
    m = head.num_modalities
    batch = z[0].shape[0]
    if w is None:
        w = uniform_weights(batch, m)
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (batch, m):
        raise ad.ShapeError(f"fuse: weights shape {w.shape}, expected {(batch, m)}")
    scaled = [ad.scale_rows(z[k], Tensor(m * w[:, k])) for k in range(m)]
    return head.classifier(ad.concat(scaled, axis=1))
