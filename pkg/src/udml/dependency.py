"""Modality-dependency calculator based on modality dropout."""

from __future__ import annotations

import numpy as np

ALPHA_FLOOR = 0.05


def dependency_scores(pi_full: np.ndarray, pi_dropped: list[np.ndarray]) -> np.ndarray:
    """d[m] = batch-mean L1 distance between full logits and drop-m logits."""
    pi_full = np.asarray(pi_full, dtype=np.float64)
    out = np.empty(len(pi_dropped))
    for m, pi in enumerate(pi_dropped):
        pi = np.asarray(pi, dtype=np.float64)
        if pi.shape != pi_full.shape:
            raise ValueError(f"dependency_scores: shapes {pi.shape} vs {pi_full.shape}")
        out[m] = np.abs(pi_full - pi).sum(axis=-1).mean()
    return out


def normalize_alpha(d, num_modalities: int, floor: float = ALPHA_FLOOR) -> np.ndarray:
    """alpha[m] = M * d[m] / sum(d), clamped to >= floor, with sum(alpha) == M.

    All-zero scores fall back to uniform coefficients.
    """
    d = np.asarray(d, dtype=np.float64)
    if np.any(d < 0):
        raise ValueError("normalize_alpha: scores must be nonnegative")
    m = int(num_modalities)
    total = d.sum()
    if total == 0.0:
        return np.ones(m)
    alpha = m * d / total
    # Clamp to the floor and redistribute the remaining mass; a pass may push
    # more entries under the floor, so iterate (at most m times).
    for _ in range(m):
        low = alpha < floor
        if not low.any():
            break
        free = ~low
        alpha[low] = floor
        alpha[free] *= (m - floor * low.sum()) / alpha[free].sum()
    # Force the sum to be exactly M by absorbing rounding in the largest entry.
    j = int(np.argmax(alpha))
    alpha[j] = m - (alpha.sum() - alpha[j])
    # Summation rounding can leave an ulp-scale residue. Walk it off by ulp
    # steps; depending on where an entry sits in the summation tree the result
    # can straddle the target, so try entries in turn and revert misses.
    for k in np.argsort(alpha):
        saved = alpha[k]
        for _ in range(512):
            err = alpha.sum() - m
            if err == 0.0:
                return alpha
            alpha[k] = np.nextafter(alpha[k], alpha[k] - err)
        alpha[k] = saved
    return alpha


class DependencyState:
    """EMA of dependency scores and the derived coefficients alpha."""

    def __init__(self, num_modalities: int, decay: float = 0.99):
        if not 0.0 <= decay < 1.0:
            raise ValueError("DependencyState: decay must be in [0, 1)")
        self.num_modalities = int(num_modalities)
        self.decay = float(decay)
        self.alpha = np.ones(self.num_modalities)
        self.raw_d_ema = np.zeros(self.num_modalities)

    def update(self, d) -> None:
        d = np.asarray(d, dtype=np.float64)
        self.raw_d_ema = self.decay * self.raw_d_ema + (1.0 - self.decay) * d
        self.alpha = normalize_alpha(self.raw_d_ema, self.num_modalities)


def drop_modality_logits(model, features: list[np.ndarray], dropped: int) -> np.ndarray:
    """Eval-mode logits with one modality's embedding zeroed out.

    The model must expose modality_logits(features, keep) reusing the shared
    fusion head; this is a thin named entry point over it.
    """
    num = len(features)
    if not 0 <= dropped < num:
        raise IndexError(f"drop_modality_logits: modality {dropped} out of range for {num}")
    keep = [m for m in range(num) if m != dropped]
    return model.modality_logits(features, keep)
