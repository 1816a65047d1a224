"""Synthetic multimodal benchmark: generation, corruption, file format."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np


@dataclass
class ModalitySpec:
    feat_dim: int = 20
    separation: float = 3.0
    warp: str = "none"  # none | nonlinear
    intra_class_std: float = 1.0

    def __post_init__(self):
        if self.feat_dim < 2:
            raise ValueError("ModalitySpec: feat_dim must be >= 2")
        if self.separation < 0:
            raise ValueError("ModalitySpec: separation must be nonnegative")
        if self.warp not in ("none", "nonlinear"):
            raise ValueError(f"ModalitySpec: unknown warp {self.warp!r}")


@dataclass
class SyntheticSpec:
    num_classes: int = 6
    modalities: list[ModalitySpec] = field(default_factory=lambda: [
        ModalitySpec(separation=3.0, warp="none"),
        ModalitySpec(separation=2.0, warp="nonlinear"),
    ])
    n_train: int = 6000
    n_val: int = 1000
    n_test: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("SyntheticSpec: num_classes must be >= 2")
        if not self.modalities:
            raise ValueError("SyntheticSpec: needs at least one modality")


@dataclass
class ModalityBatch:
    """Per-modality feature arrays sharing one label vector."""

    features: list[np.ndarray]
    labels: np.ndarray
    corruption_tags: list[dict | None] | None = None

    @property
    def size(self) -> int:
        return len(self.labels)

    def take(self, idx) -> "ModalityBatch":
        tags = None
        if self.corruption_tags is not None:
            tags = [self.corruption_tags[i] for i in idx]
        return ModalityBatch([f[idx] for f in self.features], self.labels[idx], tags)


@dataclass
class SyntheticDataset:
    num_classes: int
    feat_dims: list[int]
    train: ModalityBatch
    val: ModalityBatch
    test: ModalityBatch
    # per-modality (mean, std) of the train split, used by salt corruption
    feature_stats: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)

    def __post_init__(self):
        if not self.feature_stats:
            self.feature_stats = [
                (f.mean(axis=0), f.std(axis=0)) for f in self.train.features
            ]


def _random_rotation(dim: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))[None, :]


class _Warp:
    """Fixed invertible nonlinearity: rotate, elementwise x + tanh(x), rotate."""

    def __init__(self, dim: int, rng: np.random.Generator):
        self.r1 = _random_rotation(dim, rng)
        self.r2 = _random_rotation(dim, rng)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        y = x @ self.r1.T
        y = y + np.tanh(y)
        return y @ self.r2.T


def generate(spec: SyntheticSpec) -> SyntheticDataset:
    """Class means on a sphere of radius `separation`, Gaussian spread, optional warp."""
    rng = np.random.default_rng(spec.seed)
    k = spec.num_classes
    means = []
    warps = []
    for mspec in spec.modalities:
        u = rng.standard_normal((k, mspec.feat_dim))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        means.append(mspec.separation * u)
        warps.append(_Warp(mspec.feat_dim, rng) if mspec.warp == "nonlinear" else None)

    def make_split(n: int) -> ModalityBatch:
        labels = rng.integers(0, k, size=n)
        feats = []
        for mspec, mu, warp in zip(spec.modalities, means, warps):
            x = mu[labels] + mspec.intra_class_std * rng.standard_normal((n, mspec.feat_dim))
            if warp is not None:
                x = warp(x)
            feats.append(x)
        return ModalityBatch(feats, labels)

    train = make_split(spec.n_train)
    val = make_split(spec.n_val)
    test = make_split(spec.n_test)
    return SyntheticDataset(
        num_classes=k,
        feat_dims=[m.feat_dim for m in spec.modalities],
        train=train,
        val=val,
        test=test,
    )


def inject_gaussian(x: np.ndarray, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    """Additive zero-mean noise with standard deviation epsilon."""
    if epsilon < 0:
        raise ValueError("inject_gaussian: epsilon must be nonnegative")
    if epsilon == 0:
        return x.copy()
    return x + epsilon * rng.standard_normal(x.shape)


def inject_salt(x: np.ndarray, epsilon: float, rng: np.random.Generator,
                mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    """Impulse corruption: coordinates replaced by mean +/- 5 std with p = min(.5, eps/20)."""
    if epsilon < 0:
        raise ValueError("inject_salt: epsilon must be nonnegative")
    p = min(0.5, epsilon / 20.0)
    if p == 0:
        return x.copy()
    mask = rng.random(x.shape) < p
    signs = np.where(rng.random(x.shape) < 0.5, -1.0, 1.0)
    extremes = mean[None, :] + signs * 5.0 * std[None, :]
    return np.where(mask, extremes, x)


def _inject(kind: str, x: np.ndarray, epsilon: float, rng: np.random.Generator,
            stats: tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    if kind == "gaussian":
        return inject_gaussian(x, epsilon, rng)
    if kind == "salt":
        return inject_salt(x, epsilon, rng, stats[0], stats[1])
    raise ValueError(f"unknown corruption kind {kind!r}")


def corrupt_split(batch: ModalityBatch, fraction: float, kind: str, epsilon: float,
                  rng: np.random.Generator,
                  feature_stats: list[tuple[np.ndarray, np.ndarray]] | None = None,
                  modality: int | None = None) -> ModalityBatch:
    """Corrupt one modality of a random `fraction` of samples at level epsilon.

    The afflicted modality is chosen uniformly per sample unless `modality`
    pins it. Tags record the per-sample choice.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("corrupt_split: fraction must be in [0, 1]")
    n = batch.size
    num_modalities = len(batch.features)
    feats = [f.copy() for f in batch.features]
    tags: list[dict | None] = [None] * n
    if fraction > 0 and epsilon >= 0:
        n_hit = int(round(fraction * n))
        hit = rng.choice(n, size=n_hit, replace=False)
        if modality is None:
            which = rng.integers(0, num_modalities, size=n_hit)
        else:
            if not 0 <= modality < num_modalities:
                raise IndexError(f"corrupt_split: modality {modality} out of range")
            which = np.full(n_hit, modality)
        for m in range(num_modalities):
            rows = hit[which == m]
            if rows.size == 0:
                continue
            stats = feature_stats[m] if feature_stats else (
                feats[m].mean(axis=0), feats[m].std(axis=0))
            feats[m][rows] = _inject(kind, feats[m][rows], epsilon, rng, stats)
        for i, m in zip(hit, which):
            tags[int(i)] = {"modality": int(m), "kind": kind, "epsilon": float(epsilon)}
    return ModalityBatch(feats, batch.labels.copy(), tags)


# ---------------------------------------------------------------------------
# File format: `# udml-dataset v1 K=<K> M=<M> dims=<d1,d2,...>` header, then
# one CSV row per sample: label, m1 features..., m2 features..., ...

def save_split(path: str, batch: ModalityBatch, num_classes: int) -> None:
    dims = ",".join(str(f.shape[1]) for f in batch.features)
    with open(path, "w", newline="\n") as f:
        f.write(f"# udml-dataset v1 K={num_classes} M={len(batch.features)} dims={dims}\n")
        for i in range(batch.size):
            row = [str(int(batch.labels[i]))]
            for feats in batch.features:
                row.extend(format(v, ".17g") for v in feats[i])
            f.write(",".join(row) + "\n")


def load_split(path: str) -> tuple[ModalityBatch, int]:
    with open(path) as f:
        header = f.readline().strip()
        if not header.startswith("# udml-dataset v1 "):
            raise ValueError(f"{path}: not a udml dataset file")
        fields = dict(part.split("=", 1) for part in header.split()[3:])
        k = int(fields["K"])
        dims = [int(d) for d in fields["dims"].split(",")]
        if len(dims) != int(fields["M"]):
            raise ValueError(f"{path}: M does not match dims")
        labels = []
        cols: list[list[list[float]]] = [[] for _ in dims]
        for line in f:
            parts = line.rstrip("\n").split(",")
            labels.append(int(parts[0]))
            off = 1
            for m, d in enumerate(dims):
                cols[m].append([float(v) for v in parts[off:off + d]])
                off += d
    feats = [np.asarray(c, dtype=np.float64).reshape(len(labels), d)
             for c, d in zip(cols, dims)]
    return ModalityBatch(feats, np.asarray(labels, dtype=np.int64)), k


SPLIT_FILES = ("train.csv", "val.csv", "test.csv")


def save_dataset(outdir: str, ds: SyntheticDataset) -> None:
    os.makedirs(outdir, exist_ok=True)
    for name, batch in zip(SPLIT_FILES, (ds.train, ds.val, ds.test)):
        save_split(os.path.join(outdir, name), batch, ds.num_classes)


def load_dataset(indir: str) -> SyntheticDataset:
    splits = []
    k = None
    for name in SPLIT_FILES:
        batch, kk = load_split(os.path.join(indir, name))
        splits.append(batch)
        k = kk if k is None else k
        if kk != k:
            raise ValueError(f"{name}: class count differs across splits")
    train, val, test = splits
    return SyntheticDataset(
        num_classes=k,
        feat_dims=[f.shape[1] for f in train.features],
        train=train,
        val=val,
        test=test,
    )
