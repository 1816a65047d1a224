"""Linear layers, MLPs, optimizers and parameter checkpointing."""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


class Linear:
    """Affine map x @ W.T + b with weight [out, in] and bias [out]."""

    def __init__(self, in_dim: int, out_dim: int):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.weight = Tensor(np.zeros((out_dim, in_dim)), requires_grad=True)
        self.bias = Tensor(np.zeros(out_dim), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return ad.add_rowvec(ad.matmul(x, ad.transpose(self.weight)), self.bias)

    def init(self, rng: np.random.Generator) -> None:
        # Glorot-uniform weights, zero biases.
        s = math.sqrt(6.0 / (self.in_dim + self.out_dim))
        self.weight.data[...] = rng.uniform(-s, s, size=self.weight.shape)
        self.bias.data[...] = 0.0

    def named_parameters(self, prefix: str = "") -> list[tuple[str, Tensor]]:
        return [(prefix + "weight", self.weight), (prefix + "bias", self.bias)]


class Mlp:
    """Chain of Linear layers with relu between them (none after the last)."""

    def __init__(self, dims: Sequence[int]):
        if len(dims) < 2:
            raise ValueError("Mlp: needs at least one layer (two dims)")
        self.layers = [Linear(dims[i], dims[i + 1]) for i in range(len(dims) - 1)]

    def __call__(self, x: Tensor) -> Tensor:
        for layer in self.layers[:-1]:
            x = ad.relu(layer(x))
        return self.layers[-1](x)

    def init(self, rng: np.random.Generator) -> None:
        for layer in self.layers:
            layer.init(rng)

    def named_parameters(self, prefix: str = "") -> list[tuple[str, Tensor]]:
        out: list[tuple[str, Tensor]] = []
        for i, layer in enumerate(self.layers):
            out.extend(layer.named_parameters(f"{prefix}{i}."))
        return out


def init_params(module, rng: np.random.Generator) -> None:
    module.init(rng)


def _grads(params: Sequence[Tensor]) -> list[np.ndarray]:
    gs = []
    for p in params:
        if p.grad is None:
            raise RuntimeError("optimizer step with a missing gradient")
        gs.append(p.grad)
    return gs


class Sgd:
    """SGD with classical momentum and optional L2 weight decay."""

    def __init__(self, params: Sequence[Tensor], lr: float, momentum: float = 0.0,
                 weight_decay: float = 0.0):
        self.params = list(params)
        self.lr = float(lr)
        self.momentum = float(momentum)
        self.weight_decay = float(weight_decay)
        self.bufs = [np.zeros_like(p.data) for p in self.params]
        self.step_count = 0

    def step(self) -> None:
        for p, buf, g in zip(self.params, self.bufs, _grads(self.params)):
            if self.weight_decay:
                g = g + self.weight_decay * p.data
            buf *= self.momentum
            buf += g
            p.data -= self.lr * buf
        self.step_count += 1


class Adam:
    def __init__(self, params: Sequence[Tensor], lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8, weight_decay: float = 0.0):
        self.params = list(params)
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.weight_decay = float(weight_decay)
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.step_count = 0

    def step(self) -> None:
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for p, m, v, g in zip(self.params, self.m, self.v, _grads(self.params)):
            if self.weight_decay:
                g = g + self.weight_decay * p.data
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def make_optimizer(kind: str, params: Sequence[Tensor], lr: float,
                   momentum: float = 0.9, weight_decay: float = 0.0):
    if kind == "sgd":
        return Sgd(params, lr, momentum=momentum, weight_decay=weight_decay)
    if kind == "adam":
        return Adam(params, lr, weight_decay=weight_decay)
    raise ValueError(f"unknown optimizer kind: {kind!r}")


class ReduceOnPlateau:
    """Halve the learning rate when the tracked loss stalls; never raise it."""

    def __init__(self, optimizer, factor: float = 0.5, patience: int = 5):
        self.optimizer = optimizer
        self.factor = float(factor)
        self.patience = int(patience)
        self.best = math.inf
        self.stale = 0

    def step(self, value: float) -> None:
        if value < self.best:
            self.best = value
            self.stale = 0
            return
        self.stale += 1
        if self.stale > self.patience:
            self.optimizer.lr *= self.factor
            self.stale = 0


def save_checkpoint(path, named_arrays: Iterable[tuple[str, np.ndarray]]) -> None:
    """Text manifest (`name dims...` per line), blank line, then raw <f8 data."""
    items = [(name, np.asarray(arr, dtype=np.float64)) for name, arr in named_arrays]
    with open(path, "wb") as f:
        for name, arr in items:
            dims = " ".join(str(d) for d in arr.shape)
            f.write(f"{name} {dims}".rstrip().encode() + b"\n")
        f.write(b"\n")
        for _, arr in items:
            f.write(np.ascontiguousarray(arr).astype("<f8").tobytes())


def load_checkpoint(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as f:
        blob = f.read()
    header, _, payload = blob.partition(b"\n\n")
    out: dict[str, np.ndarray] = {}
    offset = 0
    for line in header.decode().splitlines():
        parts = line.split()
        name, dims = parts[0], tuple(int(d) for d in parts[1:])
        count = int(np.prod(dims)) if dims else 1
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=offset)
        out[name] = arr.reshape(dims).astype(np.float64)
        offset += count * 8
    return out
