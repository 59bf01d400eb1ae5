"""Tiny numpy MLPs with hand-written backpropagation, plus Adam."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DimensionError, DivergenceError

__all__ = ["ACTIVATIONS", "Layer", "MlpNet", "Adam", "sinusoidal_embedding", "frame_embedding"]

ACTIVATIONS = ("linear", "tanh", "silu", "sigmoid")


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _activate(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == "linear":
        return z
    if kind == "tanh":
        return np.tanh(z)
    if kind == "silu":
        return z * _sigmoid(z)
    if kind == "sigmoid":
        return _sigmoid(z)
    raise ValueError(f"unknown activation {kind!r}")


def _activation_grad(kind: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if kind == "linear":
        return np.ones_like(z)
    if kind == "tanh":
        return 1.0 - a**2
    if kind == "silu":
        s = _sigmoid(z)
        return s * (1.0 + z * (1.0 - s))
    if kind == "sigmoid":
        return a * (1.0 - a)
    raise ValueError(f"unknown activation {kind!r}")


@dataclass
class Layer:
    weight: np.ndarray  # (fan_in, fan_out)
    bias: np.ndarray  # (fan_out,)
    activation: str = "linear"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[1],):
            raise DimensionError(f"bad layer shapes {self.weight.shape}, {self.bias.shape}")


class MlpNet:
    """Stack of dense layers applied row-wise to a 2-D input.

    ``forward`` caches what ``backward`` needs, so one instance must not be
    shared between threads while training.
    """

    def __init__(self, layers: list[Layer]):
        for a, b in zip(layers, layers[1:]):
            if a.weight.shape[1] != b.weight.shape[0]:
                raise DimensionError(f"layer dims {a.weight.shape} -> {b.weight.shape} do not chain")
        self.layers = layers
        self.grads = [(np.zeros_like(l.weight), np.zeros_like(l.bias)) for l in layers]
        self._cache: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []

    @classmethod
    def create(cls, sizes, activations, rng: np.random.Generator, last_scale: float = 1.0) -> "MlpNet":
        """Random init with ``N(0, 1/fan_in)`` weights and zero biases."""
        if len(activations) != len(sizes) - 1:
            raise ValueError("need one activation per layer")
        layers = []
        for i, (fan_in, fan_out, act) in enumerate(zip(sizes[:-1], sizes[1:], activations)):
            w = rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in)
            if i == len(activations) - 1:
                w *= last_scale
            layers.append(Layer(w, np.zeros(fan_out), act))
        return cls(layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].weight.shape[0]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].weight.shape[1]

    def parameters(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out += [layer.weight, layer.bias]
        return out

    def gradients(self) -> list[np.ndarray]:
        out = []
        for gw, gb in self.grads:
            out += [gw, gb]
        return out

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.parameters())

    def zero_grad(self) -> None:
        for gw, gb in self.grads:
            gw.fill(0.0)
            gb.fill(0.0)

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise DimensionError(f"expected (rows, {self.in_dim}) input, got {x.shape}")
        self._cache = []
        for layer in self.layers:
            z = x @ layer.weight + layer.bias
            a = _activate(layer.activation, z)
            self._cache.append((x, z, a))
            x = a
        return x

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        """Accumulate parameter gradients from ``dL/d(output)``; return ``dL/d(input)``."""
        if not self._cache:
            raise RuntimeError("backward called before forward")
        g = grad_out
        for layer, (gw, gb), (x, z, a) in zip(reversed(self.layers), reversed(self.grads), reversed(self._cache)):
            g = g * _activation_grad(layer.activation, z, a)
            gw += x.T @ g
            gb += g.sum(axis=0)
            g = g @ layer.weight.T
        return g

    def check_finite(self) -> None:
        for p in self.parameters():
            if not np.all(np.isfinite(p)):
                raise DivergenceError("non-finite network parameter")


class Adam:
    """Adam over a fixed list of parameter arrays, updated in place."""

    def __init__(self, params: list[np.ndarray], lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.step_count = 0

    def step(self, grads: list[np.ndarray]) -> None:
        self.step_count += 1
        c1 = 1.0 - self.b1**self.step_count
        c2 = 1.0 - self.b2**self.step_count
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@lru_cache(maxsize=None)
def _frequencies(n: int, max_freq: float) -> np.ndarray:
    freqs = np.geomspace(1.0, max_freq, n)
    freqs.flags.writeable = False
    return freqs


def sinusoidal_embedding(t, dim: int = 16, max_freq: float = 1000.0) -> np.ndarray:
    """``[sin(w t), cos(w t)]`` for ``dim // 2`` frequencies geometric in ``[1, max_freq]``."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    ang = t[:, None] * _frequencies(dim // 2, max_freq)[None, :]
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=1)


def frame_embedding(n_frames: int, n_harmonics: int = 4) -> np.ndarray:
    """Periodic position features ``sin/cos(2 pi j n / N)`` for ``j = 1..n_harmonics``."""
    n = np.arange(n_frames)[:, None]
    j = np.arange(1, n_harmonics + 1)[None, :]
    ang = 2.0 * np.pi * j * n / n_frames
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=1)
