"""Small building blocks shared by the denoiser and the enhancer."""
from __future__ import annotations

import math

import numpy as np


class ParamSet:
    """Flat float64 parameter vector with named array views into it.

    Gradients live in a second flat buffer with identical views, so the
    optimizer only ever sees two 1-D arrays.
    """

    def __init__(self, shapes: dict[str, tuple[int, ...]]):
        self.shapes = dict(shapes)
        self.offsets = {}
        n = 0
        for name, shape in self.shapes.items():
            size = math.prod(shape)
            self.offsets[name] = (n, n + size)
            n += size
        self.flat = np.zeros(n)
        self.grad = np.zeros(n)

    @property
    def size(self) -> int:
        return self.flat.size

    def __getitem__(self, name) -> np.ndarray:
        a, b = self.offsets[name]
        return self.flat[a:b].reshape(self.shapes[name])

    def g(self, name) -> np.ndarray:
        a, b = self.offsets[name]
        return self.grad[a:b].reshape(self.shapes[name])

    def set_flat(self, values):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != self.flat.shape:
            raise ValueError(f"expected {self.flat.size} parameters, got {values.size}")
        self.flat[:] = values

    def zero_grad(self):
        self.grad[:] = 0.0


def timestep_embedding(t, dim: int) -> np.ndarray:
    """Sinusoidal embedding of integer steps, shape (len(t), dim)."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    half = dim // 2
    freqs = 10.0 ** (-4.0 * np.arange(half) / max(half - 1, 1))
    arg = t[:, None] * freqs[None, :]
    return np.concatenate([np.sin(arg), np.cos(arg)], axis=1)


class Adam:
    """Adam with bias correction over a flat parameter/gradient pair."""

    def __init__(self, size: int, lr: float = 2e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.step_count = 0

    def step(self, params: np.ndarray, grads: np.ndarray, lr: float | None = None):
        lr = self.lr if lr is None else lr
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        self.m *= b1
        self.m += (1 - b1) * grads
        self.v *= b2
        self.v += (1 - b2) * grads * grads
        m_hat = self.m / (1 - b1**self.step_count)
        v_hat = self.v / (1 - b2**self.step_count)
        params -= lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return params
