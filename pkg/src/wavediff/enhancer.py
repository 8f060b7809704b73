"""Low-frequency enhancement front-ends applied to packets before the denoiser.

A FrequencyBottleneckBlock computes ``g * (p + conv2(tanh(conv1(p))))`` per
channel.  At initialization the output conv and biases are zero and the
gains are one, so the block is the identity while ``conv1`` still receives
gradient once ``conv2`` moves.
"""
from __future__ import annotations

import numpy as np

from . import _backend
from .nn import ParamSet


class FrequencyBottleneckBlock:
    def __init__(self, channels: int, detail_mask=None, detail_gain: float = 1.0,
                 kernel: int = 3, seed: int | None = 0):
        self.channels = int(channels)
        self.kernel = int(kernel)
        hidden = 2 * self.channels
        if detail_mask is None:
            detail_mask = np.arange(self.channels) >= self.channels // 2
        self.detail_mask = np.asarray(detail_mask, dtype=bool)
        if self.detail_mask.shape != (self.channels,):
            raise ValueError("detail_mask needs one entry per channel")
        self.params = ParamSet({
            "w1": (hidden, self.channels, self.kernel),
            "b1": (hidden,),
            "w2": (self.channels, hidden, self.kernel),
            "b2": (self.channels,),
            "gain": (self.channels,),
        })
        if seed is not None:
            rng = np.random.default_rng(seed)
            self.params["w1"][...] = rng.standard_normal(self.params.shapes["w1"]) / np.sqrt(self.channels * self.kernel)
        self.params["gain"][...] = np.where(self.detail_mask, detail_gain, 1.0)
        self._cache = None

    def _check(self, p):
        if p.shape[1] != self.channels:
            raise ValueError(f"block expects {self.channels} channels, got {p.shape[1]}")

    def forward(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=np.float64)
        single = p.ndim == 2
        x = p[None] if single else p
        self._check(x)
        P = self.params
        a = np.tanh(_backend.conv1d_forward(x, P["w1"], P["b1"]))
        s = x + _backend.conv1d_forward(a, P["w2"], P["b2"])
        out = P["gain"][None, :, None] * s
        self._cache = (x, a, s, single)
        return out[0] if single else out

    apply = forward

    def backward(self, gout) -> np.ndarray:
        if self._cache is None:
            raise RuntimeError("backward called before forward")
        x, a, s, single = self._cache
        gout = np.asarray(gout, dtype=np.float64)
        gout = gout[None] if single else gout
        P = self.params
        P.g("gain")[...] += (gout * s).sum(axis=(0, 2))
        gs = gout * P["gain"][None, :, None]
        ga, gw, gb = _backend.conv1d_backward(a, P["w2"], gs)
        P.g("w2")[...] += gw
        P.g("b2")[...] += gb
        gz = ga * (1.0 - a * a)
        gx, gw, gb = _backend.conv1d_backward(x, P["w1"], gz)
        P.g("w1")[...] += gw
        P.g("b1")[...] += gb
        gx = gx + gs
        return gx[0] if single else gx


def level_channels(levels: int, level: int) -> tuple[slice, np.ndarray]:
    """Channel slice and detail mask handled by the block of ``level``.

    The level-``j`` block covers the rows that make up ``cA_{j-1}`` in the
    packed layout (the first ``2**(levels - j + 1)`` rows); its detail rows
    are the ``cD_j`` group.
    """
    if not 1 <= level <= levels:
        raise ValueError(f"level {level} outside 1..{levels}")
    width = 2 ** (levels - level + 1)
    mask = np.arange(width) >= width // 2
    return slice(0, width), mask


class MultiLevelEnhancer:
    """One bottleneck block per level, applied coarse to fine."""

    def __init__(self, levels: int, detail_gain: float = 1.0, kernel: int = 3, seed: int = 0):
        if levels < 1:
            raise ValueError("levels must be >= 1")
        self.levels = int(levels)
        self.routes = {}
        self.blocks = {}
        for j in range(self.levels, 0, -1):
            sl, mask = level_channels(self.levels, j)
            self.routes[j] = sl
            self.blocks[j] = FrequencyBottleneckBlock(sl.stop, mask, detail_gain, kernel, seed + j)
        sizes = {f"level{j}": (b.params.size,) for j, b in self.blocks.items()}
        self.params = ParamSet(sizes)
        # rebind each block's storage onto the shared flat vectors
        for j, b in self.blocks.items():
            lo, hi = self.params.offsets[f"level{j}"]
            self.params.flat[lo:hi] = b.params.flat
            b.params.flat = self.params.flat[lo:hi]
            b.params.grad = self.params.grad[lo:hi]
        self._order = list(range(self.levels, 0, -1))

    @property
    def channels(self) -> int:
        return 2 ** self.levels

    def forward(self, p, levels: int | None = None) -> np.ndarray:
        if levels is not None and levels != self.levels:
            raise ValueError(f"enhancer built for {self.levels} levels, packet has {levels}")
        p = np.asarray(p, dtype=np.float64)
        single = p.ndim == 2
        x = p[None] if single else p
        if x.shape[1] != self.channels:
            raise ValueError(f"expected {self.channels} channels, got {x.shape[1]}")
        for j in self._order:
            sl = self.routes[j]
            # fresh array per level: the block caches a view of its input
            y = x.copy()
            y[:, sl] = self.blocks[j].forward(x[:, sl])
            x = y
        return x[0] if single else x

    apply = forward

    def backward(self, gout) -> np.ndarray:
        g = np.asarray(gout, dtype=np.float64)
        single = g.ndim == 2
        g = g[None] if single else g
        for j in reversed(self._order):
            sl = self.routes[j]
            h = g.copy()
            h[:, sl] = self.blocks[j].backward(g[:, sl])
            g = h
        return g[0] if single else g


def fbb_apply(block: FrequencyBottleneckBlock, p) -> np.ndarray:
    return block.forward(p)


def mlenh_apply(enh: MultiLevelEnhancer, p, levels: int) -> np.ndarray:
    return enh.forward(p, levels)


class EnhancedDenoiser:
    """Enhancer front-end feeding a trainable denoiser; trains both jointly."""

    def __init__(self, enhancer, denoiser):
        self.enhancer = enhancer
        self.denoiser = denoiser
        n1, n2 = enhancer.params.size, denoiser.params.size
        self.params = ParamSet({"enhancer": (n1,), "denoiser": (n2,)})
        self.params.flat[:n1] = enhancer.params.flat
        self.params.flat[n1:] = denoiser.params.flat
        _rebind(enhancer, self.params, 0, n1)
        _rebind(denoiser, self.params, n1, n1 + n2)

    @property
    def arch(self):
        return self.denoiser.arch

    def forward(self, y, t, cond=None):
        return self.denoiser.forward(self.enhancer.forward(y), t, cond)

    predict = forward

    def backward(self, gout):
        return self.enhancer.backward(self.denoiser.backward(gout))


def _rebind(module, params, lo, hi):
    flat, grad = params.flat[lo:hi], params.grad[lo:hi]
    if isinstance(module, MultiLevelEnhancer):
        for j, b in module.blocks.items():
            a, c = module.params.offsets[f"level{j}"]
            b.params.flat = flat[a:c]
            b.params.grad = grad[a:c]
    module.params.flat = flat
    module.params.grad = grad
