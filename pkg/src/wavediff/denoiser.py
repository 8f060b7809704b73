"""Noise predictors: closed-form Gaussian oracles and a tiny trainable net.

Every predictor exposes ``predict(y, t, cond=None)`` returning an array of
the same shape as ``y``; ``y`` is a packet matrix (C, F) or a batch
(B, C, F).
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Protocol

import numpy as np

from . import _backend
from .conditional import ConditionalSchedule, cond_forward, cond_training_target
from .diffusion import NoiseSchedule
from .nn import Adam, ParamSet, timestep_embedding


class Denoiser(Protocol):
    def predict(self, y: np.ndarray, t: int, cond: np.ndarray | None = None) -> np.ndarray:
        ...


class GaussianOracleDenoiser:
    """Exact E[eps | y_t] when y_0 ~ N(mu, diag(cov_diag))."""

    def __init__(self, mu, cov_diag, schedule: NoiseSchedule):
        self.mu = np.asarray(mu, dtype=np.float64)
        self.cov_diag = np.asarray(cov_diag, dtype=np.float64)
        if np.any(self.cov_diag < 0):
            raise ValueError("cov_diag must be non-negative")
        self.schedule = schedule

    def predict(self, y, t, cond=None):
        y = np.asarray(y, dtype=np.float64)
        if np.broadcast_shapes(y.shape, self.mu.shape, self.cov_diag.shape) != y.shape:
            raise ValueError(f"input shape {y.shape} does not match mu {self.mu.shape}")
        ab = self.schedule.alpha_bar[t]
        gain = np.sqrt(1.0 - ab) / (ab * self.cov_diag + (1.0 - ab))
        return gain * (y - np.sqrt(ab) * self.mu)


class ConditionalGaussianOracle:
    """Exact E[combined noise | y_t, yn] for y0 ~ N(mu, cov), yn = y0 + N(0, noise_var)."""

    def __init__(self, mu, cov_diag, noise_var, cs: ConditionalSchedule):
        self.mu = np.asarray(mu, dtype=np.float64)
        self.cov = np.asarray(cov_diag, dtype=np.float64)
        self.noise_var = np.asarray(noise_var, dtype=np.float64)
        self.cs = cs

    def posterior_y0(self, yn):
        """Mean and variance of y0 given the noisy observation alone."""
        k = self.cov / (self.cov + self.noise_var)
        return self.mu + k * (yn - self.mu), self.cov * (1 - k)

    def predict(self, y, t, cond=None):
        if cond is None:
            raise ValueError("conditional oracle needs the noisy packet as cond")
        y = np.asarray(y, dtype=np.float64)
        yn = np.asarray(cond, dtype=np.float64)
        ab = self.cs.base.alpha_bar[t]
        m = self.cs.m[t]
        a = np.sqrt(ab) * (1 - m)
        b = np.sqrt(ab) * m
        mp, vp = self.posterior_y0(yn)
        gain = vp * a / (a * a * vp + self.cs.delta[t])
        y0_hat = mp + gain * (y - a * mp - b * yn)
        return (y - np.sqrt(ab) * y0_hat) / np.sqrt(1.0 - ab)


@dataclass
class ArchSpec:
    channels: int = 2
    residual: int = 16
    kernel: int = 3
    dilations: tuple[int, ...] = (1, 2, 4, 8)
    emb_dim: int = 16
    cond_channels: int = 0

    def __post_init__(self):
        self.dilations = tuple(int(d) for d in self.dilations)
        if self.kernel % 2 == 0:
            raise ValueError("kernel size must be odd")
        if min(self.channels, self.residual, self.emb_dim) < 1 or self.cond_channels < 0:
            raise ValueError(f"invalid architecture {self}")

    @property
    def in_channels(self) -> int:
        return self.channels + self.cond_channels

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dilations"] = list(self.dilations)
        return d

    @classmethod
    def from_dict(cls, d) -> "ArchSpec":
        return cls(**d)


class BackwardBeforeForward(RuntimeError):
    pass


class TinyDenoiser:
    """1x1 input conv, dilated residual blocks with a timestep embedding, 1x1 output conv.

    Each block computes ``h += W_res tanh(conv_d(h + E_b emb(t)))``.
    """

    def __init__(self, arch: ArchSpec | None = None, seed: int | None = 0):
        self.arch = arch or ArchSpec()
        a = self.arch
        R, K = a.residual, a.kernel
        shapes = {"in_w": (R, a.in_channels, 1), "in_b": (R,)}
        for i in range(len(a.dilations)):
            shapes[f"emb{i}"] = (R, a.emb_dim)
            shapes[f"dil{i}_w"] = (R, R, K)
            shapes[f"dil{i}_b"] = (R,)
            shapes[f"res{i}_w"] = (R, R, 1)
            shapes[f"res{i}_b"] = (R,)
        shapes["out_w"] = (a.channels, R, 1)
        shapes["out_b"] = (a.channels,)
        self.params = ParamSet(shapes)
        self._cache = None
        if seed is not None:
            self.init_params(seed)

    def init_params(self, seed: int):
        rng = np.random.default_rng(seed)
        for name, shape in self.params.shapes.items():
            if name.endswith("_b"):
                continue
            fan_in = shape[1] * (shape[2] if len(shape) == 3 else 1)
            scale = 0.1 if name == "out_w" else 1.0
            self.params[name][...] = scale * rng.standard_normal(shape) / np.sqrt(fan_in)

    @property
    def n_params(self) -> int:
        return self.params.size

    def _prepare(self, y, t, cond):
        y = np.asarray(y, dtype=np.float64)
        single = y.ndim == 2
        x = y[None] if single else y
        if x.shape[1] != self.arch.channels:
            raise ValueError(f"expected {self.arch.channels} channels, got {x.shape[1]}")
        if self.arch.cond_channels:
            if cond is None:
                raise ValueError("conditional net needs cond")
            c = np.asarray(cond, dtype=np.float64)
            c = c[None] if c.ndim == 2 else c
            c = np.broadcast_to(c, (x.shape[0], self.arch.cond_channels, x.shape[2]))
            x = np.concatenate([x, c], axis=1)
        t = np.broadcast_to(np.asarray(t), (x.shape[0],))
        return x, t, single

    def forward(self, y, t, cond=None) -> np.ndarray:
        x, t, single = self._prepare(y, t, cond)
        p = self.params
        emb = timestep_embedding(t, self.arch.emb_dim)
        h = _backend.conv1d_forward(x, p["in_w"], p["in_b"])
        blocks = []
        for i, d in enumerate(self.arch.dilations):
            u = h + (emb @ p[f"emb{i}"].T)[:, :, None]
            a = np.tanh(_backend.conv1d_forward(u, p[f"dil{i}_w"], p[f"dil{i}_b"], d))
            r = _backend.conv1d_forward(a, p[f"res{i}_w"], p[f"res{i}_b"])
            blocks.append((u, a))
            h = h + r
        out = _backend.conv1d_forward(h, p["out_w"], p["out_b"])
        self._cache = (x, emb, blocks, h, single)
        return out[0] if single else out

    predict = forward

    def backward(self, gout) -> np.ndarray:
        """Accumulate d loss / d params into ``params.grad``; return d loss / d input."""
        if self._cache is None:
            raise BackwardBeforeForward("backward called before forward")
        x, emb, blocks, h, single = self._cache
        gout = np.asarray(gout, dtype=np.float64)
        if single:
            gout = gout[None]
        p = self.params
        gh, gw, gb = _backend.conv1d_backward(h, p["out_w"], gout)
        p.g("out_w")[...] += gw
        p.g("out_b")[...] += gb
        for i in range(len(self.arch.dilations) - 1, -1, -1):
            u, a = blocks[i]
            ga, gw, gb = _backend.conv1d_backward(a, p[f"res{i}_w"], gh)
            p.g(f"res{i}_w")[...] += gw
            p.g(f"res{i}_b")[...] += gb
            gz = ga * (1.0 - a * a)
            gu, gw, gb = _backend.conv1d_backward(u, p[f"dil{i}_w"], gz, self.arch.dilations[i])
            p.g(f"dil{i}_w")[...] += gw
            p.g(f"dil{i}_b")[...] += gb
            p.g(f"emb{i}")[...] += gu.sum(axis=2).T @ emb
            gh = gh + gu
        gx, gw, gb = _backend.conv1d_backward(x, p["in_w"], gh)
        p.g("in_w")[...] += gw
        p.g("in_b")[...] += gb
        gx = gx[:, : self.arch.channels]
        return gx[0] if single else gx


@dataclass
class TrainData:
    """Packets to train on: ``clean`` is (N, C, F); ``noisy`` only for enhancement."""

    clean: np.ndarray
    noisy: np.ndarray | None = None

    def __post_init__(self):
        self.clean = np.asarray(self.clean, dtype=np.float64)
        if self.clean.ndim == 2:
            self.clean = self.clean[None]
        if self.clean.ndim != 3 or self.clean.shape[0] == 0:
            raise ValueError("training data must be a non-empty (N, C, F) array")
        if self.noisy is not None:
            self.noisy = np.asarray(self.noisy, dtype=np.float64)
            if self.noisy.ndim == 2:
                self.noisy = self.noisy[None]
            if self.noisy.shape != self.clean.shape:
                raise ValueError("noisy packets must match clean packets in shape")


@dataclass
class Trainer:
    """Runs the wavelet-domain training loop on a trainable model.

    ``model`` needs ``forward``/``backward`` and a ``params`` ParamSet; with a
    ``cond_schedule`` the conditional objective is used.
    """

    model: object
    schedule: NoiseSchedule
    lr: float = 2e-4
    batch_size: int = 16
    cond_schedule: ConditionalSchedule | None = None
    optimizer: Adam = field(default=None)

    def __post_init__(self):
        if self.optimizer is None:
            self.optimizer = Adam(self.model.params.size, lr=self.lr)

    def batch_loss(self, y0, t, eps, yn=None, backward=True) -> float:
        ab = self.schedule.alpha_bar[t][:, None, None]
        if self.cond_schedule is None:
            y_t = np.sqrt(ab) * y0 + np.sqrt(1.0 - ab) * eps
            target, cond = eps, None
        else:
            cs = self.cond_schedule
            y_t = np.empty_like(y0)
            target = np.empty_like(y0)
            for i, ti in enumerate(t):
                y_t[i] = cond_forward(y0[i], yn[i], int(ti), eps[i], cs)
                # m_t = 0 collapses the target to eps; keep it exact
                target[i] = eps[i] if cs.m[ti] == 0.0 else cond_training_target(y0[i], yn[i], int(ti), eps[i], cs)
            cond = yn
        pred = self.model.forward(y_t, t, cond)
        diff = pred - target
        loss = float(np.mean(diff * diff))
        if backward:
            self.model.params.zero_grad()
            self.model.backward(2.0 * diff / diff.size)
        return loss

    def step(self, data: TrainData, rng: np.random.Generator) -> float:
        T = self.schedule.T
        idx = rng.integers(0, data.clean.shape[0], size=self.batch_size)
        t = rng.integers(1, T + 1, size=self.batch_size)
        y0 = data.clean[idx]
        eps = rng.standard_normal(y0.shape)
        yn = None
        if self.cond_schedule is not None:
            yn = data.clean[idx] if data.noisy is None else data.noisy[idx]
        loss = self.batch_loss(y0, t, eps, yn)
        self.optimizer.step(self.model.params.flat, self.model.params.grad)
        return loss


def train_loop(model, data, schedule: NoiseSchedule, steps: int, rng: np.random.Generator,
               lr: float = 2e-4, batch_size: int = 16,
               cond_schedule: ConditionalSchedule | None = None,
               optimizer: Adam | None = None) -> list[float]:
    """Sample items, steps and noise; take an Adam step per batch; return the losses."""
    if not isinstance(data, TrainData):
        data = TrainData(data)
    trainer = Trainer(model, schedule, lr, batch_size, cond_schedule, optimizer)
    return [trainer.step(data, rng) for _ in range(int(steps))]


def adam_step(model, opt: Adam, lr: float | None = None) -> np.ndarray:
    return opt.step(model.params.flat, model.params.grad, lr)
