"""Unconditional DDPM over packet matrices (DiffWave-style).

Step indices are 1-based throughout: ``schedule.beta[t]`` for t in 1..T, with
index 0 holding the t = 0 conventions (beta 0, alpha_bar 1).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NoiseSchedule:
    beta: np.ndarray  # length T + 1, beta[0] = 0
    alpha: np.ndarray
    alpha_bar: np.ndarray

    @property
    def T(self) -> int:
        return len(self.beta) - 1

    @classmethod
    def from_betas(cls, betas) -> "NoiseSchedule":
        betas = np.asarray(betas, dtype=np.float64).reshape(-1)
        if betas.size < 1:
            raise ValueError("schedule needs at least one step")
        if np.any(betas <= 0) or np.any(betas >= 1):
            raise ValueError("every beta must lie in (0, 1)")
        beta = np.concatenate([[0.0], betas])
        alpha = 1.0 - beta
        alpha_bar = np.cumprod(alpha)
        for a in (beta, alpha, alpha_bar):
            a.setflags(write=False)
        return cls(beta, alpha, alpha_bar)

    def check_t(self, t, lo=1):
        if not lo <= t <= self.T:
            raise ValueError(f"step t={t} outside {lo}..{self.T}")

    def posterior_variance(self, t: int) -> float:
        """beta_tilde_t; equals beta_1 at t = 1."""
        self.check_t(t)
        if t == 1:
            return float(self.beta[1])
        ab = self.alpha_bar
        return float((1.0 - ab[t - 1]) / (1.0 - ab[t]) * self.beta[t])

    def reverse_coefficients(self, t: int) -> tuple[float, float]:
        """(c_y, c_eps) with mean = c_y * y_t - c_eps * eps_hat."""
        self.check_t(t)
        a = self.alpha[t]
        c_y = 1.0 / np.sqrt(a)
        c_eps = self.beta[t] / (np.sqrt(a) * np.sqrt(1.0 - self.alpha_bar[t]))
        return float(c_y), float(c_eps)


def linear_schedule(T: int = 50, beta_start: float = 1e-4, beta_end: float = 0.05) -> NoiseSchedule:
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if not 0 < beta_start <= beta_end < 1:
        raise ValueError(
            f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}"
        )
    return NoiseSchedule.from_betas(np.linspace(beta_start, beta_end, T))


def _same_shape(a, b, what="eps"):
    if np.shape(a) != np.shape(b):
        raise ValueError(f"{what} shape {np.shape(b)} does not match {np.shape(a)}")


def forward_marginal(y0, t: int, eps, s: NoiseSchedule) -> np.ndarray:
    """Closed-form q(y_t | y_0) draw for a given eps."""
    _same_shape(y0, eps)
    s.check_t(t)
    ab = s.alpha_bar[t]
    return np.sqrt(ab) * np.asarray(y0) + np.sqrt(1.0 - ab) * np.asarray(eps)


def forward_step(y_prev, t: int, s: NoiseSchedule, rng: np.random.Generator) -> np.ndarray:
    s.check_t(t)
    y_prev = np.asarray(y_prev, dtype=np.float64)
    z = rng.standard_normal(y_prev.shape)
    return np.sqrt(1.0 - s.beta[t]) * y_prev + np.sqrt(s.beta[t]) * z


def _predict(d, y, t, cond=None):
    out = d.predict(y, t, cond)
    _same_shape(y, out, "denoiser output")
    return out


def training_loss(d, y0, t: int, eps, s: NoiseSchedule) -> float:
    """Mean squared error between eps and the denoiser's prediction."""
    y_t = forward_marginal(y0, t, eps, s)
    return float(np.mean((np.asarray(eps) - _predict(d, y_t, t)) ** 2))


def reverse_step(d, y_t, t: int, s: NoiseSchedule, rng: np.random.Generator) -> np.ndarray:
    c_y, c_eps = s.reverse_coefficients(t)
    y_t = np.asarray(y_t, dtype=np.float64)
    mean = c_y * y_t - c_eps * _predict(d, y_t, t)
    if t == 1:
        return mean
    z = rng.standard_normal(y_t.shape)
    return mean + np.sqrt(s.posterior_variance(t)) * z


def sample(d, shape, s: NoiseSchedule, rng: np.random.Generator, init=None) -> np.ndarray:
    """Ancestral sampling from y_T ~ N(0, I) down to y_0.

    ``init`` replaces the prior draw (used to compare samplers from a common
    start); the inverse wavelet transform is left to the caller.
    """
    y = rng.standard_normal(shape) if init is None else np.array(init, dtype=np.float64)
    for t in range(s.T, 0, -1):
        y = reverse_step(d, y, t, s, rng)
    return y
