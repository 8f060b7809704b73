"""Conditional (CDiffuSE-style) diffusion between clean and noisy packets.

The forward marginal interpolates the clean packet ``y0`` towards the noisy
packet ``yn``::

    q(y_t | y0, yn) = N((1 - m_t) sqrt(abar_t) y0 + m_t sqrt(abar_t) yn, delta_t I)
    delta_t = (1 - abar_t) - m_t**2 abar_t

and the one-step transition consistent with it is
``y_t = A_t y_{t-1} + B_t yn + N(0, delta_{t|t-1})`` with
``A_t = (1 - m_t) / (1 - m_{t-1}) sqrt(alpha_t)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffusion import NoiseSchedule, _predict, _same_shape


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class ConditionalSchedule:
    base: NoiseSchedule
    m: np.ndarray  # length T + 1, m[0] = 0
    delta: np.ndarray  # length T + 1, delta[0] = 0
    kind: str = "custom"

    @property
    def T(self) -> int:
        return self.base.T

    @property
    def is_unconditional(self) -> bool:
        return not np.any(self.m)

    def transition(self, t: int) -> tuple[float, float, float]:
        """(A_t, B_t, delta_{t|t-1}) of the one-step forward kernel."""
        self.base.check_t(t)
        m, d, ab = self.m, self.delta, self.base.alpha_bar
        alpha = self.base.alpha[t]
        ratio = (1.0 - m[t]) / (1.0 - m[t - 1])
        A = ratio * np.sqrt(alpha)
        B = np.sqrt(ab[t]) * (m[t] - ratio * m[t - 1])
        var = d[t] - ratio**2 * alpha * d[t - 1]
        return float(A), float(B), float(var)


@dataclass(frozen=True)
class ReverseCoefficients:
    c_yt: float
    c_yn: float
    c_eps: float
    delta_cond: float


def _m_values(base: NoiseSchedule, spec) -> tuple[np.ndarray, str]:
    T = base.T
    ab = base.alpha_bar
    if callable(spec):
        return np.asarray(spec(base), dtype=np.float64), "custom"
    if not isinstance(spec, str):
        return np.asarray(spec, dtype=np.float64), "custom"
    if spec == "zero":
        return np.zeros(T + 1), spec
    if spec == "linear":
        return np.arange(T + 1) / T, spec
    if spec == "snr":
        # m_t proportional to sqrt((1 - abar_t) / abar_t), scaled to hit 1 at T
        r = np.sqrt((1.0 - ab) / ab)
        m = r / r[T]
        m[T] = 1.0
        return m, spec
    raise ScheduleError(f"unknown m-schedule {spec!r}; expected zero, linear, snr")


def interpolation_schedule(base: NoiseSchedule, spec="snr") -> ConditionalSchedule:
    """Build and validate the m_t / delta_t tables.

    ``spec`` is ``"snr"`` (default), ``"linear"``, ``"zero"`` (m = 0, the
    unconditional reduction used in tests), a callable of the base schedule
    or an explicit length T + 1 sequence.  Every schedule except ``"zero"``
    must end at m_T = 1.
    """
    m, kind = _m_values(base, spec)
    T = base.T
    if m.shape != (T + 1,):
        raise ScheduleError(f"m must have length T + 1 = {T + 1}, got {m.shape}")
    if m[0] != 0.0:
        raise ScheduleError(f"m[0] must be 0, got {m[0]}")
    if np.any(np.diff(m) < 0):
        t = int(np.argmax(np.diff(m) < 0)) + 1
        raise ScheduleError(f"m is not monotone: m[{t + 1}] < m[{t}]")
    if kind != "zero" and m[T] != 1.0:
        raise ScheduleError(f"m[T] must be 1, got {m[T]}")
    if T > 1 and np.any(m[:T] >= 1.0):
        raise ScheduleError("m must stay below 1 before the final step")
    ab = base.alpha_bar
    if kind != "zero" and ab[T] > 0.5:
        # delta_T = 1 - 2 abar_T once m_T = 1
        raise ScheduleError(f"m[T] = 1 needs alpha_bar_T <= 0.5, got {ab[T]:.4f}; "
                            "use more steps or a larger beta_end")
    delta = (1.0 - ab) - m**2 * ab
    delta[0] = 0.0
    bad = np.flatnonzero(delta < 0)
    if bad.size:
        t = int(bad[0])
        raise ScheduleError(f"negative delta at t={t}: {delta[t]:.3e}")
    for a in (m, delta):
        a.setflags(write=False)
    cs = ConditionalSchedule(base, m, delta, kind)
    for t in range(1, T + 1):
        if cs.transition(t)[2] < 0:
            raise ScheduleError(f"negative transition variance at t={t}")
    return cs


def cond_forward(y0, yn, t: int, eps, cs: ConditionalSchedule) -> np.ndarray:
    _same_shape(y0, yn, "yn")
    _same_shape(y0, eps)
    cs.base.check_t(t)
    sab = np.sqrt(cs.base.alpha_bar[t])
    m = cs.m[t]
    return ((1 - m) * sab * np.asarray(y0) + m * sab * np.asarray(yn)) + np.sqrt(cs.delta[t]) * np.asarray(eps)


def cond_training_target(y0, yn, t: int, eps, cs: ConditionalSchedule) -> np.ndarray:
    """Combined noise the conditional denoiser learns to predict."""
    _same_shape(y0, yn, "yn")
    _same_shape(y0, eps)
    cs.base.check_t(t)
    ab = cs.base.alpha_bar[t]
    mixed = cs.m[t] * np.sqrt(ab) * (np.asarray(yn) - np.asarray(y0)) + np.sqrt(cs.delta[t]) * np.asarray(eps)
    return mixed / np.sqrt(1.0 - ab)


def cond_training_loss(d, y0, yn, t: int, eps, cs: ConditionalSchedule) -> float:
    y_t = cond_forward(y0, yn, t, eps, cs)
    target = cond_training_target(y0, yn, t, eps, cs)
    return float(np.mean((target - _predict(d, y_t, t, yn)) ** 2))


def reverse_coefficients(t: int, cs: ConditionalSchedule) -> ReverseCoefficients:
    """Posterior-mean coefficients of q(y_{t-1} | y_t, y0, yn) with y0 eliminated.

    t = 1 is the degenerate final step (delta_0 = 0, zero variance).
    """
    if not 1 <= t <= cs.T:
        raise ValueError(f"step t={t} outside 1..{cs.T}")
    base = cs.base
    if cs.m[t] == 0.0 and cs.m[t - 1] == 0.0:
        # exact unconditional arithmetic, so m = 0 reproduces diffusion bit for bit
        c_y, c_eps = base.reverse_coefficients(t)
        return ReverseCoefficients(c_y, 0.0, c_eps, base.posterior_variance(t) if t > 1 else 0.0)
    A, B, var = cs.transition(t)
    m_prev = cs.m[t - 1]
    d_t, d_prev = cs.delta[t], cs.delta[t - 1]
    alpha = base.alpha[t]
    sab_prev = np.sqrt(base.alpha_bar[t - 1])
    # posterior mean = w_prior * E[y_{t-1} | y0, yn] + w_like * (y_t - B yn)
    w_prior = var / d_t
    w_like = A * d_prev / d_t
    c_yt = w_prior * (1 - m_prev) / np.sqrt(alpha) + w_like
    c_eps = w_prior * (1 - m_prev) * np.sqrt(1.0 - base.alpha_bar[t]) / np.sqrt(alpha)
    c_yn = w_prior * m_prev * sab_prev - w_like * B
    return ReverseCoefficients(float(c_yt), float(c_yn), float(c_eps), float(var * d_prev / d_t))


def cond_reverse_step(d, y_t, yn, t: int, cs: ConditionalSchedule, rng: np.random.Generator) -> np.ndarray:
    y_t = np.asarray(y_t, dtype=np.float64)
    _same_shape(y_t, yn, "yn")
    c = reverse_coefficients(t, cs)
    mean = c.c_yt * y_t - c.c_eps * _predict(d, y_t, t, yn)
    if c.c_yn != 0.0:
        mean = mean + c.c_yn * np.asarray(yn)
    if t == 1:
        return mean
    z = rng.standard_normal(y_t.shape)
    return mean + np.sqrt(c.delta_cond) * z


def cond_sample(d, yn, cs: ConditionalSchedule, rng: np.random.Generator, init=None) -> np.ndarray:
    """Start at N(sqrt(abar_T) yn, delta_T I) and run the reverse chain to y_0."""
    yn = np.asarray(yn, dtype=np.float64)
    T = cs.T
    if init is None:
        z = rng.standard_normal(yn.shape)
        y = np.sqrt(cs.base.alpha_bar[T]) * yn + np.sqrt(cs.delta[T]) * z
    else:
        y = np.array(init, dtype=np.float64)
    for t in range(T, 0, -1):
        y = cond_reverse_step(d, y, yn, t, cs, rng)
    return y
