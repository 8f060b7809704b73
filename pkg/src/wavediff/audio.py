"""WAV reading/writing and synthetic speech-like clean/noisy pairs."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile

from .wavelets import Waveform


class WavFormatError(ValueError):
    pass


def read_wav(path) -> Waveform:
    """Mono PCM16 or float32 WAV to a Waveform scaled to [-1, 1]."""
    try:
        sr, data = wavfile.read(os.fspath(path))
    except (ValueError, EOFError, IndexError) as exc:  # scipy's malformed-header errors
        raise WavFormatError(f"{path}: malformed WAV ({exc})") from exc
    if data.ndim != 1:
        raise WavFormatError(f"{path}: only mono files are supported, got {data.shape[1]} channels")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise WavFormatError(f"{path}: unsupported sample type {data.dtype}")
    return Waveform(samples, int(sr))


def to_pcm16(samples) -> np.ndarray:
    """Clamp, then round half away from zero."""
    v = np.asarray(samples, dtype=np.float64) * 32768.0
    v = np.sign(v) * np.floor(np.abs(v) + 0.5)
    return np.clip(v, -32768, 32767).astype(np.int16)


def write_wav(w: Waveform, path, format: str = "float32"):
    if not path:
        raise OSError("empty output path")
    samples = np.asarray(w.samples, dtype=np.float64)
    if not np.all(np.isfinite(samples)):
        raise ValueError("samples must be finite")
    if format == "pcm16":
        data = to_pcm16(samples)
    elif format == "float32":
        data = samples.astype(np.float32)
    else:
        raise ValueError(f"unknown WAV format {format!r}; expected pcm16 or float32")
    wavfile.write(os.fspath(path), int(w.sample_rate), data)


@dataclass(frozen=True)
class SyntheticSpec:
    duration: float = 1.0
    sample_rate: int = 16000
    harmonics: int = 5
    f0_range: tuple[float, float] = (80.0, 300.0)
    am_rate: float = 4.0
    noise: str = "white"
    snr_db: float = 10.0
    seed: int = 0
    peak: float = 0.5

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.noise != "white":
            raise ValueError(f"unsupported noise type {self.noise!r}")
        if math.isnan(self.snr_db) or self.snr_db == -math.inf:
            raise ValueError("SNR must be finite or +inf (noise disabled)")


def harmonic_clip(n: int, sample_rate: int, rng: np.random.Generator, harmonics=5,
                  f0_range=(80.0, 300.0), am_rate=4.0, peak=0.5) -> np.ndarray:
    """Amplitude-modulated harmonic stack with a random fundamental and phase."""
    t = np.arange(n) / sample_rate
    f0 = rng.uniform(*f0_range)
    phase = rng.uniform(0, 2 * np.pi, size=harmonics)
    x = sum(np.sin(2 * np.pi * f0 * k * t + phase[k - 1]) / k for k in range(1, harmonics + 1))
    env = 0.5 * (1 + np.sin(2 * np.pi * am_rate * t + rng.uniform(0, 2 * np.pi)))
    x = x * env
    top = np.abs(x).max()
    return peak * x / top if top > 0 else x


def synth_pair(spec: SyntheticSpec) -> tuple[Waveform, Waveform]:
    rng = np.random.default_rng(spec.seed)
    n = max(1, int(round(spec.duration * spec.sample_rate)))
    clean = harmonic_clip(n, spec.sample_rate, rng, spec.harmonics, spec.f0_range, spec.am_rate, spec.peak)
    if spec.snr_db == math.inf:
        return Waveform(clean, spec.sample_rate), Waveform(clean.copy(), spec.sample_rate)
    noise = rng.standard_normal(n)
    scale = np.sqrt(np.sum(clean**2) / (np.sum(noise**2) * 10 ** (spec.snr_db / 10)))
    noisy = clean + scale * noise
    return Waveform(clean, spec.sample_rate), Waveform(noisy, spec.sample_rate)


def snr_db(clean, noisy) -> float:
    clean = np.asarray(clean)
    noise = np.asarray(noisy) - clean
    return float(10 * np.log10(np.sum(clean**2) / np.sum(noise**2)))
