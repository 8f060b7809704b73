"""Analytic MAC counts and wall-clock timing for raw vs wavelet inputs.

A convolution layer costs ``K * C_out * L_out`` multiply-accumulates per
input channel; splitting a length-``L`` signal into ``2**levels`` channels of
``L / 2**levels`` frames divides that per-channel cost by ``2**levels``.
"""
from __future__ import annotations

import platform
import shlex
import statistics
import sys
import time
from contextlib import nullcontext
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import _backend
from .denoiser import ArchSpec, TinyDenoiser, Trainer, TrainData
from .diffusion import linear_schedule, sample


def conv_macs(K: int, C_out: int, L_out: int) -> int:
    for name, v in (("K", K), ("C_out", C_out), ("L_out", L_out)):
        if int(v) != v or v <= 0:
            raise ValueError(f"{name} must be a positive integer, got {v}")
    return int(K) * int(C_out) * int(L_out)


@dataclass(frozen=True)
class LayerSpec:
    name: str
    kernel: int
    c_out: int


def tiny_layers(arch: ArchSpec) -> list[LayerSpec]:
    """Convolution layers of :class:`TinyDenoiser` in execution order."""
    layers = [LayerSpec("input", 1, arch.residual)]
    for i, _ in enumerate(arch.dilations):
        layers.append(LayerSpec(f"block{i}.dilated", arch.kernel, arch.residual))
        layers.append(LayerSpec(f"block{i}.residual", 1, arch.residual))
    layers.append(LayerSpec("output", 1, arch.channels))
    return layers


@dataclass
class LayerMacs:
    name: str
    c_in: int
    per_channel: int
    total: int


@dataclass
class MacReport:
    """Per-layer MACs for one input shape (channels x frames)."""

    shape: tuple[int, int]
    layers: list[LayerMacs] = field(default_factory=list)

    @property
    def total(self) -> int:
        return sum(l.total for l in self.layers)

    @property
    def first_layer_per_channel(self) -> int:
        return self.layers[0].per_channel if self.layers else 0

    def records(self, label: str = "") -> list[dict]:
        return [
            dict(kind="mac", config=label, channels=self.shape[0], frames=self.shape[1],
                 layer=l.name, c_in=l.c_in, per_channel=l.per_channel, total=l.total)
            for l in self.layers
        ]


def pipeline_macs(layers, shape) -> MacReport:
    """Sum conv MACs layer by layer; each layer keeps the frame count."""
    c_in, frames = (int(v) for v in shape)
    if c_in <= 0 or frames <= 0:
        raise ValueError(f"invalid input shape {shape}")
    report = MacReport((c_in, frames))
    for layer in layers:
        if not isinstance(layer, LayerSpec):
            layer = LayerSpec(*layer)
        per = conv_macs(layer.kernel, layer.c_out, frames)
        report.layers.append(LayerMacs(layer.name, c_in, per, per * c_in))
        c_in = layer.c_out
    return report


@dataclass
class MacComparison:
    reports: dict[str, MacReport]

    def ratio(self, name: str, base: str = "raw", what: str = "total") -> float:
        a, b = self.reports[name], self.reports[base]
        if what == "first_layer_per_channel":
            return a.first_layer_per_channel / b.first_layer_per_channel
        return a.total / b.total


CONFIG_LEVELS = {"raw": 0, "wavelet": 1, "multilevel": 2}


def input_shape(n_samples: int, levels: int) -> tuple[int, int]:
    block = 2**levels
    return block, -(-n_samples // block)


def compare_macs(n_samples: int = 16384, configs=("raw", "wavelet", "multilevel"),
                 arch: ArchSpec | None = None, layers=None) -> MacComparison:
    """MAC reports for each named config; the first layer adapts to the channel count."""
    reports = {}
    for name in configs:
        levels = CONFIG_LEVELS[name]
        shape = input_shape(n_samples, levels)
        if layers is not None:
            spec = layers
        else:
            base = arch or ArchSpec()
            spec = tiny_layers(ArchSpec(**{**base.to_dict(), "channels": shape[0]}))
        reports[name] = pipeline_macs(spec, shape)
    return MacComparison(reports)


def environment(threads: int | None) -> dict:
    return dict(
        python=platform.python_version(),
        numpy=np.__version__,
        backend=_backend.BACKEND,
        machine=platform.machine(),
        threads="all" if threads is None else str(threads),
    )


def _thread_limit(threads):
    if threads is None:
        return nullcontext()
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return nullcontext()
    return threadpool_limits(threads)


@dataclass
class BenchConfig:
    name: str = "wavelet"
    levels: int = 1  # 0 = raw waveform input
    n_samples: int = 16384
    residual: int = 16
    T: int = 50
    batch_size: int = 16
    seed: int = 0
    sample_rate: int = 16000
    threads: int | None = 1

    @classmethod
    def named(cls, name: str, **kw) -> "BenchConfig":
        return cls(name=name, levels=CONFIG_LEVELS[name], **kw)

    @property
    def shape(self) -> tuple[int, int]:
        return input_shape(self.n_samples, self.levels)

    def model(self) -> TinyDenoiser:
        return TinyDenoiser(ArchSpec(channels=self.shape[0], residual=self.residual), seed=self.seed)


@dataclass
class TimingReport:
    kind: str
    name: str
    channels: int
    frames: int
    reps: int
    mean: float
    std: float
    min: float
    audio_seconds: float = 0.0
    rtf: float = 0.0
    env: dict = field(default_factory=dict)

    def to_record(self) -> str:
        d = asdict(self)
        env = d.pop("env")
        d.update({f"env.{k}": v for k, v in env.items()})
        return format_record(d)

    @classmethod
    def from_record(cls, line: str) -> "TimingReport":
        d = parse_record(line)
        env = {k[4:]: v for k, v in d.items() if k.startswith("env.")}
        kw = {}
        for f in fields(cls):
            if f.name == "env":
                continue
            raw = d[f.name]
            kw[f.name] = raw if f.type in (str, "str") else (int(raw) if f.type in (int, "int") else float(raw))
        return cls(env=env, **kw)


def format_record(d: dict) -> str:
    parts = []
    for k, v in d.items():
        if isinstance(v, float):
            v = repr(v)
        parts.append(f"{k}={shlex.quote(str(v))}")
    return " ".join(parts)


def parse_record(line: str) -> dict[str, str]:
    out = {}
    for tok in shlex.split(line):
        k, _, v = tok.partition("=")
        out[k] = v
    return out


def _stats(times):
    return statistics.fmean(times), (statistics.stdev(times) if len(times) > 1 else 0.0), min(times)


def _synthetic_packets(cfg: BenchConfig, n_items: int = 4) -> np.ndarray:
    rng = np.random.default_rng(cfg.seed)
    return rng.standard_normal((n_items,) + cfg.shape) * 0.3


def time_training_step(cfg: BenchConfig, reps: int = 10, warmup: int = 3) -> TimingReport:
    """Wall-clock of full training steps (sample, forward, backward, Adam)."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    model = cfg.model()
    trainer = Trainer(model, linear_schedule(cfg.T), batch_size=cfg.batch_size)
    data = TrainData(_synthetic_packets(cfg))
    rng = np.random.default_rng(cfg.seed + 1)
    times = []
    with _thread_limit(cfg.threads):
        for i in range(warmup + reps):
            t0 = time.perf_counter()
            trainer.step(data, rng)
            dt = time.perf_counter() - t0
            if i >= warmup:
                times.append(dt)
    mean, std, lo = _stats(times)
    c, f = cfg.shape
    return TimingReport("train_step", cfg.name, c, f, reps, mean, std, lo, env=environment(cfg.threads))


def time_sampling(cfg: BenchConfig, audio_seconds: float | None = None, reps: int = 1) -> TimingReport:
    """Full reverse loop; RTF = sampling seconds / generated audio seconds."""
    if audio_seconds is None:
        audio_seconds = cfg.n_samples / cfg.sample_rate
    if audio_seconds <= 0:
        raise ValueError("audio_seconds must be positive")
    n = int(round(audio_seconds * cfg.sample_rate))
    shape = input_shape(n, cfg.levels)
    model = TinyDenoiser(ArchSpec(channels=shape[0], residual=cfg.residual), seed=cfg.seed)
    sched = linear_schedule(cfg.T)
    times = []
    with _thread_limit(cfg.threads):
        for _ in range(reps):
            rng = np.random.default_rng(cfg.seed)
            t0 = time.perf_counter()
            sample(model, shape, sched, rng)
            times.append(time.perf_counter() - t0)
    mean, std, lo = _stats(times)
    return TimingReport("sampling", cfg.name, shape[0], shape[1], reps, mean, std, lo,
                        audio_seconds, mean / audio_seconds, environment(cfg.threads))


def format_mac_table(cmp: MacComparison) -> str:
    rows = [f"{'config':<11}{'shape':>12}{'first/ch':>12}{'first total':>13}{'total MACs':>14}{'ratio':>8}"]
    for name, r in cmp.reports.items():
        shape = f"{r.shape[0]}x{r.shape[1]}"
        ratio = cmp.ratio(name) if "raw" in cmp.reports else float("nan")
        rows.append(f"{name:<11}{shape:>12}{r.first_layer_per_channel:>12}"
                    f"{r.layers[0].total if r.layers else 0:>13}{r.total:>14}{ratio:>8.3f}")
    return "\n".join(rows)


def format_timing_table(reports: list[TimingReport]) -> str:
    rows = [f"{'kind':<11}{'config':<11}{'shape':>12}{'mean s':>11}{'std s':>11}{'RTF':>9}"]
    for r in reports:
        rtf = f"{r.rtf:.4f}" if r.kind == "sampling" else "-"
        rows.append(f"{r.kind:<11}{r.name:<11}{f'{r.channels}x{r.frames}':>12}"
                    f"{r.mean:>11.5f}{r.std:>11.5f}{rtf:>9}")
    return "\n".join(rows)


if __name__ == "__main__":  # pragma: no cover
    cmp = compare_macs()
    print(format_mac_table(cmp))
    sys.exit(0)
