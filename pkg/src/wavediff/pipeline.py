"""End-to-end runs: decompose, train or sample in the packet domain, reconstruct.

Two modes share one configuration type.  ``synthesis`` trains an
unconditional noise predictor and generates waveforms from noise;
``enhancement`` trains the conditional objective on clean/noisy pairs and
denoises a WAV file.
"""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import SyntheticSpec, read_wav, synth_pair, write_wav
from .conditional import ConditionalSchedule, cond_sample, interpolation_schedule
from .denoiser import ArchSpec, TinyDenoiser, TrainData, Trainer
from .diffusion import NoiseSchedule, linear_schedule, sample
from .enhancer import EnhancedDenoiser, MultiLevelEnhancer
from .formats import load_checkpoint, save_checkpoint
from .wavelets import Waveform, WaveletPacket, basis_by_name, decompose, reconstruct

MODES = ("synthesis", "enhancement")


class ConfigError(ValueError):
    pass


class CheckpointMismatchError(ValueError):
    pass


@dataclass
class RunConfig:
    mode: str = "synthesis"
    basis: str = "haar"
    levels: int = 1
    T: int = 50
    beta_start: float = 1e-4
    beta_end: float = 0.05
    m_schedule: str = "snr"
    residual: int = 16
    kernel: int = 3
    dilations: tuple[int, ...] = (1, 2, 4, 8)
    emb_dim: int = 16
    # feed the noisy packet to the net as extra channels (enhancement only)
    cond_input: bool = True
    enhancer: bool = False
    detail_gain: float = 1.0
    steps: int = 500
    batch_size: int = 16
    lr: float = 2e-4
    seed: int = 0
    sample_rate: int = 16000
    segment: int = 2048
    n_clips: int = 8
    snr_db: float = 10.0
    data_dir: str = ""
    noisy_dir: str = ""
    checkpoint: str = "model.ckpt"
    loss_trace: str = "losses.txt"
    wav_format: str = "float32"

    def __post_init__(self):
        self.dilations = tuple(int(d) for d in self.dilations)
        self.validate()

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}, got {self.mode!r}")
        try:
            basis_by_name(self.basis)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.levels < 1:
            raise ConfigError("levels must be >= 1")
        if self.T < 1:
            raise ConfigError("T must be >= 1")
        if not 0 < self.beta_start <= self.beta_end < 1:
            raise ConfigError("need 0 < beta_start <= beta_end < 1")
        if self.steps < 0 or self.batch_size < 1 or self.lr <= 0:
            raise ConfigError("steps >= 0, batch_size >= 1 and lr > 0 required")
        if self.segment < 2**self.levels or self.n_clips < 1:
            raise ConfigError("segment must hold at least 2**levels samples and n_clips >= 1")
        if self.wav_format not in ("float32", "pcm16"):
            raise ConfigError(f"wav_format must be float32 or pcm16, got {self.wav_format!r}")
        if self.mode == "enhancement":
            try:
                self.cond_schedule()
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc

    @property
    def channels(self) -> int:
        return 2**self.levels

    def arch(self) -> ArchSpec:
        cond = self.channels if self.mode == "enhancement" and self.cond_input else 0
        return ArchSpec(self.channels, self.residual, self.kernel, self.dilations, self.emb_dim, cond)

    def schedule(self) -> NoiseSchedule:
        return linear_schedule(self.T, self.beta_start, self.beta_end)

    def cond_schedule(self) -> ConditionalSchedule:
        return interpolation_schedule(self.schedule(), self.m_schedule)

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            lines.append(f"{f.name} = {_format_value(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        kw = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not sep:
                raise ConfigError(f"line {lineno}: expected key = value")
            if key not in types:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if key in kw:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            kw[key] = _parse_value(types[key], value, key, lineno)
        try:
            return cls(**kw)
        except ConfigError as exc:
            raise ConfigError(f"invalid config: {exc}") from exc


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    return str(v)


def _parse_value(typ, value: str, key: str, lineno: int):
    typ = str(typ)
    try:
        if typ == "bool":
            if value.lower() not in ("true", "false"):
                raise ValueError(value)
            return value.lower() == "true"
        if typ == "int":
            return int(value)
        if typ == "float":
            return float(value)
        if typ.startswith("tuple"):
            return tuple(int(x) for x in value.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"line {lineno}: bad value {value!r} for {key}") from None
    return value


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    return RunConfig.from_text(text)


def save_config(cfg: RunConfig, path):
    Path(path).write_text(cfg.to_text())


# -- data -------------------------------------------------------------------

def _segments(x: np.ndarray, size: int) -> list[np.ndarray]:
    return [x[i:i + size] for i in range(0, x.size - size + 1, size)]


def _wav_segments(directory, size, names=None):
    d = Path(directory)
    if not d.is_dir():
        raise ConfigError(f"data directory {directory} does not exist")
    names = names or sorted(p.name for p in d.glob("*.wav"))
    if not names:
        raise ConfigError(f"no .wav files in {directory}")
    segs = []
    for name in names:
        path = d / name
        if not path.exists():
            raise ConfigError(f"{path} is missing")
        segs.extend(_segments(read_wav(path).samples, size))
    return names, segs


def load_training_data(cfg: RunConfig, data=None) -> TrainData:
    """Clean (and for enhancement, noisy) packets as a TrainData batch.

    ``data`` may be a directory of WAV files, a SyntheticSpec template, or
    None to use ``cfg.data_dir`` when set and synthetic clips otherwise.
    """
    if data is None and cfg.data_dir:
        data = cfg.data_dir
    if isinstance(data, (str, os.PathLike)):
        names, clean = _wav_segments(data, cfg.segment)
        noisy = None
        if cfg.mode == "enhancement":
            if not cfg.noisy_dir:
                raise ConfigError("enhancement training from files needs noisy_dir")
            _, noisy = _wav_segments(cfg.noisy_dir, cfg.segment, names)
            if len(noisy) != len(clean):
                raise ConfigError("clean and noisy files differ in length")
    else:
        spec = data or SyntheticSpec(duration=cfg.segment / cfg.sample_rate,
                                     sample_rate=cfg.sample_rate, snr_db=cfg.snr_db, seed=cfg.seed)
        clean, noisy = [], []
        for i in range(cfg.n_clips):
            c, n = synth_pair(dataclasses.replace(spec, seed=spec.seed + i))
            clean.append(c.samples[:cfg.segment])
            noisy.append(n.samples[:cfg.segment])
        if cfg.mode == "synthesis":
            noisy = None
    if not clean:
        raise ConfigError(f"no training segments of {cfg.segment} samples")
    pack = lambda segs: np.stack([decompose(s, cfg.basis, cfg.levels).data for s in segs])
    return TrainData(pack(clean), None if noisy is None else pack(noisy))


# -- models and checkpoints -------------------------------------------------

def build_model(cfg: RunConfig):
    net = TinyDenoiser(cfg.arch(), seed=cfg.seed)
    if not cfg.enhancer:
        return net
    enh = MultiLevelEnhancer(cfg.levels, cfg.detail_gain, cfg.kernel, seed=cfg.seed)
    return EnhancedDenoiser(enh, net)


def _descriptor(cfg: RunConfig) -> dict:
    return dict(arch=cfg.arch().to_dict(), mode=cfg.mode, basis=cfg.basis, levels=cfg.levels,
                T=cfg.T, beta_start=cfg.beta_start, beta_end=cfg.beta_end, m_schedule=cfg.m_schedule)


def _enhancer_descriptor(cfg: RunConfig) -> dict:
    return dict(levels=cfg.levels, detail_gain=cfg.detail_gain, kernel=cfg.kernel)


def save_model(model, cfg: RunConfig, path):
    if isinstance(model, EnhancedDenoiser):
        sections = {"denoiser": (_descriptor(cfg), model.denoiser.params.flat),
                    "enhancer": (_enhancer_descriptor(cfg), model.enhancer.params.flat)}
    else:
        sections = {"denoiser": (_descriptor(cfg), model.params.flat)}
    save_checkpoint(path, sections)


def load_model(cfg: RunConfig, path):
    """Rebuild the model for ``cfg`` and fill it from ``path``; the two must agree."""
    sections = load_checkpoint(path)
    if "denoiser" not in sections:
        raise CheckpointMismatchError(f"{path} has no denoiser section")
    desc, params = sections["denoiser"]
    want = _descriptor(cfg)
    diff = sorted(k for k in want if desc.get(k) != want[k])
    if diff:
        raise CheckpointMismatchError(f"checkpoint does not match config in: {', '.join(diff)}")
    if cfg.enhancer != ("enhancer" in sections):
        raise CheckpointMismatchError("enhancer setting differs between config and checkpoint")
    model = build_model(cfg)
    net = model.denoiser if cfg.enhancer else model
    if params.size != net.params.size:
        raise CheckpointMismatchError(f"expected {net.params.size} denoiser parameters, got {params.size}")
    net.params.set_flat(params)
    if cfg.enhancer:
        edesc, eparams = sections["enhancer"]
        if edesc != _enhancer_descriptor(cfg) or eparams.size != model.enhancer.params.size:
            raise CheckpointMismatchError("enhancer section does not match config")
        model.enhancer.params.set_flat(eparams)
    return model


# -- runs -------------------------------------------------------------------

@dataclass
class TrainResult:
    checkpoint: Path
    losses: list[float]
    model: object


def train(cfg: RunConfig, data=None, model=None) -> TrainResult:
    """Train on decomposed packets, write the checkpoint and a loss trace."""
    packets = data if isinstance(data, TrainData) else load_training_data(cfg, data)
    model = model or build_model(cfg)
    cs = cfg.cond_schedule() if cfg.mode == "enhancement" else None
    trainer = Trainer(model, cfg.schedule(), cfg.lr, cfg.batch_size, cs)
    rng = np.random.default_rng(cfg.seed)
    losses = [trainer.step(packets, rng) for _ in range(cfg.steps)]
    ckpt = Path(cfg.checkpoint)
    save_model(model, cfg, ckpt)
    if cfg.loss_trace:
        Path(cfg.loss_trace).write_text("".join(f"{i + 1} {v!r}\n" for i, v in enumerate(losses)))
    return TrainResult(ckpt, losses, model)


def _resolve(cfg, model):
    if isinstance(model, (str, os.PathLike)):
        return load_model(cfg, model)
    return model


def generate(cfg: RunConfig, model, out_path=None, length: int = 16000) -> Waveform:
    """Sample a packet, reconstruct ``length`` samples and optionally write a WAV.

    ``model`` is a checkpoint path or any object with ``predict``.
    """
    if cfg.mode != "synthesis":
        raise ConfigError("generate needs a synthesis-mode config")
    if length < 1:
        raise ConfigError("length must be positive")
    d = _resolve(cfg, model)
    block = cfg.channels
    frames = -(-length // block)
    rng = np.random.default_rng(cfg.seed)
    y0 = sample(d, (block, frames), cfg.schedule(), rng)
    p = WaveletPacket(y0, cfg.basis, cfg.levels, length, frames * block - length, cfg.sample_rate)
    w = reconstruct(p)
    if out_path is not None:
        write_wav(w, out_path, cfg.wav_format)
    return w


def enhance(cfg: RunConfig, model, noisy, out_path=None) -> Waveform:
    """Condition on the decomposed noisy input and run the reverse chain."""
    if cfg.mode != "enhancement":
        raise ConfigError("enhance needs an enhancement-mode config")
    w = noisy if isinstance(noisy, Waveform) else read_wav(noisy)
    p = decompose(w, cfg.basis, cfg.levels)
    d = _resolve(cfg, model)
    rng = np.random.default_rng(cfg.seed)
    y0 = cond_sample(d, p.data, cfg.cond_schedule(), rng)
    out = reconstruct(dataclasses.replace(p, data=y0))
    if out_path is not None:
        write_wav(out, out_path, cfg.wav_format)
    return out

