"""Periodic discrete wavelet transforms and the packed coefficient matrix.

Filters are stored pywt-style: the synthesis filters are time-reversed
relative to the analysis alignment, so for orthogonal bases
``synthesis_lo == analysis_lo[::-1]``.  All four filters of a basis share
one even length (shorter ones are zero padded).

Analysis keeps the even outputs of a circular convolution::

    cA[m] = sum_k analysis_lo[k] * x[(2m - k) mod L]

and synthesis is its exact inverse under periodic extension.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend

BASIS_NAMES = ("haar", "bior1_1", "bior1_3", "coif1", "db2", "cdf53")
ORTHOGONAL = frozenset({"haar", "db2", "coif1"})


class UnknownBasisError(ValueError):
    pass


class SignalTooShortError(ValueError):
    pass


class PacketMetadataError(ValueError):
    pass


@dataclass(frozen=True)
class WaveletBasis:
    name: str
    analysis_lo: np.ndarray
    analysis_hi: np.ndarray
    synthesis_lo: np.ndarray
    synthesis_hi: np.ndarray

    @property
    def length(self) -> int:
        return len(self.analysis_lo)

    @property
    def orthogonal(self) -> bool:
        return self.name in ORTHOGONAL

    @property
    def dual_lo(self) -> np.ndarray:
        """Synthesis low-pass in the analysis alignment."""
        return self.synthesis_lo[::-1]

    @property
    def dual_hi(self) -> np.ndarray:
        return self.synthesis_hi[::-1]


@dataclass
class Waveform:
    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        if self.samples.size == 0:
            raise ValueError("waveform has no samples")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass
class WaveletPacket:
    """Packed multi-level coefficients, ``data`` is channels x frames.

    Channel layout for ``levels = L`` is
    ``[cA_L, cD_L, cD_{L-1} (2 rows), cD_{L-2} (4 rows), ..., cD_1]``; a detail
    band longer than ``frames`` is split polyphase, so row ``p`` of the
    ``cD_j`` group holds ``cD_j[p::2**(L-j)]`` and every column covers the
    same stretch of time.
    """

    data: np.ndarray
    basis: str
    levels: int
    original_len: int
    pad_len: int = 0
    sample_rate: int = 16000

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def frames(self) -> int:
        return self.data.shape[1]

    def check(self):
        if self.basis not in BASIS_NAMES:
            raise PacketMetadataError(f"unknown basis {self.basis!r}")
        if self.levels < 1:
            raise PacketMetadataError("levels must be >= 1")
        if self.data.ndim != 2 or self.channels != 2 ** self.levels:
            raise PacketMetadataError(
                f"expected {2 ** self.levels} channels for {self.levels} levels, "
                f"got shape {self.data.shape}"
            )
        if not 0 <= self.pad_len < 2 ** self.levels:
            raise PacketMetadataError(f"pad_len {self.pad_len} out of range")
        if self.frames * 2 ** self.levels != self.original_len + self.pad_len:
            raise PacketMetadataError(
                f"{self.frames} frames x {2 ** self.levels} != "
                f"{self.original_len} + {self.pad_len}"
            )


def _orthogonal(name, lo):
    lo = np.asarray(lo, dtype=np.float64)
    return _assemble(name, lo, lo[::-1].copy())


def _assemble(name, analysis_lo, synthesis_lo):
    n = len(analysis_lo)
    sign = (-1.0) ** np.arange(n)
    # alternating flips: analysis_hi is the modulated dual low-pass and
    # synthesis_hi the modulated analysis low-pass, in stored orientation
    analysis_hi = sign * synthesis_lo
    synthesis_hi = -sign * analysis_lo
    return WaveletBasis(name, analysis_lo, analysis_hi, synthesis_lo, synthesis_hi)


def _build(name):
    r = 1.0 / math.sqrt(2.0)
    if name in ("haar", "bior1_1"):
        return _orthogonal(name, [r, r])
    if name == "db2":
        s3 = math.sqrt(3.0)
        lo = np.array([1 + s3, 3 + s3, 3 - s3, 1 - s3]) / (4 * math.sqrt(2.0))
        return _orthogonal(name, lo)
    if name == "coif1":
        s7 = math.sqrt(7.0)
        lo = np.array([-3 + s7, 1 - s7, 14 - 2 * s7, 14 + 2 * s7, 5 + s7, 1 - s7])
        return _orthogonal(name, lo * math.sqrt(2.0) / 32)
    if name == "bior1_3":
        lo = r * np.array([-1 / 8, 1 / 8, 1.0, 1.0, 1 / 8, -1 / 8])
        dual = r * np.array([0.0, 0.0, 1.0, 1.0, 0.0, 0.0])
        return _assemble(name, lo, dual[::-1].copy())
    if name == "cdf53":
        lo = math.sqrt(2.0) * np.array([-1, 2, 6, 2, -1, 0]) / 8
        dual = r * np.array([0.0, 0.5, 1.0, 0.5, 0.0, 0.0])
        return _assemble(name, lo, dual[::-1].copy())
    raise UnknownBasisError(
        f"unknown basis {name!r}; valid bases: {', '.join(BASIS_NAMES)}"
    )


_CACHE: dict[str, WaveletBasis] = {}


def basis_by_name(name: str) -> WaveletBasis:
    name = str(name).lower().replace(".", "_")
    if name not in _CACHE:
        _CACHE[name] = _build(name)
    return _CACHE[name]


def _as_basis(basis) -> WaveletBasis:
    return basis if isinstance(basis, WaveletBasis) else basis_by_name(basis)


def dwt_single(x, basis) -> tuple[np.ndarray, np.ndarray]:
    """One analysis level along the last axis.  ``x`` may be 1-D or 2-D."""
    basis = _as_basis(basis)
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] % 2:
        raise ValueError(f"dwt_single needs an even length, got {x.shape[-1]}")
    flat = x.reshape(-1, x.shape[-1])
    cA, cD = _backend.dwt_analysis(flat, basis.analysis_lo, basis.analysis_hi)
    shape = x.shape[:-1] + (x.shape[-1] // 2,)
    return cA.reshape(shape), cD.reshape(shape)


def idwt_single(cA, cD, basis) -> np.ndarray:
    basis = _as_basis(basis)
    cA = np.asarray(cA, dtype=np.float64)
    cD = np.asarray(cD, dtype=np.float64)
    if cA.shape != cD.shape:
        raise ValueError(f"cA {cA.shape} and cD {cD.shape} differ in shape")
    fa = cA.reshape(-1, cA.shape[-1])
    fd = cD.reshape(-1, cD.shape[-1])
    out = _backend.dwt_synthesis(fa, fd, basis.synthesis_lo, basis.synthesis_hi)
    return out.reshape(cA.shape[:-1] + (2 * cA.shape[-1],))


def _expand(band, groups):
    # polyphase split: (n,) -> (groups, n // groups)
    return band.reshape(-1, groups).T


def _collapse(rows):
    return rows.T.reshape(-1)


def decompose(x, basis, levels: int = 1) -> WaveletPacket:
    """Multi-level analysis of a waveform into a ``2**levels`` x frames packet."""
    basis = _as_basis(basis)
    if isinstance(x, Waveform):
        samples, sr = x.samples, x.sample_rate
    else:
        samples, sr = np.asarray(x, dtype=np.float64).reshape(-1), 16000
    levels = int(levels)
    if levels < 1:
        raise ValueError("levels must be >= 1")
    block = 2 ** levels
    n = samples.size
    if n < block:
        raise SignalTooShortError(
            f"signal of {n} samples is shorter than 2**levels = {block}"
        )
    pad = (-n) % block
    a = np.concatenate([samples, np.zeros(pad)]) if pad else samples.copy()
    details = []
    for _ in range(levels):
        a, d = dwt_single(a, basis)
        details.append(d)
    rows = [a[None, :], details[-1][None, :]]
    for j in range(levels - 1, 0, -1):
        rows.append(_expand(details[j - 1], 2 ** (levels - j)))
    data = np.vstack(rows)
    return WaveletPacket(data, basis.name, levels, n, pad, sr)


def reconstruct(p: WaveletPacket) -> Waveform:
    p.check()
    basis = basis_by_name(p.basis)
    L = p.levels
    a = p.data[0]
    d = p.data[1]
    a = idwt_single(a, d, basis)
    row = 2
    for j in range(L - 1, 0, -1):
        groups = 2 ** (L - j)
        d = _collapse(p.data[row:row + groups])
        row += groups
        a = idwt_single(a, d, basis)
    return Waveform(a[: p.original_len], p.sample_rate)
