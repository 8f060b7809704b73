"""Binary containers: packet files and model checkpoints.

Packet file (little-endian)::

    b"WDPK" | u16 version | u8 basis id | u8 levels | u64 original_len |
    u32 pad_len | u32 sample_rate | u32 channels | u32 frames |
    channels * frames float64, row-major

Checkpoint file: one or more sections, each::

    b"WDCKPT\\0\\0" | u16 version | u16 kind | u32 descriptor bytes |
    descriptor (utf-8 JSON) | u64 parameter count | float64 parameters
"""
from __future__ import annotations

import json
import struct

import numpy as np

from .wavelets import BASIS_NAMES, WaveletPacket

PACKET_MAGIC = b"WDPK"
PACKET_VERSION = 1
_PACKET_HEADER = struct.Struct("<4sHBBQIIII")

CKPT_MAGIC = b"WDCKPT\0\0"
CKPT_VERSION = 1
_CKPT_HEADER = struct.Struct("<8sHHI")
SECTION_KINDS = {"denoiser": 0, "enhancer": 1}


class FormatError(ValueError):
    pass


def write_packet(p: WaveletPacket, path):
    p.check()
    header = _PACKET_HEADER.pack(
        PACKET_MAGIC, PACKET_VERSION, BASIS_NAMES.index(p.basis), p.levels,
        p.original_len, p.pad_len, p.sample_rate, p.channels, p.frames,
    )
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(p.data, dtype="<f8").tobytes())


def read_packet_header(path) -> dict:
    with open(path, "rb") as f:
        raw = f.read(_PACKET_HEADER.size)
    return _unpack_packet_header(raw)


def _unpack_packet_header(raw):
    if len(raw) < _PACKET_HEADER.size:
        raise FormatError("truncated packet header")
    magic, version, basis, levels, n, pad, sr, ch, fr = _PACKET_HEADER.unpack(raw)
    if magic != PACKET_MAGIC:
        raise FormatError(f"not a packet file (magic {magic!r})")
    if version != PACKET_VERSION:
        raise FormatError(f"unsupported packet version {version}")
    if basis >= len(BASIS_NAMES):
        raise FormatError(f"unknown basis id {basis}")
    return dict(basis=BASIS_NAMES[basis], levels=levels, original_len=n,
                pad_len=pad, sample_rate=sr, channels=ch, frames=fr)


def read_packet(path) -> WaveletPacket:
    with open(path, "rb") as f:
        raw = f.read()
    h = _unpack_packet_header(raw[:_PACKET_HEADER.size])
    body = raw[_PACKET_HEADER.size:]
    count = h["channels"] * h["frames"]
    if len(body) != 8 * count:
        raise FormatError(f"packet body has {len(body)} bytes, expected {8 * count}")
    data = np.frombuffer(body, dtype="<f8").astype(np.float64).reshape(h["channels"], h["frames"])
    p = WaveletPacket(data, h["basis"], h["levels"], h["original_len"], h["pad_len"], h["sample_rate"])
    p.check()
    return p


def save_checkpoint(path, sections: dict[str, tuple[dict, np.ndarray]]):
    """Write ``{kind: (descriptor, flat params)}``; kinds are denoiser/enhancer."""
    with open(path, "wb") as f:
        for kind, (desc, params) in sections.items():
            blob = json.dumps(desc, sort_keys=True).encode()
            params = np.ascontiguousarray(params, dtype="<f8").reshape(-1)
            f.write(_CKPT_HEADER.pack(CKPT_MAGIC, CKPT_VERSION, SECTION_KINDS[kind], len(blob)))
            f.write(blob)
            f.write(struct.pack("<Q", params.size))
            f.write(params.tobytes())


def load_checkpoint(path) -> dict[str, tuple[dict, np.ndarray]]:
    with open(path, "rb") as f:
        raw = f.read()
    kinds = {v: k for k, v in SECTION_KINDS.items()}
    out = {}
    pos = 0
    while pos < len(raw):
        if len(raw) - pos < _CKPT_HEADER.size:
            raise FormatError("truncated checkpoint section header")
        magic, version, kind, nbytes = _CKPT_HEADER.unpack_from(raw, pos)
        if magic != CKPT_MAGIC:
            raise FormatError(f"bad checkpoint magic {magic!r}")
        if version != CKPT_VERSION:
            raise FormatError(f"unsupported checkpoint version {version}")
        if kind not in kinds:
            raise FormatError(f"unknown section kind {kind}")
        pos += _CKPT_HEADER.size
        desc = json.loads(raw[pos:pos + nbytes].decode())
        pos += nbytes
        (count,) = struct.unpack_from("<Q", raw, pos)
        pos += 8
        end = pos + 8 * count
        if end > len(raw):
            raise FormatError("truncated checkpoint parameters")
        params = np.frombuffer(raw[pos:end], dtype="<f8").astype(np.float64)
        pos = end
        out[kinds[kind]] = (desc, params)
    if not out:
        raise FormatError("empty checkpoint")
    return out
