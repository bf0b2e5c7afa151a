"""Layered container for the three coded latents.

Layout, all integers little-endian::

    magic "MSAE" | version u8 | scale factor u8 | layer count u8
    original width u32 | original height u32 | padded width u32 | padded height u32
    model fingerprint (8 bytes)
    per layer: c_neck u16 | c_neck x (v_min i16, v_max i16) | payload length u32
    payloads, coarsest layer first

A byte prefix ending on a payload boundary is itself decodable.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

from .rangecoder import CorruptStreamError

MAGIC = b"MSAE"
VERSION = 1
_FIXED = struct.Struct("<4sBBB4I8s")
_LAYER = struct.Struct("<H")
_RANGE = struct.Struct("<hh")
_LENGTH = struct.Struct("<I")


@dataclass(frozen=True)
class LayerInfo:
    c_neck: int
    support: tuple
    payload_length: int


@dataclass(frozen=True)
class StreamHeader:
    orig_size: tuple  # (height, width)
    padded_size: tuple
    scale_factor: int
    fingerprint: bytes
    layers: tuple = field(default_factory=tuple)
    version: int = VERSION

    def pack(self) -> bytes:
        (oh, ow), (ph, pw) = self.orig_size, self.padded_size
        out = bytearray(
            _FIXED.pack(MAGIC, self.version, self.scale_factor, len(self.layers), ow, oh, pw, ph, self.fingerprint)
        )
        for layer in self.layers:
            out += _LAYER.pack(layer.c_neck)
            for lo, hi in layer.support:
                out += _RANGE.pack(lo, hi)
            out += _LENGTH.pack(layer.payload_length)
        return bytes(out)

    @property
    def length(self) -> int:
        return _FIXED.size + sum(_LAYER.size + _RANGE.size * l.c_neck + _LENGTH.size for l in self.layers)


def pack_stream(header: StreamHeader, payloads) -> bytes:
    payloads = list(payloads)
    layers = tuple(replace(l, payload_length=len(p)) for l, p in zip(header.layers, payloads))
    if len(layers) != len(header.layers):
        raise ValueError("one payload per layer is required")
    return replace(header, layers=layers).pack() + b"".join(payloads)


def _take(data: bytes, pos: int, st: struct.Struct):
    end = pos + st.size
    if end > len(data):
        raise CorruptStreamError("stream header truncated")
    return st.unpack_from(data, pos), end


def parse_header(data: bytes) -> StreamHeader:
    (magic, version, s, n_layers, ow, oh, pw, ph, fp), pos = _take(data, 0, _FIXED)
    if magic != MAGIC:
        raise CorruptStreamError(f"bad magic {magic!r}")
    if version != VERSION:
        raise CorruptStreamError(f"unsupported stream version {version}")
    layers = []
    for _ in range(n_layers):
        (c_neck,), pos = _take(data, pos, _LAYER)
        support = []
        for _ in range(c_neck):
            (lo, hi), pos = _take(data, pos, _RANGE)
            if lo > hi:
                raise CorruptStreamError("inverted latent support")
            support.append((lo, hi))
        (length,), pos = _take(data, pos, _LENGTH)
        layers.append(LayerInfo(c_neck, tuple(support), length))
    return StreamHeader((oh, ow), (ph, pw), s, fp, tuple(layers), version)


def split_stream(data: bytes) -> tuple[StreamHeader, list[bytes]]:
    """Header and the complete payloads present in ``data``.

    Fewer payloads than the header announces means a layer prefix; a cut
    inside a payload or trailing bytes raise :class:`CorruptStreamError`.
    """
    header = parse_header(data)
    pos = header.length
    payloads = []
    for layer in header.layers:
        if pos == len(data):
            break
        end = pos + layer.payload_length
        if end > len(data):
            raise CorruptStreamError("payload truncated")
        payloads.append(bytes(data[pos:end]))
        pos = end
    if pos != len(data):
        raise CorruptStreamError(f"{len(data) - pos} trailing bytes after the last payload")
    return header, payloads


def strip_layers(data: bytes, n_layers: int) -> bytes:
    """Self-consistent stream holding only the first ``n_layers`` layers."""
    header, payloads = split_stream(data)
    if not 0 <= n_layers <= len(payloads):
        raise ValueError(f"cannot keep {n_layers} of {len(payloads)} layers")
    return pack_stream(replace(header, layers=header.layers[:n_layers]), payloads[:n_layers])
