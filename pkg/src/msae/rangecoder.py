"""Byte-oriented range coder with 32-bit registers and 16-bit frequencies.

Carries are propagated through a cached byte plus a run of pending 0xFF
bytes. The encoder's first output byte is always zero and is not stored.
"""

from __future__ import annotations

from bisect import bisect_right

from .entropy import PRECISION, TOTAL_FREQ, CdfTable

TOP = 1 << 24
MASK32 = 0xFFFFFFFF
FLUSH_BYTES = 4


class CorruptStreamError(ValueError):
    """Raised when a payload cannot have come from the encoder."""


class RangeEncoder:
    def __init__(self):
        self.low = 0
        self.range = MASK32
        self.cache = 0
        self.cache_size = 1
        self._out = bytearray()

    def _shift_low(self):
        if self.low < 0xFF000000 or self.low > MASK32:
            carry = self.low >> 32
            temp = self.cache
            while True:
                self._out.append((temp + carry) & 0xFF)
                temp = 0xFF
                self.cache_size -= 1
                if not self.cache_size:
                    break
            self.cache = (self.low >> 24) & 0xFF
        self.cache_size += 1
        self.low = (self.low & 0x00FFFFFF) << 8

    def encode(self, start: int, freq: int):
        r = self.range >> PRECISION
        self.low += r * start
        self.range = r * freq
        while self.range < TOP:
            self.range <<= 8
            self._shift_low()

    def finish(self) -> bytes:
        for _ in range(FLUSH_BYTES + 1):
            self._shift_low()
        if self._out[0] != 0:
            raise AssertionError("range coder lead byte must be zero")
        return bytes(self._out[1:])


class RangeDecoder:
    def __init__(self, data: bytes):
        self.data = memoryview(bytes(data))
        self.pos = 0
        self.range = MASK32
        self.code = 0
        for _ in range(FLUSH_BYTES):
            self.code = (self.code << 8) | self._next()

    def _next(self) -> int:
        if self.pos >= len(self.data):
            raise CorruptStreamError("payload truncated")
        b = self.data[self.pos]
        self.pos += 1
        return b

    def decode(self, cdf) -> int:
        """Decode one symbol index from cumulative frequencies ``cdf``."""
        r = self.range >> PRECISION
        value = self.code // r
        if value >= cdf[-1]:
            raise CorruptStreamError("code value outside the frequency table")
        i = bisect_right(cdf, value) - 1
        self.code -= r * cdf[i]
        self.range = r * (cdf[i + 1] - cdf[i])
        while self.range < TOP:
            self.code = ((self.code << 8) | self._next()) & MASK32
            self.range <<= 8
        return i

    def finish(self):
        if self.pos != len(self.data):
            raise CorruptStreamError(f"{len(self.data) - self.pos} unused payload bytes")


def _tables_for(n: int, cdfs):
    if isinstance(cdfs, CdfTable):
        return [cdfs] * n
    cdfs = list(cdfs)
    if len(cdfs) != n:
        raise ValueError(f"{n} symbols but {len(cdfs)} tables")
    return cdfs


def _check_table(t: CdfTable):
    if t.cdf[0] != 0 or t.cdf[-1] != TOTAL_FREQ:
        raise ValueError("CDF table must run from 0 to 2**16")


def range_encode(symbols, cdfs) -> bytes:
    """Encode integer ``symbols``; ``cdfs`` is one table or one per symbol."""
    symbols = [int(v) for v in symbols]
    tables = _tables_for(len(symbols), cdfs)
    enc = RangeEncoder()
    seen = set()
    for v, t in zip(symbols, tables):
        if id(t) not in seen:
            _check_table(t)
            seen.add(id(t))
        i = v - t.offset
        if not 0 <= i < t.n_symbols:
            raise ValueError(f"symbol {v} outside table support [{t.min_value}, {t.max_value}]")
        lo = t.cdf[i]
        enc.encode(lo, t.cdf[i + 1] - lo)
    return enc.finish()


def range_decode(data: bytes, n: int, cdfs) -> list[int]:
    """Recover ``n`` symbols; raises :class:`CorruptStreamError` on bad input."""
    tables = _tables_for(n, cdfs)
    dec = RangeDecoder(data)
    out = []
    for t in tables:
        out.append(dec.decode(t.cdf) + t.offset)
    dec.finish()
    return out
