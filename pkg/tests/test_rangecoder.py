import math
import random

import numpy as np
import pytest

from msae.entropy import TOTAL_FREQ, CdfTable, quantize_pmf, table_bits
from msae.rangecoder import CorruptStreamError, range_decode, range_encode


def table_from_pmf(pmf, offset=0):
    f = quantize_pmf(np.asarray(pmf, dtype=np.float64))
    return CdfTable(offset, tuple(int(v) for v in np.concatenate([[0], np.cumsum(f)])))


UNIFORM_256 = CdfTable(0, tuple(range(0, TOTAL_FREQ + 1, 256)))


def test_uniform_byte_symbols_cost_one_byte_each():
    rng = random.Random(0)
    symbols = [rng.randrange(256) for _ in range(1000)]
    data = range_encode(symbols, UNIFORM_256)
    assert 1000 <= len(data) <= 1005
    assert range_decode(data, 1000, UNIFORM_256) == symbols


def test_near_certain_symbols_are_almost_free():
    t = table_from_pmf([0, 1, 0], offset=-1)
    data = range_encode([0] * 5000, t)
    assert len(data) <= 8
    assert range_decode(data, 5000, t) == [0] * 5000


def test_empty_sequence():
    data = range_encode([], UNIFORM_256)
    assert range_decode(data, 0, UNIFORM_256) == []


def test_random_roundtrip_and_length_bound():
    rng = np.random.default_rng(1)
    tables = [table_from_pmf(rng.dirichlet(np.full(k, 0.4)), offset=-(k // 2)) for k in (3, 9, 40, 300)]
    idx = rng.integers(0, len(tables), 10_000)
    per_symbol = [tables[i] for i in idx]
    symbols = []
    for t in per_symbol:
        p = np.diff(t.cdf) / TOTAL_FREQ
        symbols.append(int(rng.choice(t.n_symbols, p=p)) + t.offset)
    data = range_encode(symbols, per_symbol)
    assert range_decode(data, len(symbols), per_symbol) == symbols
    assert len(data) * 8 <= table_bits(symbols, per_symbol) + 32 + 8


def test_out_of_support_symbol_rejected():
    t = table_from_pmf([0.5, 0.5], offset=3)
    with pytest.raises(ValueError):
        range_encode([5], t)
    with pytest.raises(ValueError):
        range_encode([2], t)


def test_table_count_must_match():
    with pytest.raises(ValueError):
        range_encode([1, 2], [UNIFORM_256])


def test_truncated_stream_detected():
    rng = random.Random(2)
    symbols = [rng.randrange(256) for _ in range(200)]
    data = range_encode(symbols, UNIFORM_256)
    for cut in (0, 1, 3, len(data) // 2, len(data) - 1):
        with pytest.raises(CorruptStreamError):
            range_decode(data[:cut], 200, UNIFORM_256)


def test_trailing_garbage_detected():
    data = range_encode([1, 2, 3], UNIFORM_256)
    with pytest.raises(CorruptStreamError):
        range_decode(data + b"\x00", 3, UNIFORM_256)


def test_mismatched_tables_never_crash():
    rng = np.random.default_rng(3)
    a = table_from_pmf(rng.dirichlet(np.ones(17)), offset=-8)
    b = table_from_pmf(rng.dirichlet(np.ones(17) * 0.2), offset=-8)
    symbols = [int(v) for v in rng.integers(-8, 9, 2000)]
    data = range_encode(symbols, a)
    try:
        out = range_decode(data, len(symbols), b)
    except CorruptStreamError:
        return
    assert len(out) == len(symbols)
    assert all(-8 <= v <= 8 for v in out)


def test_corrupted_bytes_never_crash():
    rng = np.random.default_rng(4)
    t = table_from_pmf(rng.dirichlet(np.ones(33)), offset=-16)
    symbols = [int(v) for v in rng.integers(-16, 17, 500)]
    data = bytearray(range_encode(symbols, t))
    for trial in range(50):
        bad = bytearray(data)
        bad[rng.integers(len(bad))] ^= int(rng.integers(1, 256))
        try:
            out = range_decode(bytes(bad), len(symbols), t)
        except CorruptStreamError:
            continue
        assert all(-16 <= v <= 16 for v in out)
