"""Quantizer and factorized entropy model.

Every bottleneck channel owns a learned monotone CDF ``c_j``; the
probability of an integer symbol ``v`` is ``c_j(v + 0.5) - c_j(v - 0.5)``.
Spatial positions share their channel's density.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

PRECISION = 16
TOTAL_FREQ = 1 << PRECISION
#: largest coding alphabet, including the two tail symbols
MAX_SUPPORT = 1 << 15
TAIL_MASS = 2.0**-16
LIKELIHOOD_FLOOR = 1e-9


def round_half_away(x: torch.Tensor) -> torch.Tensor:
    return torch.sign(x) * torch.floor(torch.abs(x) + 0.5)


def quantize(w: torch.Tensor, mode: str, generator: torch.Generator | None = None) -> torch.Tensor:
    """Additive uniform noise (``"noise"``) or rounding (``"round"``).

    Rounding breaks ties away from zero on every platform.
    """
    if mode == "round":
        return round_half_away(w)
    if mode == "noise":
        if generator is None:
            raise ValueError("noise quantization needs a torch.Generator")
        u = torch.rand(w.shape, generator=generator, dtype=w.dtype, device=w.device)
        return w + (u - 0.5)
    raise ValueError(f"unknown quantizer mode {mode!r}")


class _LowerBound(torch.autograd.Function):
    # pass gradients that would lift the value off the bound
    @staticmethod
    def forward(ctx, x, bound):
        ctx.save_for_backward(x)
        ctx.bound = bound
        return x.clamp_min(bound)

    @staticmethod
    def backward(ctx, grad):
        (x,) = ctx.saved_tensors
        keep = (x >= ctx.bound) | (grad < 0)
        return grad * keep.to(grad.dtype), None


def lower_bound(x: torch.Tensor, bound: float) -> torch.Tensor:
    return _LowerBound.apply(x, bound)


class FactorizedEntropyModel(nn.Module):
    """Per-channel nonparametric density built from monotone layers.

    ``filters=(3, 3, 3)`` gives four stacked monotone maps
    ``1 -> 3 -> 3 -> 3 -> 1`` followed by a sigmoid. Positivity of the
    matrices (via softplus) and ``tanh`` gates bounded by one keep each
    CDF nondecreasing.
    """

    def __init__(self, channels: int, filters=(3, 3, 3), init_scale: float = 10.0):
        super().__init__()
        self.channels = channels
        dims = (1, *filters, 1)
        scale = init_scale ** (1.0 / (len(filters) + 1))
        self.matrices = nn.ParameterList()
        self.biases = nn.ParameterList()
        self.factors = nn.ParameterList()
        for i in range(len(dims) - 1):
            init = float(np.log(np.expm1(1.0 / scale / dims[i + 1])))
            self.matrices.append(nn.Parameter(torch.full((channels, dims[i + 1], dims[i]), init)))
            self.biases.append(nn.Parameter(torch.empty(channels, dims[i + 1], 1).uniform_(-0.5, 0.5)))
            if i < len(dims) - 2:
                self.factors.append(nn.Parameter(torch.zeros(channels, dims[i + 1], 1)))

    def logits_cdf(self, x: torch.Tensor) -> torch.Tensor:
        """Pre-sigmoid CDF of ``x`` with shape ``(N, C, H, W)``."""
        n, c, h, w = x.shape
        if c != self.channels:
            raise ValueError(f"input has {c} channels, entropy model has {self.channels}")
        logits = x.permute(1, 0, 2, 3).reshape(c, 1, -1)
        for i, (m, b) in enumerate(zip(self.matrices, self.biases)):
            logits = torch.matmul(F.softplus(m), logits) + b
            if i < len(self.factors):
                logits = logits + torch.tanh(self.factors[i]) * torch.tanh(logits)
        return logits.reshape(c, n, h, w).permute(1, 0, 2, 3)

    def cdf(self, x: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.logits_cdf(x))


def likelihood(w_hat: torch.Tensor, model, floor: float = LIKELIHOOD_FLOOR) -> torch.Tensor:
    """Probability mass of each element under its channel's density.

    ``model`` needs either ``logits_cdf`` (evaluated in the numerically
    stable tail) or a plain ``cdf`` method.
    """
    upper_x, lower_x = w_hat + 0.5, w_hat - 0.5
    if hasattr(model, "logits_cdf"):
        upper = model.logits_cdf(upper_x)
        lower = model.logits_cdf(lower_x)
        # evaluate on the side where sigmoid differences do not cancel
        sign = -torch.sign(upper + lower).detach()
        sign = torch.where(sign == 0, torch.ones_like(sign), sign)
        p = torch.abs(torch.sigmoid(sign * upper) - torch.sigmoid(sign * lower))
    else:
        p = model.cdf(upper_x) - model.cdf(lower_x)
    if floor:
        p = lower_bound(p, floor)
    return p


def rate_bits(w_hat: torch.Tensor, model, floor: float = LIKELIHOOD_FLOOR) -> torch.Tensor:
    """Total information content ``-sum log2 p`` of all elements."""
    return -torch.log2(likelihood(w_hat, model, floor)).sum()


@dataclass(frozen=True)
class CdfTable:
    """Quantized cumulative frequencies for one channel.

    ``cdf`` has ``n_symbols + 1`` entries from 0 to ``2**16``; symbol index
    ``i`` stands for the integer value ``offset + i``.
    """

    offset: int
    cdf: tuple[int, ...]

    @property
    def n_symbols(self) -> int:
        return len(self.cdf) - 1

    @property
    def min_value(self) -> int:
        return self.offset

    @property
    def max_value(self) -> int:
        return self.offset + self.n_symbols - 1

    def freqs(self) -> np.ndarray:
        return np.diff(np.asarray(self.cdf, dtype=np.int64))

    def probability(self, value: int) -> float:
        i = value - self.offset
        return (self.cdf[i + 1] - self.cdf[i]) / TOTAL_FREQ


def _channel_cdf(model, values: np.ndarray) -> np.ndarray:
    """CDF of every channel at ``values``, shape ``(C, len(values))``, float64."""
    x = torch.as_tensor(values, dtype=torch.float64)
    c = model.channels
    grid = x.reshape(1, 1, 1, -1).expand(1, c, 1, -1)
    with torch.no_grad():
        if hasattr(model, "logits_cdf"):
            model64 = _as_double(model)
            out = torch.sigmoid(model64.logits_cdf(grid))
        else:
            out = model.cdf(grid)
    return out.reshape(c, -1).to(torch.float64).numpy()


def _as_double(model):
    if next(model.parameters()).dtype == torch.float64:
        return model
    import copy

    return copy.deepcopy(model).double()


def compute_support(model, tail_mass: float = TAIL_MASS) -> list[tuple[int, int]]:
    """Smallest integer interval per channel leaving ``tail_mass`` outside."""
    half = tail_mass / 2
    radius = 64
    while True:
        values = np.arange(-radius, radius + 1, dtype=np.float64)
        lo_cdf = _channel_cdf(model, values - 0.5)
        hi_cdf = _channel_cdf(model, values + 0.5)
        support = []
        ok = True
        for j in range(lo_cdf.shape[0]):
            lo_ok = np.nonzero(lo_cdf[j] <= half)[0]
            hi_ok = np.nonzero(1.0 - hi_cdf[j] <= half)[0]
            if not len(lo_ok) or not len(hi_ok) or lo_ok[-1] == len(values) - 1 or hi_ok[0] == 0:
                ok = False
                break
            v_min, v_max = int(values[lo_ok[-1]]), int(values[hi_ok[0]])
            if v_min > v_max:
                # a jump inside one quantization bin
                v_min = v_max = int(values[np.argmax(hi_cdf[j] - lo_cdf[j])])
            support.append((v_min, v_max))
        if ok:
            return support
        radius *= 4
        if 2 * radius + 3 > MAX_SUPPORT:
            raise ValueError("entropy model support exceeds the coder limit")


def quantize_pmf(pmf: np.ndarray, precision: int = PRECISION) -> np.ndarray:
    """Integer frequencies summing to ``2**precision``, each at least one.

    Floors the scaled masses, lifts zeros to one, then settles the
    remainder on the most frequent symbols.
    """
    total = 1 << precision
    if len(pmf) > total:
        raise ValueError("alphabet larger than the frequency total")
    freq = np.maximum(np.floor(np.asarray(pmf, dtype=np.float64) * total).astype(np.int64), 1)
    diff = total - int(freq.sum())
    order = np.argsort(-freq, kind="stable")
    if diff > 0:
        freq[order[0]] += diff
    while diff < 0:
        for i in order:
            take = min(-diff, int(freq[i]) - 1)
            freq[i] -= take
            diff += take
            if diff == 0:
                break
    return freq


def build_cdf_tables(model, support=None) -> list[CdfTable]:
    """Quantized coding tables over ``[v_min - 1, v_max + 1]`` per channel.

    The two extreme symbols absorb the lower and upper tail mass.
    """
    if support is None:
        support = compute_support(model)
    tables = []
    for j, (v_min, v_max) in enumerate(support):
        n = v_max - v_min + 3
        if n > MAX_SUPPORT:
            raise ValueError(f"channel {j} support of {n} symbols exceeds {MAX_SUPPORT}")
        edges = np.arange(v_min - 0.5, v_max + 1.5, dtype=np.float64)
        cdf = _channel_cdf(model, edges)[j]
        pmf = np.concatenate([[cdf[0]], np.diff(cdf), [1.0 - cdf[-1]]])
        pmf = np.clip(pmf, 0.0, None)
        freq = quantize_pmf(pmf)
        tables.append(CdfTable(v_min - 1, tuple(int(v) for v in np.concatenate([[0], np.cumsum(freq)]))))
    return tables


def table_bits(symbols, tables) -> float:
    """Ideal code length in bits of ``symbols`` under quantized tables."""
    bits = 0.0
    for v, t in zip(symbols, tables):
        bits -= np.log2(t.probability(int(v)))
    return bits
