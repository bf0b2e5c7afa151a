import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from msae.entropy import (
    TOTAL_FREQ,
    FactorizedEntropyModel,
    build_cdf_tables,
    compute_support,
    likelihood,
    quantize,
    quantize_pmf,
    rate_bits,
)


class LinearCdf:
    """Uniform density on ``(lo, hi)``, one channel."""

    channels = 1

    def __init__(self, lo, hi):
        self.lo, self.hi = lo, hi

    def cdf(self, x):
        return ((x - self.lo) / (self.hi - self.lo)).clamp(0, 1)


class StepCdf:
    channels = 1

    def __init__(self, at=0.2):
        self.at = at

    def cdf(self, x):
        return (x >= self.at).to(x.dtype)


class LogisticCdf:
    channels = 1

    def __init__(self, scale=2.0):
        self.scale = scale

    def cdf(self, x):
        return torch.sigmoid(x / self.scale)


def test_round_half_away_from_zero():
    w = torch.tensor([0.4, -0.6, 1.5, -1.5, 2.5, -0.5])
    assert quantize(w, "round").tolist() == [0, -1, 2, -2, 3, -1]
    assert torch.equal(quantize(torch.zeros(5), "round"), torch.zeros(5))


def test_noise_quantizer_moments():
    w = torch.linspace(-3, 3, 100_000)
    out = quantize(w, "noise", torch.Generator().manual_seed(0))
    d = out - w
    assert d.abs().max() <= 0.5
    assert abs(float(d.mean())) < 0.01
    # variance of Uniform(-1/2, 1/2)
    assert abs(float(d.var()) - 1 / 12) < 2e-3


def test_noise_mode_requires_generator():
    with pytest.raises(ValueError):
        quantize(torch.zeros(3), "noise")
    with pytest.raises(ValueError):
        quantize(torch.zeros(3), "floor")


def test_certain_symbol_has_zero_rate():
    w = torch.zeros(1, 1, 2, 2)
    assert torch.all(likelihood(w, StepCdf()) == 1)
    assert float(rate_bits(w, StepCdf())) == 0.0


def test_linear_cdf_probability():
    p = likelihood(torch.zeros(1, 1, 1, 1), LinearCdf(-2, 2))
    assert float(p) == pytest.approx(0.25, abs=1e-12)
    support = torch.arange(-3, 4, dtype=torch.float64).view(1, 1, 1, -1)
    assert float(likelihood(support, LinearCdf(-2, 2)).sum()) == pytest.approx(1.0, abs=1e-6)


def test_hundred_half_probability_symbols_cost_hundred_bits():
    w = torch.zeros(1, 1, 10, 10)
    assert float(rate_bits(w, LinearCdf(-1, 1))) == pytest.approx(100.0, abs=1e-9)


def learned(channels=2, seed=0):
    torch.manual_seed(seed)
    return FactorizedEntropyModel(channels).double()


def test_learned_model_is_a_distribution():
    model = learned(3)
    v = torch.arange(-2000, 2001, dtype=torch.float64).view(1, 1, 1, -1).expand(1, 3, 1, -1)
    with torch.no_grad():
        total = likelihood(v, model, floor=0).sum(dim=-1)
        c = model.cdf(torch.linspace(-50, 50, 2001, dtype=torch.float64).view(1, 1, 1, -1).expand(1, 3, 1, -1))
    assert torch.allclose(total, torch.ones_like(total), atol=1e-6)
    assert torch.all(c[..., 1:] >= c[..., :-1])


def test_likelihood_in_unit_interval_and_permutation_invariant():
    model = learned(2)
    g = torch.Generator().manual_seed(1)
    w = torch.round(torch.randn(1, 2, 5, 6, generator=g, dtype=torch.float64) * 4)
    with torch.no_grad():
        p = likelihood(w, model)
        perm = torch.randperm(30, generator=g)
        wp = w.flatten(2)[..., perm].view(1, 2, 5, 6)
        pp = likelihood(wp, model)
    assert torch.all((p > 0) & (p <= 1))
    assert torch.allclose(pp.flatten(2), p.flatten(2)[..., perm])
    with torch.no_grad():
        assert float(rate_bits(wp, model)) == pytest.approx(float(rate_bits(w, model)), rel=1e-12)


def test_rate_gradient_matches_central_differences():
    model = learned(1, seed=3)
    w = torch.tensor([-2.0, 0.0, 1.0, 3.0], dtype=torch.float64).view(1, 1, 2, 2)
    model.zero_grad()
    rate_bits(w, model).backward()
    analytic, numeric = [], []
    h = 1e-4
    for p in model.parameters():
        for i in range(p.numel()):
            flat = p.data.view(-1)
            orig = flat[i].item()
            with torch.no_grad():
                flat[i] = orig + h
                up = float(rate_bits(w, model))
                flat[i] = orig - h
                down = float(rate_bits(w, model))
                flat[i] = orig
            numeric.append((up - down) / (2 * h))
            analytic.append(p.grad.view(-1)[i].item())
    a, n = np.array(analytic), np.array(numeric)
    assert np.linalg.norm(a - n) / np.linalg.norm(n) < 1e-4
    assert np.all(np.abs(a - n) <= 1e-4 * np.maximum(np.abs(n), 1e-2))


def test_rate_gradient_reaches_noisy_latents():
    model = learned(1)
    w = torch.tensor([0.3, -1.2], dtype=torch.float64).view(1, 1, 1, 2).requires_grad_(True)
    rate_bits(w, model).backward()
    assert torch.all(w.grad != 0)


@settings(max_examples=50, deadline=None)
@given(p=st.floats(1e-6, 1.0), q=st.floats(1e-6, 1.0))
def test_rate_nonincreasing_in_probability(p, q):
    lo, hi = sorted((p, q))
    bits = lambda prob: float(rate_bits(torch.zeros(1, 1, 1, 1, dtype=torch.float64), LinearCdf(-0.5 / prob, 0.5 / prob)))
    assert bits(hi) <= bits(lo) + 1e-12


def test_certain_symbol_table():
    support = compute_support(StepCdf())
    assert support == [(0, 0)]
    (t,) = build_cdf_tables(StepCdf(), support)
    assert t.offset == -1
    assert t.freqs().tolist() == [1, TOTAL_FREQ - 2, 1]


def test_symmetric_density_gives_symmetric_table():
    model = LogisticCdf(1.7)
    support = compute_support(model)
    assert support[0][0] == -support[0][1]
    f = build_cdf_tables(model, support)[0].freqs()
    assert np.abs(f - f[::-1]).max() <= 1


def test_tables_are_valid_and_deterministic():
    model = learned(4, seed=5)
    a, b = build_cdf_tables(model), build_cdf_tables(model)
    assert a == b
    for t in a:
        assert t.cdf[0] == 0 and t.cdf[-1] == TOTAL_FREQ
        assert np.all(t.freqs() >= 1)


def test_float32_model_tables_match_float64_evaluation():
    torch.manual_seed(0)
    m32 = FactorizedEntropyModel(2)
    assert build_cdf_tables(m32) == build_cdf_tables(m32.double())


def test_support_leaves_at_most_tail_mass():
    model = learned(2, seed=7)
    for j, (lo, hi) in enumerate(compute_support(model)):
        x = torch.tensor([lo - 0.5, hi + 0.5], dtype=torch.float64).view(1, 1, 1, 2).expand(1, 2, 1, 2)
        with torch.no_grad():
            c = model.cdf(x)[0, j, 0]
        assert float(c[0]) + (1 - float(c[1])) <= 2.0**-16
        # one step narrower violates the bound on at least one side
        x2 = torch.tensor([lo + 0.5, hi - 0.5], dtype=torch.float64).view(1, 1, 1, 2).expand(1, 2, 1, 2)
        with torch.no_grad():
            c2 = model.cdf(x2)[0, j, 0]
        assert float(c2[0]) > 2.0**-17 and 1 - float(c2[1]) > 2.0**-17


def test_overwide_support_rejected():
    with pytest.raises(ValueError):
        build_cdf_tables(LinearCdf(-1e5, 1e5))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=300))
def test_quantized_pmf_sums_exactly(weights):
    pmf = np.asarray(weights)
    pmf = pmf / pmf.sum() if pmf.sum() > 0 else np.full(len(pmf), 1 / len(pmf))
    f = quantize_pmf(pmf)
    assert f.sum() == TOTAL_FREQ and f.min() >= 1
    assert np.all(np.abs(f - pmf * TOTAL_FREQ) <= len(pmf) + 1)
