import numpy as np
import pytest
import torch

from msae.networks import (
    AutoencoderSpec,
    Autoencoder,
    DiscriminatorSpec,
    InstanceNorm,
    MultiscaleDiscriminator,
    NetworkConfig,
)

DESK = NetworkConfig.preset("desk")


def test_channel_schedule():
    assert AutoencoderSpec().widths == [60, 120, 240, 480, 480]
    assert DESK.autoencoder("k").widths == [8, 16, 32, 60, 60]
    assert DiscriminatorSpec().widths == [64, 128, 256, 512]


@pytest.mark.parametrize("size,c_neck,latent", [(256, 1, 16), (16, 3, 1), (128, 4, 8)])
def test_encoder_shapes(size, c_neck, latent):
    torch.manual_seed(0)
    ae = Autoencoder(AutoencoderSpec(c_neck, 8, 60))
    with torch.no_grad():
        w, trunk = ae.encode(torch.zeros(1, 3, size, size), return_trunk=True)
    assert tuple(w.shape) == (1, c_neck, latent, latent)
    assert tuple(trunk.shape) == (1, 60, latent, latent)


def test_encoder_rejects_unaligned_input():
    ae = Autoencoder(AutoencoderSpec(1, 4, 16))
    with pytest.raises(ValueError):
        ae.encode(torch.zeros(1, 3, 24, 32))


def test_decoder_shapes_and_range():
    torch.manual_seed(0)
    ae = Autoencoder(DESK.autoencoder("k"))
    with torch.no_grad():
        out = ae.decode(torch.randn(1, 4, 32, 32) * 5)
        small = Autoencoder(AutoencoderSpec(1, 4, 16)).decode(torch.randn(1, 1, 1, 1))
    assert tuple(out.shape) == (1, 3, 512, 512)
    assert out.abs().max() <= 1.0
    assert tuple(small.shape) == (1, 3, 16, 16)
    with pytest.raises(ValueError):
        ae.decode(torch.zeros(1, 2, 4, 4))


def test_nine_residual_blocks_by_default():
    ae = Autoencoder(AutoencoderSpec())
    assert len(ae.generator.augment) == 9


@pytest.mark.parametrize("h,w", [(64, 64), (48, 80), (16, 32)])
def test_roundtrip_shape(h, w):
    ae = Autoencoder(AutoencoderSpec(2, 4, 16))
    with torch.no_grad():
        assert ae.decode(ae.encode(torch.zeros(1, 3, h, w))).shape == (1, 3, h, w)


def test_discriminator_outputs():
    torch.manual_seed(0)
    d = MultiscaleDiscriminator(DESK.discriminator())
    x = torch.rand(1, 3, 512, 512) * 2 - 1
    with torch.no_grad():
        out = d(x)
        again = d(x)
    assert [tuple(score.shape[-2:]) for score, _ in out] == [(32, 32), (16, 16), (8, 8)]
    for (score, feats), (score2, feats2) in zip(out, again):
        assert torch.equal(score, score2)
        assert len(feats) == 4
        sizes = [f.shape[-1] for f in feats]
        assert all(a == 2 * b for a, b in zip(sizes, sizes[1:]))


def test_critics_share_architecture_not_weights():
    torch.manual_seed(0)
    d = MultiscaleDiscriminator(DESK.discriminator())
    counts = [sum(p.numel() for p in c.parameters()) for c in d.critics]
    assert len(set(counts)) == 1
    w = [c.blocks[0][0].weight for c in d.critics]
    assert not torch.equal(w[0], w[1]) and not torch.equal(w[1], w[2])


def test_instance_norm_handles_single_pixel():
    norm = InstanceNorm(3)
    out = norm(torch.randn(2, 3, 1, 1))
    assert torch.all(torch.isfinite(out)) and torch.all(out == 0)


def test_decoder_gradient_matches_finite_differences():
    torch.manual_seed(0)
    ae = Autoencoder(AutoencoderSpec(2, 4, 16)).double()
    latent = torch.randn(1, 2, 8, 8, dtype=torch.float64) * 2
    probe = torch.randn(1, 3, 128, 128, dtype=torch.float64)
    loss = lambda: (ae.decode(latent) * probe).sum()
    ae.zero_grad()
    loss().backward()
    rng = np.random.default_rng(0)
    params = list(ae.generator.parameters())
    analytic, numeric = [], []
    h = 1e-6
    for _ in range(60):
        p = params[rng.integers(len(params))]
        i = int(rng.integers(p.numel()))
        flat = p.data.view(-1)
        orig = flat[i].item()
        with torch.no_grad():
            flat[i] = orig + h
            up = loss().item()
            flat[i] = orig - h
            down = loss().item()
            flat[i] = orig
        numeric.append((up - down) / (2 * h))
        analytic.append(p.grad.view(-1)[i].item())
    a, n = np.array(analytic), np.array(numeric)
    assert np.linalg.norm(a - n) / np.linalg.norm(n) < 1e-3
