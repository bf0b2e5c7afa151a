"""Adversarial, feature-matching, distortion and rate-distortion objectives."""

from __future__ import annotations

from dataclasses import dataclass, field

import torch

from .networks import SCALES


@dataclass
class RDConfig:
    """Trade-off weights. ``alpha`` scales distortion, ``beta`` rate in bits."""

    lambda_fm: float = 10.0
    alpha: dict = field(default_factory=lambda: {"k": 1.0, "k2": 100.0, "k4": 100.0})
    beta: dict = field(default_factory=lambda: {"k": 100.0, "k2": 1.0, "k4": 1.0})
    s: int = 2
    c_neck: dict = field(default_factory=lambda: {"k": 4, "k2": 1, "k4": 1})
    per_scale_adversarial: bool = False

    def __post_init__(self):
        for name in ("alpha", "beta"):
            weights = getattr(self, name)
            if set(weights) != set(SCALES):
                raise ValueError(f"{name} needs weights for {SCALES}")
            if any(v < 0 for v in weights.values()):
                raise ValueError(f"{name} weights must be nonnegative")
        if self.lambda_fm < 0:
            raise ValueError("lambda_fm must be nonnegative")
        if self.s < 2:
            raise ValueError("scale factor must be >= 2")


@dataclass
class LossBundle:
    l_f: torch.Tensor
    l_g: torch.Tensor
    l_d: torch.Tensor
    distortion: dict
    rate: dict
    l_rd: torch.Tensor

    def as_floats(self) -> dict:
        row = {k: float(getattr(self, k).detach()) for k in ("l_rd", "l_g", "l_d", "l_f")}
        for s in SCALES:
            row[f"distortion_{s}"] = float(torch.as_tensor(self.distortion[s]).detach())
            row[f"rate_{s}"] = float(torch.as_tensor(self.rate[s]).detach())
        return row

    def is_finite(self) -> bool:
        return all(map(lambda v: torch.isfinite(torch.as_tensor(v)).item(), self.as_floats().values()))


def _score_maps(y):
    if isinstance(y, torch.Tensor):
        return [y]
    # discriminator output: list of (score, feats) or of plain score maps
    return [item[0] if isinstance(item, tuple) else item for item in y]


def lsgan_f(y) -> torch.Tensor:
    """Mean of ``(y - 1)^2``, averaged over patches then over critics."""
    maps = _score_maps(y)
    return torch.stack([((m - 1.0) ** 2).mean() for m in maps]).mean()


def lsgan_g(y) -> torch.Tensor:
    """Mean of ``y^2``, averaged over patches then over critics."""
    maps = _score_maps(y)
    return torch.stack([(m**2).mean() for m in maps]).mean()


def feature_matching_loss(real_feats, fake_feats, lambda_fm: float = 10.0) -> torch.Tensor:
    """Squared feature distance summed over channels, spatially averaged.

    Arguments are per-critic lists of tap lists. Taps are summed within a
    critic and critics are averaged. Real features are detached.
    """
    if len(real_feats) != len(fake_feats):
        raise ValueError("real and fake features come from different critic counts")
    per_critic = []
    for real_taps, fake_taps in zip(real_feats, fake_feats):
        if len(real_taps) != len(fake_taps):
            raise ValueError("tap count mismatch")
        total = 0.0
        for r, f in zip(real_taps, fake_taps):
            if r.shape != f.shape:
                raise ValueError(f"tap shape mismatch {tuple(r.shape)} vs {tuple(f.shape)}")
            total = total + ((f - r.detach()) ** 2).sum(dim=1).mean()
        per_critic.append(total)
    return lambda_fm * torch.stack([torch.as_tensor(t) for t in per_critic]).mean()


def generator_adv_loss(fake, discriminator) -> torch.Tensor:
    """LSGAN generator objective on the composed full-resolution fake."""
    return lsgan_f(discriminator(fake))


def discriminator_loss(real, fake, discriminator) -> torch.Tensor:
    fake = fake.detach()
    real_out, fake_out = _score_maps(discriminator(real)), _score_maps(discriminator(fake))
    per_critic = [((r - 1.0) ** 2).mean() + (f**2).mean() for r, f in zip(real_out, fake_out)]
    return torch.stack(per_critic).mean()


def distortion(x, x_rec) -> torch.Tensor:
    """Mean squared error in normalized pixel units."""
    if x.shape != x_rec.shape:
        raise ValueError(f"shape mismatch {tuple(x.shape)} vs {tuple(x_rec.shape)}")
    return ((x - x_rec) ** 2).mean()


def rd_loss(l_g, l_f, distortions: dict, rates: dict, cfg: RDConfig, l_d=None) -> LossBundle:
    """Compound objective summed over the three scales.

    With scalar ``l_g``/``l_f`` (computed once at full resolution) the
    adversarial terms enter every scale's summand unchanged, so they count
    three times. Dicts keyed by scale supply per-scale adversarial terms.
    """
    g = l_g if isinstance(l_g, dict) else dict.fromkeys(SCALES, l_g)
    f = l_f if isinstance(l_f, dict) else dict.fromkeys(SCALES, l_f)
    total = 0.0
    for s in SCALES:
        total = total + g[s] + cfg.alpha[s] * distortions[s] + f[s] + cfg.beta[s] * rates[s]
    return LossBundle(
        l_f=torch.as_tensor(sum(f.values()) / 3 if isinstance(l_f, dict) else l_f),
        l_g=torch.as_tensor(sum(g.values()) / 3 if isinstance(l_g, dict) else l_g),
        l_d=torch.zeros(()) if l_d is None else l_d,
        distortion=dict(distortions),
        rate=dict(rates),
        l_rd=torch.as_tensor(total),
    )
