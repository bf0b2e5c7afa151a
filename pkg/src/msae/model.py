"""The three-scale codec model: autoencoders plus entropy models."""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn

from .entropy import FactorizedEntropyModel, quantize, rate_bits
from .networks import SCALES, Autoencoder, NetworkConfig
from .pyramid import ImagePyramid, upscale


@dataclass
class ScaleOutputs:
    """Per-scale tensors of one coarse-to-fine pass, keyed by scale name."""

    latents: dict
    decoded: dict
    reconstructions: dict
    rates: dict

    @property
    def decoded_list(self) -> list[torch.Tensor]:
        return [self.decoded[s] for s in SCALES]

    @property
    def full(self) -> torch.Tensor:
        return self.reconstructions["k"]


class MSAE(nn.Module):
    def __init__(self, cfg: NetworkConfig, s: int = 2):
        super().__init__()
        self.cfg = cfg
        self.s = s
        self.autoencoders = nn.ModuleDict({k: Autoencoder(cfg.autoencoder(k)) for k in SCALES})
        self.entropy_models = nn.ModuleDict({k: FactorizedEntropyModel(cfg.c_neck[k]) for k in SCALES})

    def __getitem__(self, scale: str) -> Autoencoder:
        return self.autoencoders[scale]

    def generator_parameters(self):
        for k in SCALES:
            yield from self.autoencoders[k].generator.parameters()

    def forward_scales(
        self,
        pyramid: ImagePyramid,
        mode: str = "round",
        generator: torch.Generator | None = None,
        clip=None,
        with_rate: bool = True,
    ) -> ScaleOutputs:
        """Closed-loop pass: each residual is taken against the decoded prior.

        ``clip(scale, latent)`` may restrict rounded latents to the coder's
        alphabet before they are decoded.
        """
        targets = dict(zip(SCALES, pyramid.coarse_to_fine))
        latents, decoded, recs, rates = {}, {}, {}, {}
        prior = None
        for k in SCALES:
            x = targets[k] if prior is None else targets[k] - prior
            w_hat = quantize(self.autoencoders[k].encode(x), mode, generator)
            if clip is not None:
                w_hat = clip(k, w_hat)
            out = self.autoencoders[k].decode(w_hat)
            rec = out if prior is None else prior + out
            latents[k], decoded[k], recs[k] = w_hat, out, rec
            if with_rate:
                rates[k] = rate_bits(w_hat, self.entropy_models[k]) / w_hat.shape[0]
            if k != SCALES[-1]:
                prior = upscale(rec, self.s)
        return ScaleOutputs(latents, decoded, recs, rates)
