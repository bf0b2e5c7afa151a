"""Per-scale autoencoder and multiscale patch discriminator."""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn as nn

from .pyramid import downscale

SCALES = ("k4", "k2", "k")


@dataclass
class AutoencoderSpec:
    """Widths of one autoencoder.

    The encoder runs a stride-1 stem and four stride-2 convolutions whose
    widths double from ``base_channels`` and cap at ``trunk_channels``.
    """

    c_neck: int = 4
    base_channels: int = 60
    trunk_channels: int = 480
    n_res_blocks: int = 9

    def __post_init__(self):
        if self.c_neck < 1:
            raise ValueError("c_neck must be >= 1")

    @property
    def widths(self) -> list[int]:
        b, t = self.base_channels, self.trunk_channels
        return [min(b, t), min(2 * b, t), min(4 * b, t), min(8 * b, t), t]


@dataclass
class DiscriminatorSpec:
    n_scales: int = 3
    n_layers: int = 4
    base_channels: int = 64
    max_channels: int = 512

    @property
    def widths(self) -> list[int]:
        return [min(self.base_channels * 2**i, self.max_channels) for i in range(self.n_layers)]


@dataclass
class NetworkConfig:
    """Architecture for all three scales plus the discriminator."""

    c_neck: dict = field(default_factory=lambda: {"k4": 1, "k2": 1, "k": 4})
    base_channels: int = 60
    trunk_channels: int = 480
    n_res_blocks: int = 9
    disc_base_channels: int = 64
    disc_max_channels: int = 512
    disc_layers: int = 4

    @classmethod
    def preset(cls, name: str, **overrides) -> "NetworkConfig":
        if name == "full":
            cfg = cls()
        elif name == "desk":
            # every width divided by 8
            cfg = cls(base_channels=8, trunk_channels=60, disc_base_channels=8, disc_max_channels=64)
        else:
            raise ValueError(f"unknown preset {name!r}")
        for k, v in overrides.items():
            setattr(cfg, k, v)
        return cfg

    def autoencoder(self, scale: str) -> AutoencoderSpec:
        return AutoencoderSpec(self.c_neck[scale], self.base_channels, self.trunk_channels, self.n_res_blocks)

    def discriminator(self) -> DiscriminatorSpec:
        return DiscriminatorSpec(3, self.disc_layers, self.disc_base_channels, self.disc_max_channels)


class InstanceNorm(nn.Module):
    """Affine instance normalization.

    Unlike ``nn.InstanceNorm2d`` this accepts 1x1 feature maps, which occur
    at the coarsest scale of small crops; they normalize to the bias.
    """

    def __init__(self, channels: int, eps: float = 1e-5):
        super().__init__()
        self.eps = eps
        self.weight = nn.Parameter(torch.ones(channels))
        self.bias = nn.Parameter(torch.zeros(channels))

    def forward(self, x):
        mean = x.mean(dim=(2, 3), keepdim=True)
        var = (x - mean).pow(2).mean(dim=(2, 3), keepdim=True)
        x = (x - mean) / torch.sqrt(var + self.eps)
        return x * self.weight[:, None, None] + self.bias[:, None, None]


class ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(channels, channels, 3, 1, 1),
            InstanceNorm(channels),
            nn.ReLU(),
            nn.Conv2d(channels, channels, 3, 1, 1),
            InstanceNorm(channels),
        )

    def forward(self, x):
        return x + self.body(x)


class Encoder(nn.Module):
    def __init__(self, spec: AutoencoderSpec):
        super().__init__()
        w = spec.widths
        layers = [nn.ReflectionPad2d(3), nn.Conv2d(3, w[0], 7), InstanceNorm(w[0]), nn.LeakyReLU(0.2)]
        for i in range(4):
            layers.append(nn.Conv2d(w[i], w[i + 1], 3, 2, 1))
            # the trunk output feeds the bottleneck projection directly
            if i < 3:
                layers.append(InstanceNorm(w[i + 1]))
            layers.append(nn.LeakyReLU(0.2))
        self.trunk = nn.Sequential(*layers)
        self.bottleneck = nn.Conv2d(w[-1], spec.c_neck, 3, 1, 1)

    def forward(self, x, return_trunk: bool = False):
        h, w = x.shape[-2:]
        if h % 16 or w % 16:
            raise ValueError(f"encoder input {h}x{w} is not a multiple of 16")
        t = self.trunk(x)
        y = self.bottleneck(t)
        return (y, t) if return_trunk else y


class Generator(nn.Module):
    """Decoder with the residual information-augmentation stage."""

    def __init__(self, spec: AutoencoderSpec):
        super().__init__()
        w = spec.widths
        self.head = nn.Sequential(nn.Conv2d(spec.c_neck, w[-1], 3, 1, 1), InstanceNorm(w[-1]), nn.ReLU())
        self.augment = nn.Sequential(*[ResidualBlock(w[-1]) for _ in range(spec.n_res_blocks)])
        up = []
        for i in range(4, 0, -1):
            up += [
                nn.ConvTranspose2d(w[i], w[i - 1], 3, 2, 1, output_padding=1),
                InstanceNorm(w[i - 1]),
                nn.ReLU(),
            ]
        up += [nn.ReflectionPad2d(3), nn.Conv2d(w[0], 3, 7), nn.Tanh()]
        self.up = nn.Sequential(*up)

    def forward(self, latent):
        return self.up(self.augment(self.head(latent)))


class Autoencoder(nn.Module):
    def __init__(self, spec: AutoencoderSpec):
        super().__init__()
        self.spec = spec
        self.encoder = Encoder(spec)
        self.generator = Generator(spec)

    def encode(self, x, return_trunk: bool = False):
        return self.encoder(x, return_trunk=return_trunk)

    def decode(self, latent):
        if latent.shape[1] != self.spec.c_neck:
            raise ValueError(f"latent has {latent.shape[1]} channels, model expects {self.spec.c_neck}")
        return self.generator(latent)


class PatchDiscriminator(nn.Module):
    """Fully convolutional critic; returns a score map and its stride-2 taps."""

    def __init__(self, spec: DiscriminatorSpec):
        super().__init__()
        widths = spec.widths
        self.blocks = nn.ModuleList()
        c_in = 3
        for i, c_out in enumerate(widths):
            block = [nn.Conv2d(c_in, c_out, 4, 2, 1)]
            if i > 0:
                block.append(InstanceNorm(c_out))
            block.append(nn.LeakyReLU(0.2))
            self.blocks.append(nn.Sequential(*block))
            c_in = c_out
        self.score = nn.Conv2d(c_in, 1, 3, 1, 1)

    def forward(self, x):
        feats = []
        for block in self.blocks:
            x = block(x)
            feats.append(x)
        return self.score(x), feats


class MultiscaleDiscriminator(nn.Module):
    """Three patch critics on the image and its 2x and 4x reductions."""

    def __init__(self, spec: DiscriminatorSpec):
        super().__init__()
        self.spec = spec
        self.critics = nn.ModuleList([PatchDiscriminator(spec) for _ in range(spec.n_scales)])

    def forward(self, x):
        h, w = x.shape[-2:]
        span = 2 ** (self.spec.n_scales - 1)
        if h % span or w % span:
            raise ValueError(f"discriminator input {h}x{w} is not divisible by {span}")
        out = []
        for i, critic in enumerate(self.critics):
            out.append(critic(x))
            if i + 1 < len(self.critics):
                x = downscale(x, 2)
        return out
