"""Three-level image pyramid and coarse-to-fine composition.

Images are torch tensors laid out ``(batch, channel, height, width)`` with
values normalized to ``[-1, 1]``. Both resampling directions use bilinear
interpolation with half-pixel-centered sampling, so they are linear and
bit-identical on the encoder and decoder side.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F

N_LEVELS = 3
#: total stride of one autoencoder
ENCODER_STRIDE = 16


@dataclass(frozen=True)
class ImagePyramid:
    """Levels ordered fine to coarse: ``[X_k, X_k/s, X_k/s^2]``."""

    levels: tuple[torch.Tensor, ...]
    scale_factor: int = 2

    def __post_init__(self):
        if len(self.levels) != N_LEVELS:
            raise ValueError(f"expected {N_LEVELS} levels, got {len(self.levels)}")

    @property
    def coarse_to_fine(self) -> tuple[torch.Tensor, ...]:
        return tuple(reversed(self.levels))


def _check_scale(s: int) -> None:
    if int(s) != s or s < 2:
        raise ValueError(f"scale factor must be an integer >= 2, got {s!r}")


def _as_batch(x: torch.Tensor) -> torch.Tensor:
    if x.dim() == 3:
        return x.unsqueeze(0)
    if x.dim() != 4:
        raise ValueError(f"expected (N, C, H, W) or (C, H, W), got shape {tuple(x.shape)}")
    return x


def downscale(x: torch.Tensor, s: int = 2) -> torch.Tensor:
    """Bilinear reduction by an integer factor; dimensions must divide exactly."""
    _check_scale(s)
    xb = _as_batch(x)
    h, w = xb.shape[-2:]
    if h % s or w % s:
        raise ValueError(f"size {h}x{w} is not divisible by {s}; pad first")
    out = F.interpolate(xb, size=(h // s, w // s), mode="bilinear", align_corners=False)
    return out if x.dim() == 4 else out[0]


def upscale(x: torch.Tensor, s: int = 2) -> torch.Tensor:
    """The upscaling operator shared by reconstruction and training losses."""
    _check_scale(s)
    xb = _as_batch(x)
    h, w = xb.shape[-2:]
    out = F.interpolate(xb, size=(h * s, w * s), mode="bilinear", align_corners=False)
    return out if x.dim() == 4 else out[0]


def build_pyramid(x: torch.Tensor, s: int = 2) -> ImagePyramid:
    """Cascade two ``s``-fold reductions below ``x``.

    ``x`` must already be padded to a multiple of ``16 * s * s`` so every
    level can pass through a stride-16 encoder.
    """
    _check_scale(s)
    m = ENCODER_STRIDE * s * s
    h, w = x.shape[-2:]
    if h % m or w % m:
        raise ValueError(f"size {h}x{w} is not a multiple of {m}; pad first")
    half = downscale(x, s)
    quarter = downscale(half, s)
    return ImagePyramid((x, half, quarter), s)


def _compose(decoded, s: int) -> list[torch.Tensor]:
    # intermediate reconstructions stay unclamped so residuals remain exact
    recs = [decoded[0]]
    for residual in decoded[1:]:
        prior = upscale(recs[-1], s)
        if prior.shape != residual.shape:
            raise ValueError(
                f"upscaled prior {tuple(prior.shape)} does not match residual {tuple(residual.shape)}"
            )
        recs.append(prior + residual)
    return recs


def compose_scales(decoded, s: int = 2) -> list[torch.Tensor]:
    """Unclamped per-scale reconstructions ``[X'_k/4, X'_k/2, X'_k]``.

    ``decoded`` holds the coarse autoencoder output followed by the residual
    decodes, coarse to fine. Fewer than three entries is allowed and yields
    the reconstructions that are available.
    """
    if not 1 <= len(decoded) <= N_LEVELS:
        raise ValueError(f"expected 1 to {N_LEVELS} decoded layers, got {len(decoded)}")
    return _compose(decoded, s)


def compose_reconstruction(decoded, s: int = 2) -> torch.Tensor:
    """Final full-resolution reconstruction, clamped to ``[-1, 1]``."""
    if len(decoded) != N_LEVELS:
        raise ValueError(f"expected {N_LEVELS} decoded layers, got {len(decoded)}")
    return _compose(decoded, s)[-1].clamp(-1.0, 1.0)


def pad_to_multiple(x: torch.Tensor, m: int) -> tuple[torch.Tensor, tuple[int, int]]:
    """Replicate-pad right and bottom edges up to a multiple of ``m``.

    Returns the padded image and the original ``(height, width)``.
    """
    if m < 1:
        raise ValueError(f"multiple must be >= 1, got {m}")
    xb = _as_batch(x)
    h, w = xb.shape[-2:]
    ph, pw = -h % m, -w % m
    if ph or pw:
        # replicate pad only supports pad < size for some modes; index instead
        rows = torch.arange(h + ph).clamp(max=h - 1)
        cols = torch.arange(w + pw).clamp(max=w - 1)
        xb = xb[..., rows, :][..., cols]
    return (xb if x.dim() == 4 else xb[0]), (h, w)


def crop(x: torch.Tensor, orig_size: tuple[int, int]) -> torch.Tensor:
    h, w = orig_size
    return x[..., :h, :w]
