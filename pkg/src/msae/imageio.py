"""Raster file conversion to and from normalized tensors.

8-bit pixel ``p`` maps to ``(2p + 1) / 256 - 1``: a symmetric grid inside
``[-1, 1]`` whose values are dyadic, so pyramid resampling and residual
arithmetic on real images stay exact in float32.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from PIL import Image

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".ppm", ".tif", ".tiff", ".webp"}


def to_tensor(rgb: np.ndarray) -> torch.Tensor:
    """``(H, W, 3)`` uint8 to ``(1, 3, H, W)`` float32 in ``[-1, 1]``."""
    arr = (2.0 * np.asarray(rgb, dtype=np.float32) + 1.0) / 256.0 - 1.0
    return torch.from_numpy(np.ascontiguousarray(arr.transpose(2, 0, 1)))[None]


def to_uint8(x: torch.Tensor) -> np.ndarray:
    """First image of a ``[-1, 1]`` batch as ``(H, W, 3)`` uint8."""
    x = x.detach()
    if x.dim() == 4:
        x = x[0]
    arr = ((x.clamp(-1, 1) + 1.0) * 128.0 - 0.5).round().clamp(0, 255).to(torch.uint8)
    return arr.permute(1, 2, 0).cpu().numpy()


def to_pixels(x: torch.Tensor) -> np.ndarray:
    """De-normalized float pixels in ``[0, 255]``, shape ``(H, W, 3)``."""
    x = x.detach()
    if x.dim() == 4:
        x = x[0]
    return ((x.to(torch.float64) + 1.0) * 128.0 - 0.5).permute(1, 2, 0).cpu().numpy()


def read_rgb(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def read_image(path) -> torch.Tensor:
    return to_tensor(read_rgb(path))


def write_image(path, x) -> None:
    arr = x if isinstance(x, np.ndarray) else to_uint8(x)
    Image.fromarray(arr).save(path)


def list_images(directory) -> list[Path]:
    return sorted(p for p in Path(directory).iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
