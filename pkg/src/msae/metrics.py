"""Objective quality and rate measures."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import torch

from .bitstream import split_stream
from .imageio import to_pixels

PSNR_CAP = 99.0
LUMA = np.array([0.299, 0.587, 0.114])


def _pixels(x) -> np.ndarray:
    """Float64 pixels in 8-bit units; tensors are de-normalized first."""
    if isinstance(x, torch.Tensor):
        return to_pixels(x)
    return np.asarray(x, dtype=np.float64)


def psnr(x, y, peak: float = 255.0) -> float:
    a, b = _pixels(x), _pixels(y)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(peak**2 / mse))


def _gaussian(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    t = np.arange(size) - (size - 1) / 2
    g = np.exp(-(t**2) / (2 * sigma**2))
    return g / g.sum()


def _filter_valid(img: np.ndarray, k: np.ndarray) -> np.ndarray:
    win = np.lib.stride_tricks.sliding_window_view(img, len(k), axis=0)
    img = win @ k
    win = np.lib.stride_tricks.sliding_window_view(img, len(k), axis=1)
    return win @ k


def luma(x) -> np.ndarray:
    a = _pixels(x)
    return a @ LUMA if a.ndim == 3 else a


def ssim(x, y, data_range: float = 255.0) -> float:
    """Single-scale SSIM on the luma channel, mean over valid window positions."""
    a, b = luma(x), luma(y)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    k = _gaussian()
    if min(a.shape) < len(k):
        raise ValueError(f"image {a.shape} smaller than the {len(k)}-tap window")
    c1, c2 = (0.01 * data_range) ** 2, (0.03 * data_range) ** 2
    mu_a, mu_b = _filter_valid(a, k), _filter_valid(b, k)
    var_a = _filter_valid(a * a, k) - mu_a**2
    var_b = _filter_valid(b * b, k) - mu_b**2
    cov = _filter_valid(a * b, k) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def bpp(stream, orig_size=None) -> dict:
    """Total, header and per-layer bits per original pixel of a stream file."""
    data = Path(stream).read_bytes() if not isinstance(stream, (bytes, bytearray)) else bytes(stream)
    header, payloads = split_stream(data)
    h, w = orig_size if orig_size is not None else header.orig_size
    pixels = h * w
    return {
        "bpp": len(data) * 8 / pixels,
        "header_bpp": header.length * 8 / pixels,
        "layer_bpp": [len(p) * 8 / pixels for p in payloads],
    }
