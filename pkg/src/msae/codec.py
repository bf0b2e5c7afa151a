"""File-to-file encoding and decoding with a frozen model."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import torch

from .bitstream import LayerInfo, StreamHeader, pack_stream, split_stream
from .imageio import read_image, write_image
from .networks import SCALES
from .pyramid import ENCODER_STRIDE, build_pyramid, compose_scales, crop, pad_to_multiple, upscale
from .rangecoder import CorruptStreamError, range_decode, range_encode


class ModelMismatchError(ValueError):
    """The stream was produced by a different model."""


@dataclass
class EncodeReport:
    file_bytes: int
    header_bytes: int
    payload_bytes: list
    orig_size: tuple
    padded_size: tuple
    clipped: int
    bpp: float = field(init=False)
    layer_bpp: list = field(init=False)
    latents: dict = field(default_factory=dict, repr=False)
    reconstruction: torch.Tensor | None = field(default=None, repr=False)

    def __post_init__(self):
        pixels = self.orig_size[0] * self.orig_size[1]
        self.bpp = self.file_bytes * 8 / pixels
        self.layer_bpp = [n * 8 / pixels for n in self.payload_bytes]


@dataclass
class DecodeReport:
    layers: int
    partial: bool
    orig_size: tuple
    latents: dict = field(repr=False)
    reconstruction: torch.Tensor = field(repr=False)


def _symbols(w_hat: torch.Tensor) -> list[int]:
    # channel-major, then raster order
    return w_hat[0].reshape(w_hat.shape[1], -1).to(torch.int64).flatten().tolist()


def _layer_tables(tables, positions: int):
    return [t for t in tables for _ in range(positions)]


def encode_tensor(x: torch.Tensor, model) -> tuple[bytes, EncodeReport]:
    """Code one ``(1, 3, H, W)`` image in ``[-1, 1]``."""
    if x.dim() != 4 or x.shape[0] != 1 or x.shape[1] != 3:
        raise ValueError(f"expected one RGB image shaped (1, 3, H, W), got {tuple(x.shape)}")
    s = model.s
    x = x.to(next(model.model.parameters()).dtype)
    padded, orig = pad_to_multiple(x, ENCODER_STRIDE * s * s)
    model.clip_count = 0
    outs = model.forward_scales(build_pyramid(padded, s))
    layers, payloads = [], []
    for k in SCALES:
        w_hat = outs.latents[k]
        positions = w_hat.shape[2] * w_hat.shape[3]
        payloads.append(range_encode(_symbols(w_hat), _layer_tables(model.tables[k], positions)))
        layers.append(LayerInfo(model.c_neck[k], tuple(model.support[k]), len(payloads[-1])))
    header = StreamHeader(orig, tuple(padded.shape[-2:]), s, model.fingerprint, tuple(layers))
    data = pack_stream(header, payloads)
    rec = crop(compose_scales([outs.decoded[k] for k in SCALES], s)[-1].clamp(-1, 1), orig)
    report = EncodeReport(
        file_bytes=len(data),
        header_bytes=header.length,
        payload_bytes=[len(p) for p in payloads],
        orig_size=orig,
        padded_size=tuple(padded.shape[-2:]),
        clipped=model.clip_count,
        latents=outs.latents,
        reconstruction=rec,
    )
    return data, report


def _check_model(header: StreamHeader, model):
    if header.scale_factor != model.s:
        raise ModelMismatchError(f"stream scale factor {header.scale_factor}, model {model.s}")
    for k, layer in zip(SCALES, header.layers):
        if layer.c_neck != model.c_neck[k]:
            raise ModelMismatchError(f"layer {k} has c_neck {layer.c_neck}, model has {model.c_neck[k]}")
        if list(layer.support) != [tuple(p) for p in model.support[k]]:
            raise ModelMismatchError(f"layer {k} latent support differs from the model")
    if header.fingerprint != model.fingerprint:
        raise ModelMismatchError("stream was encoded with a different model")


def decode_bytes(data: bytes, model, layers: int | None = None) -> DecodeReport:
    """Decode up to ``layers`` layers; partial decodes are upscaled to full size."""
    header, payloads = split_stream(data)
    _check_model(header, model)
    s = model.s
    (ph, pw), m = header.padded_size, ENCODER_STRIDE * s * s
    oh, ow = header.orig_size
    if ph % m or pw % m or not (0 < oh <= ph and 0 < ow <= pw) or ph - oh >= m or pw - ow >= m:
        raise CorruptStreamError("inconsistent image dimensions in header")
    n = len(payloads) if layers is None else min(layers, len(payloads))
    if n < 1:
        raise CorruptStreamError("stream holds no decodable layer")
    dtype = next(model.model.parameters()).dtype
    latents, decoded = {}, []
    with torch.no_grad():
        for i, k in enumerate(SCALES[:n]):
            factor = ENCODER_STRIDE * s ** (len(SCALES) - 1 - i)
            h, w = ph // factor, pw // factor
            c = model.c_neck[k]
            symbols = range_decode(payloads[i], c * h * w, _layer_tables(model.tables[k], h * w))
            w_hat = torch.tensor(symbols, dtype=dtype).reshape(1, c, h, w)
            latents[k] = w_hat
            decoded.append(model.model[k].decode(w_hat))
        rec = compose_scales(decoded, s)[-1]
        for _ in range(len(SCALES) - n):
            rec = upscale(rec, s)
    rec = crop(rec.clamp(-1, 1), header.orig_size)
    return DecodeReport(n, n < len(SCALES), header.orig_size, latents, rec)


def encode_image(in_path, model, out_path) -> EncodeReport:
    data, report = encode_tensor(read_image(in_path), model)
    Path(out_path).write_bytes(data)
    return report


def decode_image(in_path, model, out_path, layers: int | None = None) -> DecodeReport:
    report = decode_bytes(Path(in_path).read_bytes(), model, layers)
    write_image(out_path, report.reconstruction)
    return report
