"""Multiscale autoencoder codec for extreme image compression."""

from .codec import ModelMismatchError, decode_bytes, decode_image, encode_image, encode_tensor
from .losses import RDConfig
from .metrics import bpp, psnr, ssim
from .model import MSAE
from .networks import SCALES, NetworkConfig
from .pyramid import build_pyramid, compose_reconstruction
from .rangecoder import CorruptStreamError, range_decode, range_encode
from .training import TrainConfig, freeze_model, init_state, load_model, train, train_step

__version__ = "0.1.0"

__all__ = [
    "CorruptStreamError",
    "MSAE",
    "ModelMismatchError",
    "NetworkConfig",
    "RDConfig",
    "SCALES",
    "TrainConfig",
    "bpp",
    "build_pyramid",
    "compose_reconstruction",
    "decode_bytes",
    "decode_image",
    "encode_image",
    "encode_tensor",
    "freeze_model",
    "init_state",
    "load_model",
    "psnr",
    "range_decode",
    "range_encode",
    "ssim",
    "train",
    "train_step",
]
