"""Rate-distortion training with alternating critic and codec updates."""

from __future__ import annotations

import copy
import csv
import dataclasses
import hashlib
import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .entropy import CdfTable, build_cdf_tables, compute_support
from .imageio import list_images, to_tensor
from .losses import (
    LossBundle,
    RDConfig,
    discriminator_loss,
    distortion,
    feature_matching_loss,
    lsgan_f,
    rd_loss,
)
from .model import MSAE
from .networks import SCALES, MultiscaleDiscriminator, NetworkConfig
from .pyramid import build_pyramid

log = logging.getLogger(__name__)

FORMAT_VERSION = 1


class DataError(Exception):
    pass


class FrozenModelError(RuntimeError):
    pass


class NonFiniteLossError(FloatingPointError):
    def __init__(self, components: dict):
        self.components = components
        detail = ", ".join(f"{k}={v:.6g}" for k, v in components.items())
        super().__init__(f"non-finite loss at training step: {detail}")


@dataclass
class TrainConfig:
    learning_rate: float = 2e-4
    betas: tuple = (0.5, 0.999)
    batch_size: int = 2
    steps: int = 2000
    crop_size: int = 128
    seed: int = 0
    split: float = 0.7
    preset: str = "desk"
    network: dict = field(default_factory=dict)
    rd: RDConfig = field(default_factory=RDConfig)
    lr_decay_every: int = 0
    lr_decay_gamma: float = 0.5
    grad_clip: float | None = None
    log_every: int = 10
    checkpoint_every: int = 500

    def __post_init__(self):
        if isinstance(self.rd, dict):
            self.rd = RDConfig(**self.rd)
        self.betas = tuple(self.betas)
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.crop_size % 64:
            raise ValueError("crop_size must be a multiple of 64")

    def network_config(self) -> NetworkConfig:
        return NetworkConfig.preset(self.preset, **{**self.network, "c_neck": dict(self.rd.c_neck)})

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["betas"] = list(self.betas)
        return {"format_version": FORMAT_VERSION, **d}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        version = d.pop("format_version", FORMAT_VERSION)
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported config version {version}")
        return cls(**d)


def save_config(cfg: TrainConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")


def load_config(path) -> TrainConfig:
    return TrainConfig.from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------- data


def _fit(img: Image.Image, crop: int) -> Image.Image:
    w, h = img.size
    scale = crop / min(w, h)
    if scale != 1:
        img = img.resize((max(crop, round(w * scale)), max(crop, round(h * scale))), Image.BICUBIC)
    return img


class ImageDataset:
    """Images of one split, rescaled so the short side equals ``crop_size``.

    Iteration yields ``(1, 3, crop, crop)`` tensors: seeded random crops
    for the training split, center crops otherwise.
    """

    def __init__(self, images: list, names: list, crop_size: int, train: bool, seed: int):
        self.images = images
        self.names = names
        self.crop_size = crop_size
        self.train = train
        self.seed = seed

    def __len__(self):
        return len(self.images)

    def _crop(self, img: Image.Image, rng: random.Random | None) -> torch.Tensor:
        c = self.crop_size
        w, h = img.size
        if rng is None:
            left, top = (w - c) // 2, (h - c) // 2
        else:
            left, top = rng.randint(0, w - c), rng.randint(0, h - c)
        return to_tensor(np.asarray(img.crop((left, top, left + c, top + c))))

    def epoch(self, index: int = 0):
        if not self.train:
            for img in self.images:
                yield self._crop(img, None)
            return
        rng = random.Random(self.seed * 100003 + index)
        order = list(range(len(self.images)))
        rng.shuffle(order)
        for i in order:
            yield self._crop(self.images[i], rng)

    def __iter__(self):
        return self.epoch(0)

    def batches(self, batch_size: int):
        """Endless stream of stacked batches over successive epochs."""
        index, pending = 0, []
        while True:
            for x in self.epoch(index):
                pending.append(x)
                if len(pending) == batch_size:
                    yield torch.cat(pending)
                    pending = []
            index += 1


def load_dataset(path, crop_size: int, split: str = "train", fraction: float = 0.7, seed: int = 0) -> ImageDataset:
    """Seeded train/validation split of the raster images under ``path``."""
    if split not in ("train", "val"):
        raise ValueError(f"split must be 'train' or 'val', got {split!r}")
    path = Path(path)
    if not path.is_dir():
        raise DataError(f"{path} is not a directory")
    files = list_images(path)
    if not files:
        raise DataError(f"no images in {path}")
    random.Random(seed).shuffle(files)
    n_train = int(round(fraction * len(files)))
    chosen = files[:n_train] if split == "train" else files[n_train:]
    images, names = [], []
    for f in chosen:
        try:
            with Image.open(f) as im:
                images.append(_fit(im.convert("RGB"), crop_size))
            names.append(f.name)
        except Exception as exc:  # PIL raises a zoo of types on bad files
            log.warning("skipping unreadable image %s: %s", f, exc)
    if not images and chosen:
        raise DataError(f"no readable images in the {split} split of {path}")
    return ImageDataset(images, names, crop_size, split == "train", seed)


# ---------------------------------------------------------------- state


@dataclass
class TrainState:
    config: TrainConfig
    model: MSAE
    discriminator: MultiscaleDiscriminator
    opt_g: torch.optim.Optimizer
    opt_d: torch.optim.Optimizer
    noise: torch.Generator
    step: int = 0


def init_state(cfg: TrainConfig, dtype=torch.float32) -> TrainState:
    torch.manual_seed(cfg.seed)
    net = cfg.network_config()
    model = MSAE(net, cfg.rd.s).to(dtype)
    disc = MultiscaleDiscriminator(net.discriminator()).to(dtype)
    opt_g = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate, betas=cfg.betas)
    opt_d = torch.optim.Adam(disc.parameters(), lr=cfg.learning_rate, betas=cfg.betas)
    noise = torch.Generator().manual_seed(cfg.seed + 1)
    return TrainState(cfg, model, disc, opt_g, opt_d, noise)


def _features(out):
    return [feats for _, feats in out]


def adversarial_terms(x_real, x_fake, disc, lambda_fm: float):
    """Generator LSGAN loss and feature matching for one real/fake pair."""
    with torch.no_grad():
        real_out = disc(x_real)
    fake_out = disc(x_fake)
    return lsgan_f(fake_out), feature_matching_loss(_features(real_out), _features(fake_out), lambda_fm)


def generator_objective(model: MSAE, disc, x, rd: RDConfig, generator: torch.Generator, outputs=None):
    """Noise-relaxed forward pass and the compound loss; returns (bundle, outputs)."""
    pyr = build_pyramid(x, rd.s)
    outs = outputs if outputs is not None else model.forward_scales(pyr, "noise", generator)
    targets = dict(zip(SCALES, pyr.coarse_to_fine))
    dist = {k: distortion(targets[k], outs.reconstructions[k]) for k in SCALES}
    if rd.per_scale_adversarial:
        l_g, l_f = {}, {}
        for k in SCALES:
            l_g[k], l_f[k] = adversarial_terms(targets[k], outs.reconstructions[k], disc, rd.lambda_fm)
    else:
        l_g, l_f = adversarial_terms(x, outs.full, disc, rd.lambda_fm)
    return rd_loss(l_g, l_f, dist, outs.rates, rd), outs


def critic_objective(disc, x, outs, rd: RDConfig):
    if not rd.per_scale_adversarial:
        return discriminator_loss(x, outs.full, disc)
    pyr = build_pyramid(x, rd.s)
    targets = dict(zip(SCALES, pyr.coarse_to_fine))
    return torch.stack([discriminator_loss(targets[k], outs.reconstructions[k], disc) for k in SCALES]).mean()


def _set_lr(state: TrainState):
    cfg = state.config
    lr = cfg.learning_rate
    if cfg.lr_decay_every:
        lr *= cfg.lr_decay_gamma ** (state.step // cfg.lr_decay_every)
    for opt in (state.opt_g, state.opt_d):
        for group in opt.param_groups:
            group["lr"] = lr


def train_step(batch: torch.Tensor, state: TrainState) -> tuple[TrainState, LossBundle]:
    """One critic update on detached fakes, then one codec update."""
    if not isinstance(state, TrainState):
        raise FrozenModelError("train_step needs a training state; frozen models are immutable")
    cfg, model, disc = state.config, state.model, state.discriminator
    model.train()
    disc.train()
    _set_lr(state)

    pyr = build_pyramid(batch, cfg.rd.s)
    outs = model.forward_scales(pyr, "noise", state.noise)

    disc.requires_grad_(True)
    state.opt_d.zero_grad(set_to_none=True)
    l_d = critic_objective(disc, batch, outs, cfg.rd)
    if not torch.isfinite(l_d):
        raise NonFiniteLossError({"l_d": float(l_d.detach())})
    l_d.backward()
    if cfg.grad_clip:
        torch.nn.utils.clip_grad_norm_(disc.parameters(), cfg.grad_clip)
    state.opt_d.step()

    disc.requires_grad_(False)
    try:
        state.opt_g.zero_grad(set_to_none=True)
        bundle, _ = generator_objective(model, disc, batch, cfg.rd, state.noise, outputs=outs)
        bundle.l_d = l_d.detach()
        if not bundle.is_finite():
            raise NonFiniteLossError(bundle.as_floats())
        bundle.l_rd.backward()
        if cfg.grad_clip:
            torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
        state.opt_g.step()
    finally:
        disc.requires_grad_(True)
    state.step += 1
    return state, bundle


# ---------------------------------------------------------------- checkpoints


def save_checkpoint(state: TrainState, path) -> None:
    torch.save(
        {
            "format_version": FORMAT_VERSION,
            "kind": "train",
            "config": state.config.to_dict(),
            "model": state.model.state_dict(),
            "discriminator": state.discriminator.state_dict(),
            "opt_g": state.opt_g.state_dict(),
            "opt_d": state.opt_d.state_dict(),
            "noise_rng": state.noise.get_state(),
            "step": state.step,
        },
        path,
    )


def _read_archive(path) -> dict:
    try:
        ckpt = torch.load(path, map_location="cpu", weights_only=False)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    if ckpt.get("format_version") != FORMAT_VERSION:
        raise DataError(f"unsupported checkpoint version {ckpt.get('format_version')}")
    return ckpt


def load_checkpoint(path) -> TrainState:
    ckpt = _read_archive(path)
    if ckpt["kind"] != "train":
        raise DataError(f"{path} is a frozen model, not a training checkpoint")
    cfg = TrainConfig.from_dict(ckpt["config"])
    dtype = next(iter(ckpt["model"].values())).dtype
    state = init_state(cfg, dtype)
    state.model.load_state_dict(ckpt["model"])
    state.discriminator.load_state_dict(ckpt["discriminator"])
    state.opt_g.load_state_dict(ckpt["opt_g"])
    state.opt_d.load_state_dict(ckpt["opt_d"])
    state.noise.set_state(ckpt["noise_rng"])
    state.step = ckpt["step"]
    return state


# ---------------------------------------------------------------- inference model


class FrozenModel:
    """Immutable inference codec: rounding quantizer plus coding tables."""

    def __init__(self, model: MSAE, support: dict, tables: dict, config: TrainConfig | None = None):
        self.model = model.eval().requires_grad_(False)
        self.support = support
        self.tables = tables
        self.config = config
        self.s = model.s
        self.c_neck = {k: model.cfg.c_neck[k] for k in SCALES}
        self.fingerprint = _fingerprint(model, tables)
        self._bounds = {
            k: (
                torch.tensor([t.min_value for t in tables[k]], dtype=torch.float32).view(1, -1, 1, 1),
                torch.tensor([t.max_value for t in tables[k]], dtype=torch.float32).view(1, -1, 1, 1),
            )
            for k in SCALES
        }
        self.clip_count = 0

    def clip(self, scale: str, w_hat: torch.Tensor) -> torch.Tensor:
        lo, hi = (b.to(w_hat.dtype) for b in self._bounds[scale])
        n = int(((w_hat < lo) | (w_hat > hi)).sum())
        if n:
            self.clip_count += n
            log.warning("%d latents at scale %s clipped to the coding alphabet", n, scale)
        return torch.maximum(torch.minimum(w_hat, hi), lo)

    def forward_scales(self, pyramid, clip: bool = True):
        with torch.no_grad():
            return self.model.forward_scales(pyramid, "round", clip=self.clip if clip else None, with_rate=False)

    def save(self, path) -> None:
        torch.save(
            {
                "format_version": FORMAT_VERSION,
                "kind": "frozen",
                "config": self.config.to_dict() if self.config else None,
                "network": dataclasses.asdict(self.model.cfg),
                "s": self.s,
                "model": self.model.state_dict(),
                "support": {k: [list(p) for p in v] for k, v in self.support.items()},
                "tables": {k: [[t.offset, list(t.cdf)] for t in v] for k, v in self.tables.items()},
            },
            path,
        )


def _fingerprint(model: MSAE, tables: dict) -> bytes:
    h = hashlib.sha256()
    for name, tensor in sorted(model.state_dict().items()):
        h.update(name.encode())
        h.update(tensor.detach().cpu().contiguous().numpy().tobytes())
    for k in SCALES:
        for t in tables[k]:
            h.update(np.asarray([t.offset, *t.cdf], dtype=np.int64).tobytes())
    return h.digest()[:8]


def freeze_model(state) -> FrozenModel:
    """Switch to rounding, fix the coding alphabets and build CDF tables."""
    model = state.model if isinstance(state, TrainState) else state
    config = state.config if isinstance(state, TrainState) else None
    model = copy.deepcopy(model).eval()
    support, tables = {}, {}
    for k in SCALES:
        support[k] = compute_support(model.entropy_models[k])
        tables[k] = build_cdf_tables(model.entropy_models[k], support[k])
    return FrozenModel(model, support, tables, config)


def load_model(path) -> FrozenModel:
    """Load a frozen model, freezing a training checkpoint on the fly."""
    ckpt = _read_archive(path)
    if ckpt["kind"] == "train":
        return freeze_model(load_checkpoint(path))
    net = NetworkConfig(**ckpt["network"])
    model = MSAE(net, ckpt["s"])
    model = model.to(next(iter(ckpt["model"].values())).dtype)
    model.load_state_dict(ckpt["model"])
    support = {k: [tuple(p) for p in v] for k, v in ckpt["support"].items()}
    tables = {k: [CdfTable(o, tuple(c)) for o, c in v] for k, v in ckpt["tables"].items()}
    config = TrainConfig.from_dict(ckpt["config"]) if ckpt["config"] else None
    return FrozenModel(model, support, tables, config)


# ---------------------------------------------------------------- loop


LOG_FIELDS = ["step", "l_rd", "l_g", "l_d", "l_f"] + [f"{p}_{k}" for p in ("distortion", "rate") for k in SCALES]


def train(cfg: TrainConfig, data_dir, out_dir, resume=None) -> TrainState:
    """Run the configured number of steps, logging and checkpointing to ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    state = load_checkpoint(resume) if resume else init_state(cfg)
    cfg = state.config
    save_config(cfg, out / "config.json")
    data = load_dataset(data_dir, cfg.crop_size, "train", cfg.split, cfg.seed)
    if not len(data):
        raise DataError("training split is empty")
    stream = data.batches(cfg.batch_size)
    # skip batches already consumed before a resume
    for _ in range(state.step):
        next(stream)
    log_path = out / "train_log.csv"
    mode = "a" if resume and log_path.exists() else "w"
    with open(log_path, mode, newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=LOG_FIELDS)
        if mode == "w":
            writer.writeheader()
        while state.step < cfg.steps:
            state, bundle = train_step(next(stream), state)
            if state.step % cfg.log_every == 0 or state.step == cfg.steps:
                writer.writerow({"step": state.step, **bundle.as_floats()})
                fh.flush()
                log.info("step %d l_rd %.4f", state.step, float(bundle.l_rd.detach()))
            if cfg.checkpoint_every and state.step % cfg.checkpoint_every == 0:
                save_checkpoint(state, out / "checkpoint.pt")
    save_checkpoint(state, out / "checkpoint.pt")
    freeze_model(state).save(out / "model.pt")
    return state
