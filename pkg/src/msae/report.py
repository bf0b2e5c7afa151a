"""Batch evaluation: per-image records, comparison panels and an RD scatter."""

from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .codec import decode_image, encode_image
from .imageio import list_images, read_rgb
from .metrics import bpp, psnr, ssim

log = logging.getLogger(__name__)

CSV_FIELDS = ["image", "bpp", "psnr", "ssim", "bpp_k4", "bpp_k2", "bpp_k", "bpp_header"]


@dataclass
class EvalRecord:
    image: str
    bpp: float
    psnr: float
    ssim: float
    bpp_k4: float
    bpp_k2: float
    bpp_k: float
    bpp_header: float


def evaluate_image(path, model, out_dir) -> EvalRecord:
    """Encode, decode and score one image; artifacts land in ``out_dir``."""
    path, out_dir = Path(path), Path(out_dir)
    stream = out_dir / f"{path.stem}.msae"
    recon = out_dir / f"{path.stem}_rec.png"
    enc = encode_image(path, model, stream)
    decode_image(stream, model, recon)
    rates = bpp(stream, enc.orig_size)
    orig, rec = read_rgb(path), read_rgb(recon)
    return EvalRecord(
        path.name,
        rates["bpp"],
        psnr(orig, rec),
        ssim(orig, rec),
        *rates["layer_bpp"],
        rates["header_bpp"],
    )


def _panel(path: Path, orig: np.ndarray, rec: np.ndarray, rec_info: EvalRecord):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(8, 4.4))
    for ax, img, title in zip(
        axes, (orig, rec), ("original", f"{rec_info.bpp:.4f} bpp, {rec_info.psnr:.2f} dB, {rec_info.ssim:.4f}")
    ):
        ax.imshow(img)
        ax.set_title(title, fontsize=9)
        ax.axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)


def _scatter(path: Path, records):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(8, 3.5))
    rates = [r.bpp for r in records]
    for ax, key, label in zip(axes, ("psnr", "ssim"), ("PSNR (dB)", "SSIM")):
        ax.scatter(rates, [getattr(r, key) for r in records], s=12)
        ax.set_xlabel("bpp")
        ax.set_ylabel(label)
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)


def rd_report(model, image_dir, out_dir, panels: bool = True, figure: bool = True) -> list[EvalRecord]:
    """Evaluate every image in ``image_dir``; failures are logged and skipped."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for path in list_images(image_dir):
        try:
            rec = evaluate_image(path, model, out_dir)
        except Exception as exc:
            log.error("evaluation of %s failed: %s", path.name, exc)
            continue
        records.append(rec)
        if panels:
            _panel(out_dir / f"{path.stem}_panel.png", read_rgb(path), read_rgb(out_dir / f"{path.stem}_rec.png"), rec)
    with open(out_dir / "rd_report.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for r in records:
            row = asdict(r)
            writer.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in row.items()})
    if figure and records:
        _scatter(out_dir / "rd_scatter.png", records)
    return records
