"""
Rate and quality report over a folder
=====================================

``rd_report`` codes every image in a directory and writes a CSV of bpp,
PSNR and SSIM with per-layer rates, plus comparison panels and an RD
scatter. The ``msae eval`` command wraps the same function.
"""

# %%
from pathlib import Path

import numpy as np
from PIL import Image
from skimage import data

from msae import load_model
from msae.report import rd_report

if not Path("demo_model.pt").exists():
    raise SystemExit("run plot_training.py first")

folder = Path("demo_images")
folder.mkdir(exist_ok=True)
for name in ("astronaut", "coffee", "chelsea", "rocket"):
    img = getattr(data, name)()
    Image.fromarray(np.asarray(Image.fromarray(img).resize((128, 96)))).save(folder / f"{name}.png")

records = rd_report(load_model("demo_model.pt"), folder, "demo_report")
for r in records:
    print(f"{r.image:14s} {r.bpp:.4f} bpp  {r.psnr:6.2f} dB  SSIM {r.ssim:.4f}")
print(Path("demo_report/rd_report.csv").read_text())
