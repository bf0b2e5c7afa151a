"""
Layered bitstream and spatial scalability
=========================================

Encoding writes three arithmetic-coded layers, coarse first. Any prefix that
ends on a layer boundary decodes on its own, giving a lower-resolution
preview upscaled to full size.

Run ``plot_training.py`` first; it leaves ``demo_model.pt`` behind.
"""

# %%
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
from skimage import data
from skimage.transform import resize

from msae import decode_bytes, encode_tensor, load_model, psnr
from msae.bitstream import split_stream
from msae.imageio import to_tensor, to_uint8

if not Path("demo_model.pt").exists():
    raise SystemExit("run plot_training.py first")
model = load_model("demo_model.pt")

img = (resize(data.astronaut(), (128, 128), anti_aliasing=True) * 255).round().astype(np.uint8)
x = to_tensor(img)
stream, report = encode_tensor(x, model)
print(f"{report.file_bytes} bytes = {report.bpp:.4f} bpp; header {report.header_bytes} bytes")
print("layer bytes (k/4, k/2, k):", report.payload_bytes)

# %%
header, payloads = split_stream(stream)
fig, axes = plt.subplots(1, 3, figsize=(9, 3.4))
for n, ax in zip((1, 2, 3), axes):
    prefix = stream[: header.length + sum(len(p) for p in payloads[:n])]
    dec = decode_bytes(prefix, model)
    ax.imshow(to_uint8(dec.reconstruction))
    ax.set_title(f"{n} layer(s): {len(prefix)} B, {psnr(x, dec.reconstruction):.2f} dB")
    ax.axis("off")
fig.tight_layout()
fig.savefig("prefixes.png", dpi=90)
