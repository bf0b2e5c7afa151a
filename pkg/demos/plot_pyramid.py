"""
Three-scale pyramid and residual telescoping
============================================

An image is split into full, half and quarter resolution copies. The codec
codes the quarter image directly and each finer scale as a residual against
the upsampled reconstruction below it. With perfect residuals the sum
telescopes back to the input bit for bit.
"""

# %%
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
from skimage import data

from msae.imageio import to_tensor, to_uint8
from msae.pyramid import build_pyramid, compose_reconstruction, upscale

img = data.astronaut()[::2, ::2]  # 256 x 256
x = to_tensor(img)
pyr = build_pyramid(x, s=2)
print([tuple(level.shape[-2:]) for level in pyr.coarse_to_fine])

# %%
# Residuals against the upsampled coarser level. Here each "decoder" is
# the identity, so the prior is just the upsampled target.
quarter, half, full = pyr.coarse_to_fine
r_half = half - upscale(quarter)
r_full = full - upscale(upscale(quarter) + r_half)
rec = compose_reconstruction([quarter, r_half, r_full])
print("max abs error:", float((rec - x).abs().max()))

# %%
fig, axes = plt.subplots(1, 4, figsize=(12, 3.4))
panels = [to_uint8(quarter), to_uint8(half), r_full[0].abs().sum(0).numpy(), to_uint8(rec)]
titles = ["quarter", "half", "|full-scale residual|", "telescoped"]
for ax, im, title in zip(axes, panels, titles):
    ax.imshow(im, cmap="magma" if im.ndim == 2 else None)
    ax.set_title(title)
    ax.axis("off")
fig.tight_layout()
fig.savefig("pyramid.png", dpi=90)
