"""
Rate-distortion training on one image
=====================================

A short desk-scale run: each step updates the multiscale critic on detached
reconstructions, then the three autoencoders and their entropy models
on the compound rate-distortion loss. Expect roughly 0.2 s per step on one
CPU core.
"""

# %%
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
from skimage import data
from skimage.transform import resize

from msae import TrainConfig, freeze_model, init_state, train_step
from msae.imageio import to_tensor, to_uint8
from msae.pyramid import build_pyramid

img = (resize(data.astronaut(), (128, 128), anti_aliasing=True) * 255).round().astype(np.uint8)
x = to_tensor(img)

cfg = TrainConfig(batch_size=1, steps=300)
state = init_state(cfg)
history = []
for _ in range(cfg.steps):
    state, losses = train_step(x, state)
    history.append(losses.as_floats())

# %%
fig, axes = plt.subplots(1, 2, figsize=(10, 3.2))
axes[0].semilogy([h["l_rd"] for h in history])
axes[0].set_title("compound loss")
for k in ("k4", "k2", "k"):
    axes[1].plot([h[f"rate_{k}"] for h in history], label=k)
axes[1].set_title("rate per image (bits)")
axes[1].legend()
fig.tight_layout()
fig.savefig("training_curves.png", dpi=90)

# %%
# Freezing switches to rounding and builds the coding tables.
frozen = freeze_model(state)
rec = frozen.forward_scales(build_pyramid(x)).full
fig, axes = plt.subplots(1, 2, figsize=(6, 3.2))
for ax, im, title in zip(axes, (img, to_uint8(rec)), ("input", f"after {cfg.steps} steps")):
    ax.imshow(im)
    ax.set_title(title)
    ax.axis("off")
fig.savefig("training_reconstruction.png", dpi=90)
frozen.save("demo_model.pt")
