"""
Learned density, coding tables and the range coder
===================================================

Each latent channel gets a learned monotone CDF. Freezing turns it into a
16-bit frequency table, and the range coder spends close to
``-log2 p`` bits per symbol under that table.
"""

# %%
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import torch

from msae.entropy import FactorizedEntropyModel, build_cdf_tables, compute_support, rate_bits, table_bits
from msae.rangecoder import range_decode, range_encode

torch.manual_seed(0)
model = FactorizedEntropyModel(channels=1)

# Fit the density to integer samples from a discretized Laplacian.
samples = torch.round(torch.distributions.Laplace(0.0, 2.0).sample((4096,))).view(1, 1, 64, 64)
opt = torch.optim.Adam(model.parameters(), lr=1e-2)
for step in range(300):
    opt.zero_grad()
    bits = rate_bits(samples + torch.rand_like(samples) - 0.5, model) / samples.numel()
    bits.backward()
    opt.step()
print(f"training rate: {bits.item():.3f} bits/symbol")

# %%
support = compute_support(model)
table = build_cdf_tables(model, support)[0]
print("support", support[0], "table symbols", table.n_symbols)

symbols = [int(v) for v in samples.clamp(table.min_value, table.max_value).flatten()]
payload = range_encode(symbols, table)
assert range_decode(payload, len(symbols), table) == symbols
ideal = table_bits(symbols, [table] * len(symbols))
print(f"coded {len(payload) * 8} bits, ideal {ideal:.0f} bits")

# %%
values = np.arange(table.min_value, table.max_value + 1)
counts = np.bincount(np.array(symbols) - table.min_value, minlength=len(values))
fig, ax = plt.subplots(figsize=(6, 3.2))
ax.bar(values, counts / counts.sum(), alpha=0.5, label="samples")
ax.plot(values, table.freqs() / 2**16, "k.-", label="table")
ax.set_xlabel("latent value")
ax.legend()
fig.tight_layout()
fig.savefig("entropy_table.png", dpi=90)
