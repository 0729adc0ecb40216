"""The fractional heat flow, two ways.

Applies exp(-t H^beta) spectrally (diagonal in the eigenbasis) and, for
beta = 1, through the closed-form Mehler integral kernel, then compares.
Also shows the pure exponential decay of the ground mode for several
fractional exponents.
"""

import math
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from hermiteflow.hermite import (
    basis_expansion,
    gauss_hermite_rule,
    random_expansion,
    synthesize_on_grid,
)
from hermiteflow.semigroup import FlowParams, apply_semigroup, mehler_apply

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

rng = np.random.default_rng(1)
rule = gauss_hermite_rule(140)
lw = rule.lifted_weights()

# --- kernel vs spectral ----------------------------------------------------
e = random_expansion(1, 12, rng)
ts = np.geomspace(0.05, 3.0, 9)
errors = []
for t in ts:
    spectral = synthesize_on_grid(apply_semigroup(e, FlowParams(1.0, t, 1)), (rule.nodes,))
    kernel = mehler_apply(synthesize_on_grid(e, (rule.nodes,)), t, rule)
    num = math.sqrt(np.sum(lw * np.abs(kernel - spectral) ** 2))
    den = math.sqrt(np.sum(lw * np.abs(spectral) ** 2))
    errors.append(num / den)
print("spectral vs Mehler-kernel relative L2 error:")
for t, err in zip(ts, errors):
    print(f"  t = {t:5.3f}: {err:.2e}")

# --- ground-mode decay rates ----------------------------------------------
ts_decay = np.linspace(0.0, 4.0, 81)
fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))
g = basis_expansion(1, 0, (0,))
for beta in [0.5, 1.0, 2.0]:
    norms = [apply_semigroup(g, FlowParams(beta, t, 1)).l2_norm() for t in ts_decay]
    ax1.semilogy(ts_decay, norms, label=f"beta = {beta}")
ax1.semilogy(ts_decay, np.exp(-ts_decay), "k:", lw=1, label="exp(-t)")
ax1.set(title="ground-mode decay (d = 1)", xlabel="t", ylabel="L2 norm")
ax1.legend()
ax1.grid(alpha=0.3)

ax2.loglog(ts, errors, "o-")
ax2.set(title="kernel oracle vs spectral flow", xlabel="t", ylabel="relative L2 error")
ax2.grid(alpha=0.3, which="both")
fig.tight_layout()
fig.savefig(OUT / "semigroup_and_kernel.png", dpi=110)
print(f"\nwrote {OUT / 'semigroup_and_kernel.png'}")
