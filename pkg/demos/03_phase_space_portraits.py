"""Phase-space portraits and mixed norms.

Computes windowed transforms |V_g f| for a few signals, renders them over
the (x, xi) plane, and tabulates modulation and Wiener-amalgam norms for
several exponent pairs, including the transform-duality check.
"""

import math
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from hermiteflow.estimator import corpus
from hermiteflow.hermite import basis_expansion
from hermiteflow.phasespace import (
    NormSpec,
    PhaseSpaceGrid,
    amalgam_norm,
    duality_constant,
    fourier_transform,
    gaussian_window,
    mixed_norm,
    modulation_norm,
    stft,
)

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

grid = PhaseSpaceGrid(1, 8.0, 8.0, 129, 129)
window = gaussian_window(1)

signals = {
    "ground state": basis_expansion(1, 8, (0,)),
    "mode 5": basis_expansion(1, 8, (5,)),
    "chirped singularity": next(
        m for m in corpus(degree=16) if m.name == "chirp_singular"
    ).expansion,
}

fig, axes = plt.subplots(1, 3, figsize=(14, 4))
for ax, (name, sig) in zip(axes, signals.items()):
    mat = stft(sig, window, grid)
    ax.imshow(
        np.abs(mat.values).T,
        origin="lower",
        extent=[-8, 8, -8, 8],
        aspect="equal",
        cmap="magma",
    )
    ax.set(title=name, xlabel="x", ylabel="xi")
fig.tight_layout()
fig.savefig(OUT / "phase_space_portraits.png", dpi=110)
print(f"wrote {OUT / 'phase_space_portraits.png'}\n")

# --- norm table -------------------------------------------------------------
specs = [(2.0, 2.0), (4.0, 2.0), (math.inf, 1.0), (1.0, math.inf)]
print(f"{'signal':>22} " + " ".join(f"M^({p:g},{q:g})".rjust(12) for p, q in specs))
for name, sig in signals.items():
    vals = [modulation_norm(sig, NormSpec(p, q), grid, window) for p, q in specs]
    print(f"{name:>22} " + " ".join(f"{v:12.4f}" for v in vals))

# --- duality: frequency-inner norm of f vs position-inner norm of F^-1 f ----
print("\nduality check (amalgam vs modulation of the inverse transform):")
c = duality_constant(NormSpec(3, 1.5), grid, window)
for n in range(3):
    mode = basis_expansion(1, 4, (n,))
    wa = amalgam_norm(mode, NormSpec(3, 1.5, order="amalgam"), grid, window)
    mo = modulation_norm(fourier_transform(mode, -1), NormSpec(3, 1.5), grid, window)
    print(f"  mode {n}: normalized ratio = {wa / (c * mo):.12f}")
