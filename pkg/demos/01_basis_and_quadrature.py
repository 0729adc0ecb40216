"""Eigenbasis warm-up: stable evaluation, quadrature exactness, transforms.

Evaluates normalized Hermite functions far past where naive recurrences
overflow, checks Gauss-Hermite moment exactness against the closed-form
double factorials, and round-trips a random expansion through
synthesize/analyze.  Writes a figure with the first few basis functions
and the Gram-matrix error.
"""

import math
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from hermiteflow.hermite import (
    analyze,
    gauss_hermite_rule,
    hermite_eval,
    hermite_matrix,
    random_expansion,
    synthesize,
)

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

# --- stable evaluation far beyond the naive overflow threshold -----------
print("normalized Hermite function values:")
for n, x in [(0, 0.0), (5, 1.3), (300, 20.0), (2000, math.sqrt(4000) + 10)]:
    print(f"  h_{n}({x:8.3f}) = {hermite_eval(n, x): .6e}")

# --- quadrature exactness -------------------------------------------------
rule = gauss_hermite_rule(20)
print("\nGauss-Hermite moment check (order 20):")
for m in [4, 18, 38]:
    exact = math.sqrt(math.pi) * math.prod(range(1, m, 2)) / 2.0 ** (m // 2)
    approx = float(np.sum(rule.weights * rule.nodes**m))
    print(f"  integral x^{m} e(-x^2) dx: relative error {abs(approx-exact)/exact:.2e}")

# --- orthonormality and round trip ---------------------------------------
H = hermite_matrix(12, rule.nodes)
gram = H @ np.diag(rule.lifted_weights()) @ H.T
print(f"\nGram matrix vs identity: max deviation {np.abs(gram - np.eye(13)).max():.2e}")

rng = np.random.default_rng(0)
e = random_expansion(1, 8, rng)
back = analyze(lambda x: synthesize(e, x.ravel()).reshape(x.shape), 1, 8)
print(f"analyze(synthesize(e)) round trip: {np.abs(back.coeffs - e.coeffs).max():.2e}")

# --- figure ---------------------------------------------------------------
x = np.linspace(-6, 6, 601)
fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))
for n in range(4):
    ax1.plot(x, hermite_eval(n, x), label=f"$h_{n}$")
ax1.set(title="normalized Hermite functions", xlabel="x")
ax1.legend()
ax1.grid(alpha=0.3)
im = ax2.imshow(np.log10(np.abs(gram - np.eye(13)) + 1e-18), cmap="viridis")
ax2.set(title="log10 |Gram - I|")
fig.colorbar(im, ax=ax2)
fig.tight_layout()
fig.savefig(OUT / "basis_and_quadrature.png", dpi=110)
print(f"\nwrote {OUT / 'basis_and_quadrature.png'}")
