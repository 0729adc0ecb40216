"""Fixed-time estimates of the flow, measured.

Large times: the norm ratio of generic data decays like exp(-t d^beta),
the bottom of the spectrum; data missing the ground mode decays at the
next eigenvalue instead.  Small times: asking the flow for extra
summability costs t^(-sigma), probed on the mollified-singularity family
and reproduced by the phase-space damping profile.
"""

import math
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from hermiteflow.estimator import (
    corpus,
    fit_damping_slope,
    fit_large_time,
    fit_small_time,
    generic_random_expansions,
    large_time_times,
    small_time_times,
)
from hermiteflow.hermite import basis_expansion
from hermiteflow.semigroup import ExponentSet

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

L2 = ExponentSet(2.0, 2.0, 2.0, 2.0)

# --- large-time rates -------------------------------------------------------
print("large-time decay rates (d = 1):")
for beta in [0.5, 1.0, 2.0]:
    times = large_time_times(beta, 1)
    rep = fit_large_time(basis_expansion(1, 10, (0,)), beta, times, L2)
    print(f"  beta = {beta}: ground state rate = {rep.fitted_large_time_rate:.6f}"
          f" (bottom eigenvalue {1.0**beta:.3f})")
rep_excited = fit_large_time(
    basis_expansion(1, 10, (1,)), 1.0, large_time_times(1.0, 1), L2
)
print(f"  no ground mode: rate = {rep_excited.fitted_large_time_rate:.6f}"
      " (next eigenvalue 3)")
worst = 0.0
for f in generic_random_expansions(10, 1, 10, seed=2024):
    r = fit_large_time(f, 1.0, large_time_times(1.0, 1), L2)
    worst = max(worst, abs(r.fitted_large_time_rate - 1.0))
print(f"  10 generic random data: worst rate deviation {worst:.2e}\n")

# --- small-time smoothing ---------------------------------------------------
exps = ExponentSet(math.inf, math.inf, 2.0, 2.0)
times = small_time_times(1e-3, 1.0, 13)
members = [m for m in corpus(degree=16) if m.name == "singular_power_0.3"]
fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))
for beta in [1.0, 2.0]:
    sigma = exps.reduced().sigma(1, beta)
    reports = fit_small_time(members, beta, times, exps)
    rep = reports[0]
    ax1.loglog(rep.times, rep.ratios, "o-", label=f"beta = {beta}")
    ax1.loglog(times, rep.sup_weighted * times**-sigma, ":", lw=1)
    slope, vals = fit_damping_slope(times, beta, exps, n=2049)
    ax2.loglog(times, vals / vals[-1], "s-", label=f"beta = {beta}, slope {slope:.3f}")
    print(f"beta = {beta}: sigma = {sigma:.3f}, sup t^sigma ratio = "
          f"{rep.sup_weighted:.4f}, damping-profile slope = {slope:.4f}")
ax1.set(title="norm ratio, sup-norm source to L2 target", xlabel="t")
ax1.legend()
ax1.grid(alpha=0.3, which="both")
ax2.set(title="damping-profile norm (scaled)", xlabel="t")
ax2.legend()
ax2.grid(alpha=0.3, which="both")
fig.tight_layout()
fig.savefig(OUT / "decay_and_smoothing.png", dpi=110)
print(f"\nwrote {OUT / 'decay_and_smoothing.png'}")
