"""hermiteflow: spectral tools for the harmonic oscillator -Delta + |x|^2.

Fractional heat flows e^{-t H^beta} in the Hermite eigenbasis, phase-space
(modulation / Wiener-amalgam) norms via the short-time Fourier transform,
decay and smoothing rate measurements, and a Duhamel/Picard solver for the
semilinear heat equation with a power nonlinearity.
"""

from .hermite import (
    HermiteExpansion,
    QuadratureRule,
    analyze,
    basis_expansion,
    gauss_hermite_rule,
    hermite_eval,
    hermite_eval_multi,
    hermite_matrix,
    index_orders,
    project,
    random_expansion,
    shubin_norm,
    synthesize,
    synthesize_on_grid,
    total_degree_indices,
    zero_expansion,
)

__version__ = "0.1.0"
