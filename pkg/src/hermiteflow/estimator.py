"""Empirical decay and smoothing rates of the fractional heat flow.

Measures norm ratios ||flow(t) f|| / ||f|| between phase-space norms over
test corpora, fits the large-time exponential rate (expected d^beta, the
bottom of the spectrum, for data with ground-mode content), bounds the
small-time blow-up of the smoothing constant t^(-sigma), and evaluates
the phase-space damping profile exp(-t(|x|^2 + |xi|^2)^beta) whose mixed
norm carries the same t^(-sigma) scaling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .hermite import (
    HermiteExpansion,
    analyze,
    basis_expansion,
    gauss_hermite_rule,
    total_degree_indices,
)
from .phasespace import (
    NormSpec,
    default_grid,
    gaussian_window,
    norm_evaluator,
)
from .semigroup import ExponentSet, FlowParams, apply_semigroup, theoretical_constant

__all__ = [
    "DecayReport",
    "CorpusFunction",
    "corpus",
    "generic_random_expansions",
    "measure_ratio",
    "fit_large_time",
    "fit_small_time",
    "large_time_times",
    "small_time_times",
    "damping_profile_norm",
    "fit_damping_slope",
    "singular_power",
    "smooth_cutoff",
    "bump",
]


@dataclass(frozen=True, eq=False)
class DecayReport:
    """Measured ratios over a time sweep plus fitted summary quantities.

    ``sup_bounded_constant`` is the supremum of ratio / C(t) with the
    two-regime bound normalized to c0 = 1 (the fitted constant K);
    ``sup_weighted`` is sup_t t^sigma * ratio(t) for small-time sweeps.
    """

    exponents: ExponentSet
    times: np.ndarray
    ratios: np.ndarray
    fitted_large_time_rate: Optional[float] = None
    fitted_small_time_slope: Optional[float] = None
    sup_bounded_constant: Optional[float] = None
    sup_weighted: Optional[float] = None
    name: str = ""

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        r = np.asarray(self.ratios, dtype=float)
        if t.shape != r.shape:
            raise ValueError("times and ratios must align")
        if np.any(r < 0) or not np.all(np.isfinite(r)):
            raise ValueError("ratios must be finite and non-negative")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "ratios", r)


# --------------------------------------------------------------------------
# test corpus
# --------------------------------------------------------------------------

def smooth_cutoff(radius, start_fraction=0.8):
    """C^inf transition from 1 inside start_fraction*radius to 0 at radius."""
    r0 = start_fraction * radius

    def _f(u):
        out = np.zeros_like(u)
        pos = u > 0
        out[pos] = np.exp(-1.0 / u[pos])
        return out

    def cut(x):
        u = (np.abs(np.asarray(x, dtype=float)) - r0) / (radius - r0)
        u = np.clip(u, 0.0, 1.0)
        a = _f(1.0 - u)
        b = _f(u)
        return a / (a + b)

    return cut


def singular_power(alpha, delta=1.0 / 64.0, radius=None):
    """Mollified power singularity (x^2 + delta^2)^(-alpha/2).

    Behaves like |x|^(-alpha) away from the origin, rounded at scale
    ``delta``; optionally cut off smoothly beyond ``radius`` so the tail
    does not leak past the measurement window.
    """
    cut = smooth_cutoff(radius) if radius is not None else None

    def f(x):
        x = np.asarray(x, dtype=float)
        out = (x * x + delta * delta) ** (-alpha / 2.0)
        if cut is not None:
            out = out * cut(x)
        return out

    return f


def bump(halfwidth=0.45):
    """Smooth bump supported in [-halfwidth, halfwidth], equal to 1 at 0."""

    def chi(x):
        x = np.asarray(x, dtype=float)
        u = x / halfwidth
        out = np.zeros_like(u)
        inside = np.abs(u) < 1.0
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
        return out

    return chi


@dataclass(frozen=True, eq=False)
class CorpusFunction:
    name: str
    dim: int
    expansion: HermiteExpansion
    fn: Optional[Callable] = None
    notes: str = ""


def corpus(degree=16, quad_order=None, alpha=0.3):
    """Deterministic one-dimensional stress corpus.

    Contains the two lowest eigenfunctions, a mollified power
    singularity, its chirp-modulated variant, a lattice of localized
    singularities, and the constant function.  Mollification scale is
    1/64, lattice cutoff halfwidth 0.45, and slowly decaying members are
    smoothly truncated at the default measurement window.
    """
    radius = default_grid(1, degree).x_extent
    order = quad_order or max(2 * degree + 1, 201)
    rule = gauss_hermite_rule(order)

    f_sing = singular_power(alpha, radius=radius)

    def f_chirp(x):
        return f_sing(x) * (1.0 + 0.5 * np.cos(np.asarray(x) ** 2))

    chi = bump(0.45)
    f_loc = singular_power(alpha)
    span = int(math.ceil(radius)) + 1

    def f_lattice(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for mu in range(-span, span + 1):
            out += f_loc(x - mu) * chi(x - mu)
        return out

    def f_const(x):
        return np.ones_like(np.asarray(x, dtype=float))

    members = [
        CorpusFunction(
            "ground_state", 1, basis_expansion(1, degree, (0,)), None, "eigenfunction"
        ),
        CorpusFunction(
            "first_excited", 1, basis_expansion(1, degree, (1,)), None, "eigenfunction"
        ),
        CorpusFunction(
            f"singular_power_{alpha}",
            1,
            analyze(f_sing, 1, degree, rule),
            f_sing,
            f"(x^2+delta^2)^(-{alpha}/2), delta=1/64, cutoff at {radius:.2f}",
        ),
        CorpusFunction(
            "chirp_singular",
            1,
            analyze(f_chirp, 1, degree, rule),
            f_chirp,
            "singular power times 1 + 0.5 cos(x^2)",
        ),
        CorpusFunction(
            "lattice_sum",
            1,
            analyze(f_lattice, 1, degree, rule),
            f_lattice,
            "integer translates of the singularity under a 0.45-bump",
        ),
        CorpusFunction(
            "constant_one",
            1,
            analyze(f_const, 1, degree, rule),
            f_const,
            "constant datum; represented by its truncation",
        ),
    ]
    return members


def generic_random_expansions(
    count, dim, degree, n_modes=10, seed=2024, min_ground_fraction=0.1
):
    """Random sparse expansions with guaranteed ground-mode content.

    Each draw actives the ground mode plus n_modes - 1 random others with
    iid standard complex normal coefficients; draws with ground-mode mass
    below ``min_ground_fraction`` of the total are rejected, since the
    bottom eigenvalue only dominates the decay when it is present.
    """
    rng = np.random.default_rng(seed)
    n_total = total_degree_indices(dim, degree).shape[0]
    n_modes = min(n_modes, n_total)
    out = []
    while len(out) < count:
        others = rng.choice(np.arange(1, n_total), size=n_modes - 1, replace=False)
        idx = np.concatenate(([0], others))
        c = np.zeros(n_total, dtype=np.complex128)
        c[idx] = rng.standard_normal(n_modes) + 1j * rng.standard_normal(n_modes)
        if abs(c[0]) >= min_ground_fraction * np.linalg.norm(c):
            out.append(HermiteExpansion(dim, degree, c))
    return out


# --------------------------------------------------------------------------
# ratio measurement and rate fitting
# --------------------------------------------------------------------------

def measure_ratio(f, params, exponents, grid=None, window=None, quad_order=None):
    """||flow(t) f||_{p2,q2} / ||f||_{p1,q1} for a single time."""
    if grid is None:
        grid = default_grid(f.dim, f.degree)
    window = gaussian_window(f.dim) if window is None else window
    num_eval = norm_evaluator(
        NormSpec(exponents.p2, exponents.q2), grid, window, f.dim, f.degree, quad_order
    )
    den_eval = norm_evaluator(
        NormSpec(exponents.p1, exponents.q1), grid, window, f.dim, f.degree, quad_order
    )
    den = den_eval(f)
    if not (np.isfinite(den) and den > 0):
        raise ValueError("initial datum has zero or non-finite source norm")
    return num_eval(apply_semigroup(f, params)) / den


def large_time_times(beta, dim, t_min=1.0, samples=41):
    """Arithmetic sweep over [1, 6/d^beta], matching the decay regime."""
    t_max = 6.0 / dim**beta
    if t_max <= t_min:
        t_max = 2.0 * t_min
    return np.linspace(t_min, t_max, samples)


def small_time_times(t_min=1e-3, t_max=1.0, samples=25):
    """Geometric sweep over (0, 1], matching the smoothing regime."""
    return np.geomspace(t_min, t_max, samples)


def _ratio_sweep(f, beta, times, exponents, grid, window, quad_order):
    if grid is None:
        grid = default_grid(f.dim, f.degree)
    window = gaussian_window(f.dim) if window is None else window
    num_eval = norm_evaluator(
        NormSpec(exponents.p2, exponents.q2), grid, window, f.dim, f.degree, quad_order
    )
    den_eval = norm_evaluator(
        NormSpec(exponents.p1, exponents.q1), grid, window, f.dim, f.degree, quad_order
    )
    den = den_eval(f)
    if not (np.isfinite(den) and den > 0):
        raise ValueError("initial datum has zero or non-finite source norm")
    ratios = np.array(
        [
            num_eval(apply_semigroup(f, FlowParams(beta, float(t), f.dim))) / den
            for t in times
        ]
    )
    return np.asarray(times, dtype=float), ratios


def _tail_rate(times, log_ratios):
    """Decay rate from the stabilized tail of a log-ratio curve.

    Local slopes of log(ratio) converge geometrically to the asymptotic
    rate as higher modes die out; on a uniform mesh an Aitken delta^2
    step removes the leading contamination exactly, so the estimate
    reaches the asymptotic rate well before the raw slopes do.  Falls
    back to the last raw slope when the extrapolation is ill-conditioned.
    """
    slopes = np.diff(log_ratios) / np.diff(times)
    mean = slopes.mean()
    if np.max(np.abs(slopes - mean)) <= 1e-9 * (1.0 + abs(mean)):
        return -mean  # already a pure exponential
    if slopes.size < 3:
        return -slopes[-1]
    steps = np.diff(times)
    if np.max(np.abs(steps - steps[0])) > 1e-8 * steps[0]:
        return -slopes[-1]  # extrapolation needs a uniform mesh
    s1, s2, s3 = slopes[-3], slopes[-2], slopes[-1]
    d1, d2 = s2 - s1, s3 - s2
    denom = d2 - d1
    if abs(denom) < 1e-14 * (1.0 + abs(s3)):
        return -s3
    extrapolated = s3 - d2 * d2 / denom
    if abs(extrapolated - s3) > 0.5 * (1.0 + abs(s3)):
        return -s3  # reject wild extrapolations
    return -extrapolated


def fit_large_time(
    f, beta, times, exponents, grid=None, window=None, quad_order=None, name=""
):
    """Fit the exponential decay rate of the ratio over a late-time sweep.

    Requires at least 5 samples.  Times where the ratio has underflowed
    below 1e-12 of its initial value are excluded; if too few survive the
    sweep horizon must be reduced.
    """
    times = np.asarray(times, dtype=float)
    if times.size < 5:
        raise ValueError("need at least 5 time samples for a rate fit")
    times, ratios = _ratio_sweep(f, beta, times, exponents, grid, window, quad_order)
    keep = ratios > 1e-12 * ratios[0]
    if keep.sum() < 5:
        raise ValueError("ratios underflow before the sweep ends; reduce the horizon")
    t, r = times[keep], ratios[keep]
    rate = _tail_rate(t, np.log(r))
    sup_const = float(
        np.max(
            [
                ri / theoretical_constant(FlowParams(beta, ti, f.dim), exponents, 1.0)
                for ti, ri in zip(t, r)
            ]
        )
    )
    return DecayReport(
        exponents=exponents,
        times=times,
        ratios=ratios,
        fitted_large_time_rate=float(rate),
        sup_bounded_constant=sup_const,
        name=name,
    )


def fit_small_time(
    family, beta, times, exponents, grid=None, window=None, quad_order=None
):
    """Small-time smoothing probe for a family of initial data.

    Exponents are first reduced (targets replaced by min(source, target):
    no smoothing comes for free), fixing the exponent sigma.  For each
    member the report carries sup_t t^sigma * ratio(t), the log-log
    slope of the ratio, and the fitted bound constant.  The slope is
    fitted on the lower half of the sweep (log scale), where the
    small-time regime dominates and the late exponential decay does not
    pollute the exponent.
    """
    reduced = exponents.reduced()
    results = []
    for member in family:
        if isinstance(member, CorpusFunction):
            f, name = member.expansion, member.name
        else:
            f, name = member, ""
        sigma = reduced.sigma(f.dim, beta)
        t, r = _ratio_sweep(f, beta, times, reduced, grid, window, quad_order)
        if np.any(r <= 0):
            raise ValueError("non-positive ratio in the small-time sweep")
        low = t <= math.sqrt(t[0] * t[-1])
        slope = np.polyfit(np.log(t[low]), np.log(r[low]), 1)[0]
        weighted = t**sigma * r
        sup_const = float(
            np.max(
                [
                    ri / theoretical_constant(FlowParams(beta, ti, f.dim), reduced, 1.0)
                    for ti, ri in zip(t, r)
                ]
            )
        )
        results.append(
            DecayReport(
                exponents=reduced,
                times=t,
                ratios=r,
                fitted_small_time_slope=float(slope),
                sup_bounded_constant=sup_const,
                sup_weighted=float(weighted.max()),
                name=name,
            )
        )
    return results


# --------------------------------------------------------------------------
# damping-profile heuristic
# --------------------------------------------------------------------------

def damping_profile_norm(t, beta, ptilde, qtilde, extent, n=4097):
    """Mixed L^{p~,q~} norm over the plane of exp(-t (x^2 + xi^2)^beta).

    One-dimensional signal domain (two phase-space variables).  Rows over
    xi are reduced in x first with exponent p~, then aggregated in xi
    with exponent q~; rectangle sums on [-extent, extent]^2.
    """
    axis = np.linspace(-extent, extent, n)
    h = 2.0 * extent / (n - 1)
    x2 = axis * axis
    inner = np.empty(n)
    for j in range(n):
        with np.errstate(under="ignore"):
            row = np.exp(-t * (x2 + x2[j]) ** beta)
        if math.isinf(ptilde):
            inner[j] = row.max()
        else:
            inner[j] = (np.sum(row**ptilde) * h) ** (1.0 / ptilde)
    if math.isinf(qtilde):
        return float(inner.max())
    return float((np.sum(inner**qtilde) * h) ** (1.0 / qtilde))


def fit_damping_slope(times, beta, exponents, n=4097):
    """Log-log slope of the damping-profile norm; the model answer is
    -sigma for the reduced exponent pair."""
    reduced = exponents.reduced()
    ptilde, qtilde = reduced.ptilde, reduced.qtilde
    t_min = float(np.min(times))
    extent = (37.0 / t_min) ** (1.0 / (2.0 * beta)) + 2.0
    vals = np.array(
        [damping_profile_norm(float(t), beta, ptilde, qtilde, extent, n) for t in times]
    )
    slope = np.polyfit(np.log(times), np.log(vals), 1)[0]
    return float(slope), vals
