"""Normalized Hermite functions, Gauss-Hermite quadrature, and truncated
spectral expansions for the harmonic oscillator -Delta + |x|^2.

The basis functions are the L^2-normalized Hermite functions

    h_n(x) = (2^n n! sqrt(pi))^{-1/2} H_n(x) exp(-x^2/2),

tensorized over axes in higher dimension.  A degree-N expansion keeps every
multi-index with total order <= N (simplex truncation), which matches the
eigenspace structure of the operator: the eigenvalue of a mode alpha is
2|alpha| + d.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_hermite

__all__ = [
    "QuadratureRule",
    "HermiteExpansion",
    "hermite_eval",
    "hermite_eval_multi",
    "hermite_matrix",
    "gauss_hermite_rule",
    "total_degree_indices",
    "index_orders",
    "basis_expansion",
    "zero_expansion",
    "random_expansion",
    "analyze",
    "synthesize",
    "synthesize_on_grid",
    "project",
    "shubin_norm",
]

MAX_DIM = 3

# Mantissa rescale step for the three-term recurrence.  Powers of two keep the
# rescaling exact; 2^500 leaves ample headroom below the overflow threshold.
_RESCALE = 2.0**500
_LOG_RESCALE = 500.0 * math.log(2.0)


def _materialize(mantissa, logscale):
    """Recombine value = mantissa * exp(logscale) without over/underflow."""
    out = np.zeros_like(mantissa)
    nz = mantissa != 0.0
    with np.errstate(under="ignore"):
        out[nz] = np.sign(mantissa[nz]) * np.exp(
            logscale[nz] + np.log(np.abs(mantissa[nz]))
        )
    return out


def hermite_eval(n, x):
    """Evaluate the normalized 1-D Hermite function h_n at x.

    Uses the normalized three-term recurrence with a running log-scale
    factor, so it stays finite for orders up to a few thousand and
    arguments well beyond the classical turning point, where both the
    Gaussian factor and the polynomial part leave the double range.

    Parameters
    ----------
    n : int
        Order, >= 0.
    x : float or ndarray
        Evaluation point(s).

    Returns
    -------
    float or ndarray matching the shape of ``x``.
    """
    if n < 0:
        raise ValueError("Hermite order must be non-negative")
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    flat = np.atleast_1d(arr).ravel()

    logscale = -0.5 * flat * flat
    m_prev = np.full(flat.shape, math.pi ** -0.25)
    if n == 0:
        out = _materialize(m_prev, logscale)
        return float(out[0]) if scalar else out.reshape(arr.shape)
    m_cur = math.sqrt(2.0) * flat * m_prev
    for j in range(2, n + 1):
        m_next = math.sqrt(2.0 / j) * flat * m_cur - math.sqrt((j - 1) / j) * m_prev
        m_prev, m_cur = m_cur, m_next
        big = np.abs(m_cur) > _RESCALE
        if big.any():
            # Rescale both registers so the pair stays consistent.
            m_cur = np.where(big, m_cur / _RESCALE, m_cur)
            m_prev = np.where(big, m_prev / _RESCALE, m_prev)
            logscale = logscale + np.where(big, _LOG_RESCALE, 0.0)
    out = _materialize(m_cur, logscale)
    return float(out[0]) if scalar else out.reshape(arr.shape)


def hermite_matrix(nmax, x):
    """All normalized Hermite functions h_0..h_nmax at the points ``x``.

    Returns an array of shape ``(nmax + 1, len(x))``.
    """
    flat = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    H = np.empty((nmax + 1, flat.size))
    logscale = -0.5 * flat * flat
    m_prev = np.full(flat.shape, math.pi ** -0.25)
    H[0] = _materialize(m_prev, logscale)
    if nmax == 0:
        return H
    m_cur = math.sqrt(2.0) * flat * m_prev
    H[1] = _materialize(m_cur, logscale)
    for j in range(2, nmax + 1):
        m_next = math.sqrt(2.0 / j) * flat * m_cur - math.sqrt((j - 1) / j) * m_prev
        m_prev, m_cur = m_cur, m_next
        big = np.abs(m_cur) > _RESCALE
        if big.any():
            m_cur = np.where(big, m_cur / _RESCALE, m_cur)
            m_prev = np.where(big, m_prev / _RESCALE, m_prev)
            logscale = logscale + np.where(big, _LOG_RESCALE, 0.0)
        H[j] = _materialize(m_cur, logscale)
    return H


def hermite_eval_multi(alpha, x):
    """Evaluate the tensor-product Hermite function of multi-index alpha.

    ``x`` may be a single point (length-d sequence) or an array of points
    of shape (..., d).
    """
    alpha = tuple(int(a) for a in alpha)
    pts = np.asarray(x, dtype=float)
    d = len(alpha)
    if pts.ndim == 1:
        if pts.shape[0] != d:
            raise ValueError(f"point has {pts.shape[0]} coordinates, multi-index has {d}")
        return float(np.prod([hermite_eval(alpha[i], float(pts[i])) for i in range(d)]))
    if pts.shape[-1] != d:
        raise ValueError(f"points have {pts.shape[-1]} coordinates, multi-index has {d}")
    out = np.ones(pts.shape[:-1])
    for i in range(d):
        out = out * hermite_eval(alpha[i], pts[..., i])
    return out


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Gauss-Hermite nodes and weights for the weight exp(-x^2).

    ``sum(weights * f(nodes))`` approximates ``integral f(x) exp(-x^2) dx``
    and is exact for polynomials of degree <= 2*order - 1.
    """

    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def lifted_weights(self):
        """Weights for plain integrals of Gaussian-decaying integrands.

        ``sum(lifted_weights * f(nodes))`` approximates ``integral f dx``
        when f itself carries at least exp(-x^2)-type decay; the Gaussian
        factor of the weight is absorbed analytically (computed in log
        space so large nodes do not overflow the exp(x^2) factor).
        """
        return np.exp(np.log(self.weights) + self.nodes**2)


def gauss_hermite_rule(n):
    """Gauss-Hermite rule of the given order (n >= 1 nodes)."""
    if n < 1:
        raise ValueError("quadrature order must be >= 1")
    nodes, weights = roots_hermite(int(n))
    # Enforce the symmetry invariants exactly.
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(nodes=nodes, weights=weights, order=int(n))


def _compositions(total, dim):
    if dim == 1:
        return [(total,)]
    out = []
    for first in range(total + 1):
        out.extend((first,) + rest for rest in _compositions(total - first, dim - 1))
    return out


@lru_cache(maxsize=None)
def total_degree_indices(dim, degree):
    """Multi-indices with |alpha| <= degree, in graded lexicographic order.

    Entries are sorted by (|alpha|, alpha) ascending; this is the "grlex"
    ordering used by the serialization container.
    """
    if not 1 <= dim <= MAX_DIM:
        raise ValueError(f"dimension must be in 1..{MAX_DIM}")
    if degree < 0:
        raise ValueError("degree must be non-negative")
    rows = []
    for k in range(degree + 1):
        rows.extend(sorted(_compositions(k, dim)))
    arr = np.array(rows, dtype=np.int64).reshape(-1, dim)
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=None)
def index_orders(dim, degree):
    """Total order |alpha| for each entry of ``total_degree_indices``."""
    orders = total_degree_indices(dim, degree).sum(axis=1)
    orders.setflags(write=False)
    return orders


@dataclass(frozen=True, eq=False)
class HermiteExpansion:
    """Truncated coefficient vector of a function in the Hermite basis.

    ``coeffs`` is complex and flat, indexed by ``total_degree_indices(dim,
    degree)``.  Expansions are immutable; arithmetic returns new objects.
    """

    dim: int
    degree: int
    coeffs: np.ndarray

    def __post_init__(self):
        if not 1 <= self.dim <= MAX_DIM:
            raise ValueError(f"dimension must be in 1..{MAX_DIM}")
        if self.degree < 0:
            raise ValueError("degree must be non-negative")
        expected = total_degree_indices(self.dim, self.degree).shape[0]
        c = np.asarray(self.coeffs, dtype=np.complex128).reshape(-1).copy()
        if c.size != expected:
            raise ValueError(
                f"expected {expected} coefficients for dim={self.dim}, "
                f"degree={self.degree}, got {c.size}"
            )
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def index_set(self):
        return total_degree_indices(self.dim, self.degree)

    def orders(self):
        return index_orders(self.dim, self.degree)

    def l2_norm(self):
        """L^2 norm via Parseval at the truncation."""
        return float(np.linalg.norm(self.coeffs))

    def with_coeffs(self, coeffs):
        return HermiteExpansion(self.dim, self.degree, coeffs)

    def _check_compatible(self, other):
        if (self.dim, self.degree) != (other.dim, other.degree):
            raise ValueError("expansions have mismatched (dim, degree)")

    def __add__(self, other):
        self._check_compatible(other)
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check_compatible(other)
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return self.with_coeffs(self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_coeffs(-self.coeffs)


def zero_expansion(dim, degree):
    n = total_degree_indices(dim, degree).shape[0]
    return HermiteExpansion(dim, degree, np.zeros(n, dtype=np.complex128))


def basis_expansion(dim, degree, alpha):
    """Expansion with a unit coefficient on the mode ``alpha``."""
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != dim:
        raise ValueError("multi-index length must equal dim")
    if sum(alpha) > degree:
        raise ValueError("mode order exceeds the truncation degree")
    idx = total_degree_indices(dim, degree)
    pos = np.flatnonzero((idx == np.array(alpha)).all(axis=1))
    e = zero_expansion(dim, degree)
    c = e.coeffs.copy()
    c[pos[0]] = 1.0
    return e.with_coeffs(c)


def random_expansion(dim, degree, rng):
    """Expansion with iid standard complex normal coefficients."""
    n = total_degree_indices(dim, degree).shape[0]
    c = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return HermiteExpansion(dim, degree, c)


def _tensor_lifted_weights(rule, dim):
    lw = rule.lifted_weights()
    w = lw
    for _ in range(dim - 1):
        w = np.multiply.outer(w, lw)
    return w


def _box(e):
    """Coefficients scattered into a dense (degree+1,)^dim box."""
    shape = (e.degree + 1,) * e.dim
    box = np.zeros(shape, dtype=np.complex128)
    box[tuple(e.index_set().T)] = e.coeffs
    return box


def analyze(f, dim, degree, rule=None):
    """Expand ``f`` in the Hermite basis by Gauss-Hermite quadrature.

    ``f`` is either a callable evaluated on the tensor quadrature grid
    (invoked as ``f(*meshgrid_axes)`` with 'ij' indexing) or an array of
    samples of shape ``(rule.order,) * dim``.  The Gaussian weight of the
    quadrature is absorbed analytically, so inner products of basis
    functions up to the truncation degree are integrated exactly.

    The rule must have order >= degree + 1 (the default, 2*degree + 1,
    also covers pointwise products of two expansions).
    """
    if rule is None:
        rule = gauss_hermite_rule(2 * degree + 1)
    if rule.order < degree + 1:
        raise ValueError(
            f"quadrature order {rule.order} is insufficient for degree "
            f"{degree}; need at least {degree + 1} nodes per axis"
        )
    if callable(f):
        axes = np.meshgrid(*([rule.nodes] * dim), indexing="ij")
        samples = np.asarray(f(*axes), dtype=np.complex128)
    else:
        samples = np.asarray(f, dtype=np.complex128)
    if samples.shape != (rule.order,) * dim:
        raise ValueError(
            f"samples must have shape {(rule.order,) * dim}, got {samples.shape}"
        )

    weighted = samples * _tensor_lifted_weights(rule, dim)
    H = hermite_matrix(degree, rule.nodes)
    if dim == 1:
        box = H @ weighted
    elif dim == 2:
        box = H @ weighted @ H.T
    else:
        box = np.einsum("ai,bj,ck,ijk->abc", H, H, H, weighted, optimize=True)
    coeffs = box[tuple(total_degree_indices(dim, degree).T)]
    return HermiteExpansion(dim, degree, coeffs)


def synthesize(e, points):
    """Evaluate an expansion at scattered points.

    ``points`` has shape (m, dim), or (m,) / scalar when dim == 1.
    Returns complex values.
    """
    pts = np.asarray(points, dtype=float)
    scalar = False
    if e.dim == 1:
        scalar = pts.ndim == 0
        pts = np.atleast_1d(pts).reshape(-1, 1)
    else:
        if pts.ndim == 1:
            scalar = True
            pts = pts.reshape(1, -1)
        if pts.shape[-1] != e.dim:
            raise ValueError(f"points must have {e.dim} coordinates")
        pts = pts.reshape(-1, e.dim)

    idx = e.index_set()
    prod = np.ones((idx.shape[0], pts.shape[0]))
    for axis in range(e.dim):
        H = hermite_matrix(e.degree, pts[:, axis])
        prod *= H[idx[:, axis], :]
    vals = e.coeffs @ prod
    return complex(vals[0]) if scalar else vals


def synthesize_on_grid(e, axes):
    """Evaluate an expansion on a tensor grid given per-axis point arrays.

    Much cheaper than ``synthesize`` on the flattened grid; returns an
    array of shape ``tuple(len(a) for a in axes)``.
    """
    if len(axes) != e.dim:
        raise ValueError("need one point array per dimension")
    vals = _box(e)
    for axis in range(e.dim):
        H = hermite_matrix(e.degree, np.asarray(axes[axis], dtype=float))
        vals = np.moveaxis(np.tensordot(H.T, vals, axes=(1, axis)), 0, axis)
    return vals


def project(e, k):
    """Keep exactly the modes of total order k (spectral projection)."""
    if not 0 <= k <= e.degree:
        raise ValueError(f"projection order {k} outside 0..{e.degree}")
    mask = e.orders() == k
    return e.with_coeffs(np.where(mask, e.coeffs, 0.0))


def shubin_norm(e, s):
    """Weighted spectral norm (sum_k (2k+d)^s ||P_k f||^2)^(1/2).

    s = 0 recovers the L^2 norm; s = 2 weighs modes by the oscillator
    eigenvalue.  Negative s gives the dual-scale norms.
    """
    weights = (2.0 * e.orders() + e.dim) ** s
    return float(np.sqrt(np.sum(weights * np.abs(e.coeffs) ** 2)))
