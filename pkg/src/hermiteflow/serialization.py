"""On-disk containers: expansions, phase-space matrices, norm records.

Expansion container (little-endian):

    bytes 0..3    magic b"HEXP"
    bytes 4..7    format version (u32, currently 1)
    bytes 8..11   dimension d (u32)
    bytes 12..15  truncation degree N (u32)
    bytes 16..23  coefficient count (u64)
    payload       count * 2 float64: re/im interleaved, grlex order
                  (indices sorted by (|alpha|, alpha) ascending)

The JSON mirror is {"d", "N", "ordering": "grlex", "coeffs": [re0, im0,
re1, im1, ...]} and is meant for small truncations.  Phase-space matrices
use the same layout with magic b"HPSM" and a grid header.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct

import numpy as np

from .hermite import HermiteExpansion, total_degree_indices
from .phasespace import PhaseSpaceGrid, PhaseSpaceMatrix

__all__ = [
    "expansion_to_bytes",
    "expansion_from_bytes",
    "expansion_to_json",
    "expansion_from_json",
    "save_expansion",
    "load_expansion",
    "matrix_to_bytes",
    "matrix_from_bytes",
    "matrix_to_csv_rows",
    "norm_record",
    "grid_fingerprint",
    "format_float",
]

_EXP_MAGIC = b"HEXP"
_MAT_MAGIC = b"HPSM"
_VERSION = 1
_EXP_HEADER = struct.Struct("<4sIIIQ")
_MAT_HEADER = struct.Struct("<4sIIIIdd")


def format_float(x):
    """Shortest round-trip decimal form; deterministic across runs."""
    return repr(float(x))


def expansion_to_bytes(e):
    header = _EXP_HEADER.pack(_EXP_MAGIC, _VERSION, e.dim, e.degree, e.coeffs.size)
    return header + np.ascontiguousarray(e.coeffs, dtype="<c16").tobytes()


def expansion_from_bytes(buf):
    magic, version, dim, degree, count = _EXP_HEADER.unpack_from(buf, 0)
    if magic != _EXP_MAGIC:
        raise ValueError("not an expansion container (bad magic)")
    if version != _VERSION:
        raise ValueError(f"unsupported container version {version}")
    expected = total_degree_indices(dim, degree).shape[0]
    if count != expected:
        raise ValueError(
            f"container declares {count} coefficients, layout requires {expected}"
        )
    payload = buf[_EXP_HEADER.size :]
    if len(payload) != count * 16:
        raise ValueError("truncated coefficient payload")
    coeffs = np.frombuffer(payload, dtype="<c16").astype(np.complex128)
    return HermiteExpansion(dim, degree, coeffs)


def expansion_to_json(e):
    interleaved = np.empty(2 * e.coeffs.size)
    interleaved[0::2] = e.coeffs.real
    interleaved[1::2] = e.coeffs.imag
    return {
        "d": e.dim,
        "N": e.degree,
        "ordering": "grlex",
        "coeffs": interleaved.tolist(),
    }


def expansion_from_json(obj):
    required = {"d", "N", "ordering", "coeffs"}
    if set(obj) != required:
        raise ValueError(f"expansion record must have exactly the keys {sorted(required)}")
    if obj["ordering"] != "grlex":
        raise ValueError(f"unsupported ordering {obj['ordering']!r}")
    flat = np.asarray(obj["coeffs"], dtype=float)
    if flat.ndim != 1 or flat.size % 2:
        raise ValueError("coeffs must be a flat interleaved re/im list")
    coeffs = flat[0::2] + 1j * flat[1::2]
    return HermiteExpansion(int(obj["d"]), int(obj["N"]), coeffs)


def save_expansion(e, path):
    """Write the binary container, or the JSON mirror for .json paths."""
    path = str(path)
    if path.endswith(".json"):
        with open(path, "w") as fh:
            json.dump(expansion_to_json(e), fh)
            fh.write("\n")
    else:
        with open(path, "wb") as fh:
            fh.write(expansion_to_bytes(e))


def load_expansion(path):
    path = str(path)
    if path.endswith(".json"):
        with open(path) as fh:
            return expansion_from_json(json.load(fh))
    with open(path, "rb") as fh:
        return expansion_from_bytes(fh.read())


def matrix_to_bytes(m):
    g = m.grid
    header = _MAT_HEADER.pack(
        _MAT_MAGIC, _VERSION, g.dim, g.n_x, g.n_xi, g.x_extent, g.xi_extent
    )
    return header + np.ascontiguousarray(m.values, dtype="<c16").tobytes()


def matrix_from_bytes(buf):
    magic, version, dim, n_x, n_xi, ex, exi = _MAT_HEADER.unpack_from(buf, 0)
    if magic != _MAT_MAGIC:
        raise ValueError("not a phase-space container (bad magic)")
    if version != _VERSION:
        raise ValueError(f"unsupported container version {version}")
    grid = PhaseSpaceGrid(dim, ex, exi, n_x, n_xi)
    count = n_x**dim * n_xi**dim
    payload = buf[_MAT_HEADER.size :]
    if len(payload) != count * 16:
        raise ValueError("truncated value payload")
    values = np.frombuffer(payload, dtype="<c16").astype(np.complex128)
    return PhaseSpaceMatrix(grid, values.reshape((n_x,) * dim + (n_xi,) * dim))


def matrix_to_csv_rows(m):
    """Yield a header row then (x..., xi..., re, im) rows in C order."""
    g = m.grid
    d = g.dim
    if d == 1:
        yield ["x", "xi", "re", "im"]
    else:
        yield [f"x{i + 1}" for i in range(d)] + [f"xi{i + 1}" for i in range(d)] + ["re", "im"]
    x, xi = g.x_axis(), g.xi_axis()
    flat = m.values.reshape(-1)
    shape = (g.n_x,) * d + (g.n_xi,) * d
    for pos, value in enumerate(flat):
        coords = np.unravel_index(pos, shape)
        row = [format_float(x[c]) for c in coords[:d]]
        row += [format_float(xi[c]) for c in coords[d:]]
        row += [format_float(value.real), format_float(value.imag)]
        yield row


def grid_fingerprint(grid):
    """Stable hash of the grid geometry, for tagging norm records."""
    canon = (
        f"dim={grid.dim};Lx={grid.x_extent!r};Lxi={grid.xi_extent!r};"
        f"nx={grid.n_x};nxi={grid.n_xi}"
    )
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _jsonable_float(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return float(x)


def norm_record(spec, grid, value):
    """JSON-ready record for one computed phase-space norm."""
    return {
        "p": _jsonable_float(spec.p),
        "q": _jsonable_float(spec.q),
        "s": float(spec.s),
        "order": spec.order,
        "value": float(value),
        "grid_hash": grid_fingerprint(grid),
    }
