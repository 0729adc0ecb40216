"""Config-driven experiment runner with deterministic artifacts.

One JSON config document describes one run.  Every command validates its
parameters against the target module's preconditions before any
computation, writes CSV/JSON artifacts plus a manifest into the output
directory, and returns a process status:

    0  success
    2  validation failure (bad config)
    3  numerical failure (the computation raised)
    4  I/O failure

Identical config and seed produce byte-identical CSV bodies; manifests
may differ in the timing field only.  Exponent values may be given as
numbers or the string "inf".  The full key/default table is in DEFAULTS
(printed by ``hermiteflow defaults``).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .estimator import (
    corpus,
    fit_damping_slope,
    fit_large_time,
    fit_small_time,
    generic_random_expansions,
    large_time_times,
    small_time_times,
)
from .hermite import basis_expansion
from .phasespace import NormSpec, default_grid, gaussian_window, norm_evaluator, stft
from .semigroup import ExponentSet, FlowParams, apply_semigroup, theoretical_constant
from .serialization import (
    expansion_to_json,
    format_float,
    grid_fingerprint,
    norm_record,
    save_expansion,
)
from .solver import (
    PicardConvergenceError,
    SolverConfig,
    blowup_contrast,
    decay_monitor,
    picard_solve,
)

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "emit_config", "run", "main"]

COMMANDS = ("transform", "semigroup", "norm", "decay", "smoothing", "solve", "blowup")

DEFAULTS = {
    "common": {"seed": 0, "output_dir": "runs"},
    "transform": {"function": "ground_state", "dim": 1, "degree": 12},
    "semigroup": {
        "function": "ground_state",
        "dim": 1,
        "degree": 12,
        "beta": 1.0,
        "times": [0.1, 0.5, 1.0, 2.0, 5.0],
    },
    "norm": {
        "function": "ground_state",
        "dim": 1,
        "degree": 12,
        "p": 2.0,
        "q": 2.0,
        "s": 0.0,
        "order": "modulation",
    },
    "decay": {
        "function": "random",
        "count": 10,
        "modes": 10,
        "dim": 1,
        "degree": 10,
        "beta": 1.0,
        "p1": 2.0,
        "q1": 2.0,
        "p2": 2.0,
        "q2": 2.0,
        "samples": 41,
        "rate_tolerance": 0.02,
    },
    "smoothing": {
        "alphas": [0.3, 0.4, 0.45],
        "dim": 1,
        "degree": 16,
        "beta": 1.0,
        "p1": "inf",
        "q1": "inf",
        "p2": 2.0,
        "q2": 2.0,
        "t_min": 1e-3,
        "samples": 13,
        "check_damping_slope": True,
    },
    "solve": {
        "beta": 1.0,
        "lambda_re": 1.0,
        "lambda_im": 0.0,
        "k": 1,
        "dim": 1,
        "degree": 12,
        "dt": 0.05,
        "horizon": 2.0,
        "p": 2.0,
        "q": 2.0,
        "eps": 0.1,
        "picard_tol": 1e-10,
        "picard_max_iters": 25,
        "amplitude": 0.01,
        "u0": "ground_state",
        "snapshot_stride": 0,
        "allow_out_of_theory": False,
    },
    "blowup": {
        "a": 1.0,
        "k": 1,
        "lambda": 1.0,
        "beta": 1.0,
        "dim": 1,
        "degree": 12,
        "dt": 0.02,
        "horizon": 2.0,
        "eps": 0.2,
        "threshold": 1e8,
        "allow_out_of_theory": True,
    },
}


class ConfigError(ValueError):
    """The config document failed to parse or validate."""


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    params: dict
    seed: int
    output_dir: str


def _as_extended(value, key):
    if isinstance(value, str):
        if value == "inf":
            return math.inf
        raise ConfigError(f"{key}: expected a number or 'inf', got {value!r}")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {type(value).__name__}")
    return float(value)


def _check_type(key, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected a boolean")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer")
        return value
    if isinstance(default, float):
        return _as_extended(value, key)
    if isinstance(default, str):
        if default == "inf" or isinstance(default, float):
            return _as_extended(value, key)
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string")
        return value
    if isinstance(default, list):
        if not isinstance(value, list) or not value:
            raise ConfigError(f"{key}: expected a non-empty list")
        return [_as_extended(v, key) for v in value]
    raise ConfigError(f"{key}: unsupported value type")


def parse_config(text):
    """Parse and validate a JSON config document (strict keys)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(
            f"config syntax error at line {err.lineno}, column {err.colno}: {err.msg}"
        ) from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    if "command" not in doc:
        raise ConfigError(
            "missing required key 'command' (one of "
            + ", ".join(COMMANDS)
            + "); optional common keys: "
            + ", ".join(sorted(DEFAULTS["common"]))
        )
    command = doc["command"]
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}; expected one of {COMMANDS}")

    known = {"command"} | set(DEFAULTS["common"]) | set(DEFAULTS[command])
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(
            f"unknown keys for command {command!r}: {sorted(unknown)}"
        )

    seed = doc.get("seed", DEFAULTS["common"]["seed"])
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("seed: expected an integer")
    output_dir = doc.get("output_dir", DEFAULTS["common"]["output_dir"])
    if not isinstance(output_dir, str):
        raise ConfigError("output_dir: expected a string")

    params = {}
    for key, default in DEFAULTS[command].items():
        # Exponent-valued keys accept "inf" even when the default is a string.
        if key in doc:
            if isinstance(default, str) and default == "inf":
                params[key] = _as_extended(doc[key], key)
            else:
                params[key] = _check_type(key, doc[key], default)
        else:
            params[key] = math.inf if default == "inf" else default
    cfg = ExperimentConfig(command, params, seed, output_dir)
    _validate_semantics(cfg)
    return cfg


def _validate_semantics(cfg):
    p = cfg.params
    positive = {
        "beta", "dt", "horizon", "p", "q", "p1", "q1", "p2", "q2",
        "picard_tol", "threshold", "t_min", "eps",
    }
    for key in positive & set(p):
        if not p[key] > 0:
            raise ConfigError(f"{key} must be positive")
    for key in ("degree",):
        if key in p and p[key] < 0:
            raise ConfigError("degree must be non-negative")
    for key in ("dim",):
        if key in p and p[key] not in (1, 2, 3):
            raise ConfigError("dim must be 1, 2, or 3")
    if "k" in p and p["k"] < 1:
        raise ConfigError("k must be >= 1")
    if "samples" in p and p["samples"] < 5:
        raise ConfigError("need at least 5 time samples")
    if "count" in p and p["count"] < 1:
        raise ConfigError("count must be >= 1")
    if "times" in p and any(t < 0 for t in p["times"]):
        raise ConfigError("times must be non-negative")
    if "order" in p and p["order"] not in ("modulation", "amalgam"):
        raise ConfigError("order must be 'modulation' or 'amalgam'")
    if "a" in p and p["a"] < 0:
        raise ConfigError("constant datum a must be non-negative")
    if "alphas" in p and any(not 0 < a < 1 for a in p["alphas"]):
        raise ConfigError("singularity strengths must lie in (0, 1) for d = 1")
    if cfg.command == "solve" and not p["allow_out_of_theory"]:
        k, beta, dim, q = p["k"], p["beta"], p["dim"], p["q"]
        qmax = (2 * k + 1) / (2 * k)
        if not 1.0 <= q <= qmax + 1e-12:
            raise ConfigError(
                f"q={q} violates the admissible range 1 <= q <= (2k+1)/(2k) = "
                f"{qmax:.4f}; set allow_out_of_theory to run anyway"
            )
        if not 1.0 / q + beta / (k * dim) > 1.0:
            raise ConfigError(
                "admissibility 1/q + beta/(k d) > 1 fails; "
                "set allow_out_of_theory to run anyway"
            )
        if p["p"] < 1.0:
            raise ConfigError("p must be >= 1; set allow_out_of_theory to run anyway")


def emit_config(cfg):
    """Canonical JSON form; parse(emit(parse(x))) == parse(x)."""
    doc = {"command": cfg.command, "seed": cfg.seed, "output_dir": cfg.output_dir}
    for key, value in cfg.params.items():
        doc[key] = "inf" if isinstance(value, float) and math.isinf(value) else value
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# --------------------------------------------------------------------------
# artifact helpers
# --------------------------------------------------------------------------

def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_sanitize(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _sanitize(obj):
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        if math.isinf(f):
            return "inf"
        if math.isnan(f):
            return None
        return f
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    return obj


def _pick_datum(name, dim, degree, seed):
    """Resolve a named initial datum to an expansion."""
    if name == "random":
        return generic_random_expansions(1, dim, degree, seed=seed)[0]
    if dim == 1:
        for member in corpus(degree=degree):
            if member.name == name:
                return member.expansion
    table = {"ground_state": (0,) * dim, "first_excited": (1,) + (0,) * (dim - 1)}
    if name in table:
        return basis_expansion(dim, degree, table[name])
    raise ConfigError(f"unknown function {name!r} for dim={dim}")


def _exponents(p):
    return ExponentSet(p["p1"], p["q1"], p["p2"], p["q2"])


# --------------------------------------------------------------------------
# command implementations
# --------------------------------------------------------------------------

def _run_transform(cfg, outdir):
    p = cfg.params
    e = _pick_datum(p["function"], p["dim"], p["degree"], cfg.seed)
    save_expansion(e, outdir / "expansion.hexp")
    _write_json(outdir / "expansion.json", expansion_to_json(e))
    rows = [
        [str(int(a)) for a in idx]
        + [format_float(c.real), format_float(c.imag)]
        for idx, c in zip(e.index_set(), e.coeffs)
    ]
    header = [f"alpha{i + 1}" for i in range(e.dim)] + ["re", "im"]
    _write_csv(outdir / "coefficients.csv", header, rows)
    return {"n_coefficients": int(e.coeffs.size), "l2_norm": e.l2_norm()}


def _run_semigroup(cfg, outdir):
    p = cfg.params
    e = _pick_datum(p["function"], p["dim"], p["degree"], cfg.seed)
    rows = []
    for t in p["times"]:
        evolved = apply_semigroup(e, FlowParams(p["beta"], float(t), p["dim"]))
        rows.append(
            [format_float(t), format_float(evolved.l2_norm()),
             format_float(math.exp(-t * p["dim"] ** p["beta"]))]
        )
    _write_csv(outdir / "semigroup.csv", ["t", "l2_norm", "ground_factor"], rows)
    return {"times": list(p["times"]), "initial_l2": e.l2_norm()}


def _run_norm(cfg, outdir):
    p = cfg.params
    e = _pick_datum(p["function"], p["dim"], p["degree"], cfg.seed)
    grid = default_grid(p["dim"], p["degree"])
    spec = NormSpec(p["p"], p["q"], p["s"], p["order"])
    evaluator = norm_evaluator(spec, grid, None, p["dim"], p["degree"])
    value = evaluator(e)
    records = [norm_record(spec, grid, value)]
    _write_json(outdir / "norms.json", records)
    return {"value": value, "grid_hash": grid_fingerprint(grid)}


def _run_decay(cfg, outdir):
    p = cfg.params
    beta, dim = p["beta"], p["dim"]
    exps = _exponents(p)
    times = large_time_times(beta, dim, samples=p["samples"])
    if p["function"] == "random":
        family = generic_random_expansions(
            p["count"], dim, p["degree"], n_modes=p["modes"], seed=cfg.seed
        )
        names = [f"random_{i}" for i in range(len(family))]
    else:
        family = [_pick_datum(p["function"], dim, p["degree"], cfg.seed)]
        names = [p["function"]]
    target = dim**beta
    rows, rates, sup_constants = [], [], []
    for name, f in zip(names, family):
        rep = fit_large_time(f, beta, times, exps, name=name)
        rates.append(rep.fitted_large_time_rate)
        sup_constants.append(rep.sup_bounded_constant)
        for t, r in zip(rep.times, rep.ratios):
            theory = theoretical_constant(FlowParams(beta, t, dim), exps, 1.0)
            rows.append(
                [name, format_float(t), format_float(r), format_float(theory),
                 format_float(r / theory), format_float(rep.fitted_large_time_rate)]
            )
    _write_csv(
        outdir / "decay.csv",
        ["function", "t", "ratio", "theory", "ratio_over_theory", "fitted_rate"],
        rows,
    )
    worst = max(abs(r - target) / target for r in rates)
    summary = {
        "exponents": {"p1": exps.p1, "q1": exps.q1, "p2": exps.p2, "q2": exps.q2},
        "beta": beta,
        "dim": dim,
        "target_rate": target,
        "fitted_rates": rates,
        "K": max(sup_constants),
        "worst_relative_rate_error": worst,
        "passes": {"rate_within_tolerance": bool(worst <= p["rate_tolerance"])},
    }
    _write_json(outdir / "decay_summary.json", summary)
    return summary


def _run_smoothing(cfg, outdir):
    p = cfg.params
    beta, dim = p["beta"], p["dim"]
    if dim != 1:
        raise ConfigError("the smoothing stress family is one-dimensional")
    exps = _exponents(p)
    reduced = exps.reduced()
    sigma = reduced.sigma(dim, beta)
    times = small_time_times(p["t_min"], 1.0, p["samples"])
    members = [
        m
        for a in p["alphas"]
        for m in corpus(degree=p["degree"], alpha=a)
        if m.name == f"singular_power_{a}"
    ]
    reports = fit_small_time(members, beta, times, exps)
    rows = []
    for rep in reports:
        for t, r in zip(rep.times, rep.ratios):
            theory = theoretical_constant(FlowParams(beta, t, dim), reduced, 1.0)
            rows.append(
                [rep.name, format_float(t), format_float(r), format_float(theory),
                 format_float(r / theory)]
            )
    _write_csv(outdir / "smoothing.csv", ["function", "t", "ratio", "theory", "ratio_over_theory"], rows)
    summary = {
        "sigma": sigma,
        "sup_weighted": {rep.name: rep.sup_weighted for rep in reports},
        "slopes": {rep.name: rep.fitted_small_time_slope for rep in reports},
        "K": max(rep.sup_bounded_constant for rep in reports),
        "passes": {
            "slopes_above_minus_sigma": bool(
                all(rep.fitted_small_time_slope >= -sigma - 0.1 for rep in reports)
            )
        },
    }
    if p["check_damping_slope"]:
        slope, _ = fit_damping_slope(times, beta, exps)
        summary["damping_slope"] = slope
        summary["passes"]["damping_slope_matches"] = bool(
            abs(slope + sigma) <= 0.02 * max(sigma, 1e-12)
        )
    _write_json(outdir / "smoothing_summary.json", summary)
    return summary


def _run_solve(cfg, outdir):
    p = cfg.params
    solver_cfg = SolverConfig(
        beta=p["beta"],
        lam=complex(p["lambda_re"], p["lambda_im"]),
        k=p["k"],
        dim=p["dim"],
        degree=p["degree"],
        dt=p["dt"],
        horizon=p["horizon"],
        picard_tol=p["picard_tol"],
        picard_max_iters=p["picard_max_iters"],
        eps=p["eps"],
        allow_out_of_theory=p["allow_out_of_theory"],
    )
    u0 = p["amplitude"] * _pick_datum(p["u0"], p["dim"], p["degree"], cfg.seed)
    spec = NormSpec(p["p"], p["q"])
    tr = picard_solve(u0, solver_cfg, spec)
    weight = p["dim"] ** p["beta"]
    rows = [
        [format_float(t), format_float(n), format_float(math.exp(t * weight) * n)]
        for t, n in zip(tr.times, tr.norms)
    ]
    _write_csv(outdir / "trajectory.csv", ["t", "norm", "weighted_norm"], rows)
    stride = p["snapshot_stride"]
    if stride > 0:
        for i in range(0, len(tr.states), stride):
            save_expansion(tr.states[i], outdir / f"state_{i:05d}.hexp")
    summary = {
        "iterations": len(tr.contraction_ratios) + 1,
        "contraction_ratios": list(tr.contraction_ratios),
        "residual": tr.residual,
        "x_estimate": decay_monitor(tr, solver_cfg),
        "final_norm": float(tr.norms[-1]),
    }
    _write_json(outdir / "solve_summary.json", summary)
    return summary


def _run_blowup(cfg, outdir):
    p = cfg.params
    solver_cfg = SolverConfig(
        beta=p["beta"],
        lam=complex(p["lambda"]),
        k=p["k"],
        dim=p["dim"],
        degree=p["degree"],
        dt=p["dt"],
        horizon=p["horizon"],
        eps=p["eps"],
        blowup_threshold=p["threshold"],
        allow_out_of_theory=p["allow_out_of_theory"],
    )
    result = blowup_contrast(p["a"], solver_cfg)
    verdicts = {
        "free": {
            "blew_up": result.free.blew_up,
            "t_star_numeric": result.free.t_star_numeric,
            "t_star_ode": result.free.t_star_ode,
            "relative_gap": result.free.relative_gap,
        },
        "trapped": {
            "blew_up": result.trapped.blew_up,
            "t_star_numeric": result.trapped.t_star_numeric,
        },
        "x_estimate": result.x_estimate,
        "truncation_error": result.truncation_error,
    }
    _write_json(outdir / "blowup_verdict.json", verdicts)
    return verdicts


_DISPATCH = {
    "transform": _run_transform,
    "semigroup": _run_semigroup,
    "norm": _run_norm,
    "decay": _run_decay,
    "smoothing": _run_smoothing,
    "solve": _run_solve,
    "blowup": _run_blowup,
}


def run(cfg):
    """Execute a validated config; returns the process status (0/2/3/4)."""
    started = time.time()
    try:
        outdir = Path(cfg.output_dir)
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        print(f"I/O failure: {err}", file=sys.stderr)
        return 4
    try:
        summary = _DISPATCH[cfg.command](cfg, outdir)
    except ConfigError as err:
        print(f"validation failure: {err}", file=sys.stderr)
        return 2
    except (PicardConvergenceError, ValueError, ArithmeticError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3
    except OSError as err:
        print(f"I/O failure: {err}", file=sys.stderr)
        return 4
    manifest = {
        "config": json.loads(emit_config(cfg)),
        "versions": {
            "hermiteflow": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
        "grid_hashes": {
            "default": grid_fingerprint(
                default_grid(cfg.params.get("dim", 1), cfg.params.get("degree", 12))
            )
        },
        "wall_time_s": time.time() - started,
        "summary": summary,
    }
    try:
        _write_json(Path(cfg.output_dir) / "manifest.json", manifest)
    except OSError as err:
        print(f"I/O failure: {err}", file=sys.stderr)
        return 4
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="hermiteflow", description="Run a configured experiment."
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    runp = sub.add_parser("run", help="execute a JSON config document")
    runp.add_argument("config", help="path to the config file")
    sub.add_parser("defaults", help="print the key/default reference table")
    args = parser.parse_args(argv)

    if args.verb == "defaults":
        print(json.dumps(DEFAULTS, indent=2, sort_keys=True))
        return 0
    try:
        text = Path(args.config).read_text()
    except OSError as err:
        print(f"I/O failure: {err}", file=sys.stderr)
        return 4
    try:
        cfg = parse_config(text)
    except ConfigError as err:
        print(f"validation failure: {err}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
