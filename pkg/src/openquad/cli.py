"""Command-line front end.

Every command writes deterministic output: tables as CSV (with a
``.meta.json`` sidecar when ``--out`` is given) and reports as JSON.
Errors are printed to stderr as a JSON object and mapped to the exit
codes in :data:`EXIT_CODES`.
"""
from __future__ import annotations

import argparse
import sys
import warnings

import numpy as np

from . import __version__
from .dynamics import (MomentState, evolve, hp_initial_state, observable_series,
                       stationary_second)
from .errors import (IntegrationError, ModelError, NoUniqueSolutionError, OpenQuadError,
                     UnknownPresetError)
from .io import csv_text, json_text, write_sidecar, write_text
from .model import PRESETS, build_structure, load_model, preset
from .numerics import jordan_structure
from .spectrum import (DEFAULT_MAX_ORDER, beta_spectrum, enumerate_liouvillian, ep_scan,
                       liouvillian_gap, parameter_grid)
from .symmetry import check_huber, check_matrix_pt, classify_beta_pt
from .trajectory import SpinModel, lindblad_evolve, mc_trajectories, steady_state

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_UNKNOWN_PRESET = 3
EXIT_BAD_MODEL = 4
EXIT_BAD_GRID = 5
EXIT_NUMERICAL = 6

EXIT_CODES = {
    EXIT_OK: "success",
    EXIT_INTERNAL: "unexpected internal error",
    EXIT_USAGE: "invalid command line",
    EXIT_UNKNOWN_PRESET: "unknown preset",
    EXIT_BAD_MODEL: "malformed model file or invalid model parameters",
    EXIT_BAD_GRID: "invalid parameter grid or time grid",
    EXIT_NUMERICAL: "numerical failure (no unique stationary state, integration failure, overflow)",
}

# CLI flag -> preset parameter name, per preset
FLAG_MAP = {
    "afm_2spin": {"gg": "gamma_g", "gl": "gamma_l", "g": "g", "S": "S"},
    "fm_2spin_up": {"gg": "gamma_g", "gl": "gamma_l", "g": "g", "S": "S"},
    "two_boson": {"gamma": "gamma", "g": "g"},
    "rabi_normal": {"omega": "omega", "g": "g", "gamma": "gamma"},
}


MODEL_FLAGS = ("gg", "gl", "g", "gamma", "omega", "S")


class GridError(OpenQuadError, ValueError):
    """Invalid parameter or time grid."""


class CLIError(Exception):
    def __init__(self, code, kind, message):
        super().__init__(message)
        self.code, self.kind, self.message = code, kind, message


# ---------------------------------------------------------------------------
# argument parsing

def _add_model_args(p, grid=False):
    src = p.add_argument_group("model")
    src.add_argument("--preset", help="preset name (see the presets command)")
    src.add_argument("--model-file", help="JSON model file")
    kind = str if grid else float
    suffix = " (value, comma list, or start:stop:num)" if grid else ""
    src.add_argument("--gg", type=kind, help="gain rate Gamma_g" + suffix)
    src.add_argument("--gl", type=kind, help="loss rate Gamma_l" + suffix)
    src.add_argument("--g", type=kind, help="coupling g" + suffix)
    src.add_argument("--gamma", type=kind, help="rate Gamma" + suffix)
    src.add_argument("--omega", type=kind, help="frequency omega" + suffix)
    src.add_argument("--S", type=float, help="spin length of the HP frame")


def _add_out(p):
    p.add_argument("--out", help="output file (default: stdout, no sidecar)")


def _add_time(p, t1=20.0, steps=200):
    p.add_argument("--t0", type=float, default=0.0, help="start time (default 0)")
    p.add_argument("--t1", type=float, default=t1, help=f"end time (default {t1:g})")
    p.add_argument("--steps", type=int, default=steps,
                   help=f"number of output intervals (default {steps})")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="openquad", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"openquad {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("presets", help="list presets and their parameters")
    _add_out(p)

    p = sub.add_parser("spectrum", help="enumerated Liouvillian eigenvalues (CSV)")
    _add_model_args(p)
    p.add_argument("--max-order", type=int, default=DEFAULT_MAX_ORDER,
                   help=f"total excitation cutoff (default {DEFAULT_MAX_ORDER})")
    p.add_argument("--tol", type=float, default=1e-8, help="relative cluster tolerance")
    _add_out(p)

    p = sub.add_parser("gap", help="Liouvillian gap and rapidities (JSON)")
    _add_model_args(p)
    p.add_argument("--tol", type=float, default=1e-8, help="relative cluster tolerance")
    _add_out(p)

    p = sub.add_parser("pt-check", help="PT-symmetry report (JSON)")
    _add_model_args(p)
    p.add_argument("--parity", choices=("reflection", "sector_swap"), default="reflection")
    p.add_argument("--tol", type=float, default=1e-10, help="relative tolerance")
    _add_out(p)

    p = sub.add_parser("ep-scan", help="exceptional points over a parameter grid (CSV)")
    _add_model_args(p, grid=True)
    p.add_argument("--tol", type=float, default=1e-10, help="rank threshold")
    _add_out(p)

    p = sub.add_parser("dynamics", help="moment dynamics and observables (CSV)")
    _add_model_args(p)
    _add_time(p)
    p.add_argument("--sz0", type=float,
                   help="initial <S^z> per site for HP presets (default 0.9 S)")
    p.add_argument("--n0", help="initial occupations, scalar or comma list")
    p.add_argument("--alpha0", help="initial <a_i>, comma list of complex numbers")
    p.add_argument("--tol", type=float, default=1e-7,
                   help="allowed closed-form vs RK4 discrepancy before exit 6")
    _add_out(p)

    p = sub.add_parser("steady", help="stationary state (JSON)")
    _add_model_args(p)
    p.add_argument("--spin", action="store_true",
                   help="finite-spin model (uses --S, --gg, --gl, --g) instead of moments")
    p.add_argument("--tol", type=float, default=1e-9, help="convergence tolerance")
    _add_out(p)

    p = sub.add_parser("trajectory", help="quantum-jump ensemble vs Lindblad (CSV)")
    p.add_argument("--S", type=float, default=10.0, help="spin length (default 10)")
    p.add_argument("--gg", type=float, help="gain rate Gamma_g")
    p.add_argument("--gl", type=float, help="loss rate Gamma_l")
    p.add_argument("--gamma", type=float, help="sets Gamma_g = Gamma_l")
    p.add_argument("--g", type=float, default=1.0, help="coupling (default 1)")
    _add_time(p, t1=30.0, steps=60)
    p.add_argument("--ntraj", type=int, default=200, help="number of trajectories")
    p.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    p.add_argument("--no-lindblad", action="store_true", help="skip the Lindblad column")
    _add_out(p)
    return ap


# ---------------------------------------------------------------------------
# helpers

def _model_from_args(args):
    if bool(args.preset) == bool(args.model_file):
        raise CLIError(EXIT_USAGE, "UsageError",
                       "exactly one of --preset and --model-file is required")
    if args.model_file:
        model, frame = load_model(args.model_file)
        return model, frame, {"model_file": args.model_file}
    name = args.preset
    if name not in PRESETS:
        raise UnknownPresetError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    params = {}
    for flag, pname in FLAG_MAP[name].items():
        value = getattr(args, flag, None)
        if value is not None:
            params[pname] = value
    stray = [f"--{f}" for f in MODEL_FLAGS
             if f not in FLAG_MAP[name] and getattr(args, f, None) is not None]
    if stray:
        raise ModelError(f"preset {name!r} does not take {', '.join(stray)}")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        model, frame = preset(name, **params)
    notes = [str(w.message) for w in caught]
    return model, frame, {"preset": name, "params": params, "warnings": notes}


def _emit(args, text, meta=None):
    if args.out:
        write_text(args.out, text)
        if meta is not None:
            write_sidecar(args.out, meta)
    else:
        sys.stdout.write(text)


def _meta(args, source, tolerances, **extra):
    cfg = {k: v for k, v in sorted(vars(args).items()) if v is not None}
    meta = {"tool": "openquad", "version": __version__, "command": args.command,
            "config": cfg, "model": source, "tolerances": tolerances}
    meta.update(extra)
    return meta


def _time_grid(args):
    if args.steps < 1 or not np.isfinite(args.t0) or not np.isfinite(args.t1) or args.t1 <= args.t0:
        raise GridError(f"invalid time grid t0={args.t0}, t1={args.t1}, steps={args.steps}")
    return np.linspace(args.t0, args.t1, args.steps + 1)


def _axis(text, flag):
    try:
        if ":" in text:
            a, b, n = text.split(":")
            n = int(n)
            if n < 1:
                raise ValueError
            return [float(v) for v in np.linspace(float(a), float(b), n)]
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise GridError(f"--{flag}: cannot parse grid {text!r}") from None
    if not vals or not all(np.isfinite(vals)):
        raise GridError(f"--{flag}: empty or non-finite grid {text!r}")
    return vals


def _cplx_list(text, flag):
    try:
        return [complex(v.strip().replace(" ", "")) for v in text.split(",")]
    except ValueError:
        raise CLIError(EXIT_USAGE, "UsageError", f"--{flag}: cannot parse {text!r}") from None


def _betas(b):
    return [[float(z.real), float(z.imag)] for z in b.values]


# ---------------------------------------------------------------------------
# commands

def cmd_presets(args):
    doc = {"presets": [{"name": k, "description": v["description"],
                        "params": v["params"], "required": list(v["required"]),
                        "flags": FLAG_MAP[k]} for k, v in sorted(PRESETS.items())]}
    _emit(args, json_text(doc))


def cmd_spectrum(args):
    if args.max_order < 0:
        raise GridError("--max-order must be nonnegative")
    model, frame, src = _model_from_args(args)
    X = build_structure(model).X
    b = beta_spectrum(X, args.tol)
    js = jordan_structure(X)
    spec = enumerate_liouvillian(b, js, args.max_order, tol=args.tol)
    text = csv_text(["re_lambda", "im_lambda", "multiplicity"], spec.rows())
    meta = _meta(args, src, {"cluster_tol_rel": args.tol, "rank_tol": 1e-10},
                 betas=_betas(b), jordan=js.as_dict(), validity=spec.validity,
                 truncated=spec.truncated, collisions=spec.collision_count)
    _emit(args, text, meta)


def cmd_gap(args):
    model, frame, src = _model_from_args(args)
    b = beta_spectrum(build_structure(model).X, args.tol)
    valid = "rigorous" if np.all(b.values.real > args.tol * max(b.norm, 1e-300)) else "formal"
    doc = {"gap": liouvillian_gap(b), "betas": _betas(b), "validity": valid,
           "model": src, "version": __version__}
    _emit(args, json_text(doc))


def cmd_pt_check(args):
    model, frame, src = _model_from_args(args)
    X = build_structure(model).X
    rep = check_huber(model, args.tol).merge(check_matrix_pt(X, args.parity, args.tol))
    doc = rep.as_dict()
    doc["beta_classification"] = classify_beta_pt(beta_spectrum(X), args.tol)
    doc["model"] = src
    doc["version"] = __version__
    _emit(args, json_text(doc))


def cmd_ep_scan(args):
    if args.model_file:
        raise CLIError(EXIT_USAGE, "UsageError", "ep-scan needs a --preset family")
    if not args.preset:
        raise CLIError(EXIT_USAGE, "UsageError", "ep-scan needs --preset")
    name = args.preset
    if name not in PRESETS:
        raise UnknownPresetError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    axes = {}
    for flag, pname in FLAG_MAP[name].items():
        value = getattr(args, flag, None)
        if value is not None:
            axes[pname] = _axis(str(value), flag)
    missing = [p for p in PRESETS[name]["required"] if p not in axes]
    if missing:
        raise GridError(f"ep-scan on {name} needs grid values for {missing}")
    points = parameter_grid(axes)
    hits = ep_scan(name, points, args.tol)
    names = list(axes)
    rows = []
    for h in hits:
        blocks = ";".join("+".join(str(s) for s in sizes) for sizes in h.jordan.block_sizes)
        rows.append([h.params[k] for k in names] + [blocks, h.jordan.low_confidence])
    text = csv_text(names + ["block_sizes", "low_confidence"], rows)
    meta = _meta(args, {"preset": name, "axes": axes}, {"rank_tol": args.tol},
                 grid_points=len(points), flagged=len(hits))
    _emit(args, text, meta)


def cmd_dynamics(args):
    model, frame, src = _model_from_args(args)
    times = _time_grid(args)
    sm = build_structure(model)
    n = model.n
    if args.n0 is not None or frame is None:
        occ = [0.0] * n
        if args.n0 is not None:
            vals = [float(v) for v in args.n0.split(",")]
            occ = vals * n if len(vals) == 1 else vals
        if len(occ) != n:
            raise CLIError(EXIT_USAGE, "UsageError", f"--n0 needs 1 or {n} values")
        alpha = None
        if args.alpha0 is not None:
            alpha = _cplx_list(args.alpha0, "alpha0")
            alpha = alpha * n if len(alpha) == 1 else alpha
            if len(alpha) != n:
                raise CLIError(EXIT_USAGE, "UsageError", f"--alpha0 needs 1 or {n} values")
        state0 = MomentState.from_occupations(occ, alpha, t=args.t0)
    else:
        sz0 = args.sz0 if args.sz0 is not None else 0.9 * frame.S
        state0 = hp_initial_state(frame, sz0, t=args.t0)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        series = evolve(sm.X, sm.Y, state0, times)
        obs = observable_series(series, frame)
    if series.discrepancy is not None and series.discrepancy > args.tol:
        raise IntegrationError(f"closed form and RK4 disagree by {series.discrepancy:.3e}")
    rows = []
    names = [k for k in obs if k != "t"]
    for name in names:
        vals = np.asarray(obs[name], dtype=complex)
        for t, v in zip(obs["t"], vals):
            rows.append([name, t, v.real, v.imag])
    text = csv_text(["observable", "t", "re", "im"], rows)
    meta = _meta(args, src, {"rk4_step": "1e-3/||X||", "discrepancy_tol": args.tol,
                             "first_moment_tol": 1e-8},
                 method=series.method, fallback=series.fallback,
                 discrepancy=series.discrepancy, truncated=series.truncated,
                 warnings=sorted({str(w.message) for w in caught}))
    _emit(args, text, meta)


def cmd_steady(args):
    if args.spin:
        S = args.S if args.S is not None else 10.0
        if args.gg is None or args.gl is None or args.g is None:
            raise CLIError(EXIT_USAGE, "UsageError", "steady --spin needs --gg, --gl and --g")
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            ss = steady_state(SpinModel(S, args.g, args.gg, args.gl), tol=args.tol)
        doc = {"S": S, "sz_a": ss.sz_a, "sz_b": ss.sz_b, "purity": ss.purity,
               "residual": ss.residual, "converged": ss.converged, "t": ss.t,
               "warnings": sorted({str(w.message) for w in caught}), "version": __version__}
        _emit(args, json_text(doc))
        return
    model, frame, src = _model_from_args(args)
    sm = build_structure(model)
    Z = stationary_second(sm.X, sm.Y)
    n = model.n
    occ = [Z[n + i, i] for i in range(n)]
    doc = {"Z": [[[z.real, z.imag] for z in row] for row in Z],
           "occupations": [[z.real, z.imag] for z in occ],
           "residual": float(np.linalg.norm(sm.X.T @ Z + Z @ sm.X - sm.Y)),
           "model": src, "version": __version__}
    if frame is not None:
        from .model import hp_observable
        with warnings.catch_warnings(record=True):
            warnings.simplefilter("always")
            doc["sz"] = [hp_observable(o, frame, i) for i, o in enumerate(occ)]
    _emit(args, json_text(doc))


def cmd_trajectory(args):
    gg = args.gg if args.gg is not None else args.gamma
    gl = args.gl if args.gl is not None else args.gamma
    if gg is None or gl is None:
        raise CLIError(EXIT_USAGE, "UsageError", "trajectory needs --gamma or both --gg and --gl")
    if args.ntraj < 1:
        raise GridError("--ntraj must be at least 1")
    times = _time_grid(args)
    model = SpinModel(args.S, args.g, gg, gl)
    psi0 = model.product_state(-model.S, model.S)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        ens = mc_trajectories(model, psi0, times, args.ntraj, seed=args.seed)
        lind = None if args.no_lindblad else lindblad_evolve(model, psi0, times, t0=args.t0)
    mean, sem = ens.mean("sz_a"), ens.sem("sz_a")
    header = ["t", "mean", "sem"] + ([] if lind is None else ["lindblad"])
    rows = []
    for i, t in enumerate(times):
        row = [t, mean[i], sem[i]]
        if lind is not None:
            row.append(lind.sz_a[i])
        rows.append(row)
    text = csv_text(header, rows)
    meta = _meta(args, {"spin_model": {"S": model.S, "g": model.g, "gamma_g": gg,
                                       "gamma_l": gl}},
                 {"jump_probability_bound": 0.05, "trace_drift": 1e-6},
                 dt=ens.dt, scheme=ens.scheme, rng="Philox(SeedSequence([seed, index]))",
                 jumps=ens.jumps, warnings=sorted({str(w.message) for w in caught}))
    if args.out:
        traj_rows = []
        data = ens.series["sz_a"]
        for i, t in enumerate(times):
            for j in ens.trajectory_ids:
                traj_rows.append([t, int(j), data[i, j]])
        tpath = args.out + ".trajectories.csv"
        write_text(tpath, csv_text(["t", "trajectory_id", "sz_a"], traj_rows))
        meta["trajectory_file"] = tpath
    _emit(args, text, meta)


COMMANDS = {
    "presets": cmd_presets,
    "spectrum": cmd_spectrum,
    "gap": cmd_gap,
    "pt-check": cmd_pt_check,
    "ep-scan": cmd_ep_scan,
    "dynamics": cmd_dynamics,
    "steady": cmd_steady,
    "trajectory": cmd_trajectory,
}


def _error(code, kind, message):
    sys.stderr.write(json_text({"error": {"code": code, "type": kind, "message": message}}))
    return code


def run(argv=None) -> int:
    """Parse ``argv`` and run one command; returns the exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else EXIT_USAGE
        return code if code == 0 else EXIT_USAGE
    try:
        COMMANDS[args.command](args)
    except CLIError as exc:
        return _error(exc.code, exc.kind, exc.message)
    except UnknownPresetError as exc:
        return _error(EXIT_UNKNOWN_PRESET, "UnknownPresetError", str(exc))
    except ModelError as exc:
        return _error(EXIT_BAD_MODEL, "ModelError", str(exc))
    except GridError as exc:
        return _error(EXIT_BAD_GRID, "GridError", str(exc))
    except (NoUniqueSolutionError, IntegrationError, OverflowError) as exc:
        return _error(EXIT_NUMERICAL, type(exc).__name__, str(exc))
    except OSError as exc:
        return _error(EXIT_USAGE, "OSError", f"{exc.filename}: {exc.strerror}")
    except Exception as exc:  # pragma: no cover - last resort
        return _error(EXIT_INTERNAL, type(exc).__name__, str(exc))
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
