"""``tqft-volume``: command-line front end for the 7₃ pipeline.

Every subcommand prints one JSON document (sorted keys) to stdout or ``--out``.
Exit status: 0 success, 1 numerical failure (diagnostic JSON on stdout),
2 invalid flags or unreadable inputs.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

VOLUME = 4.592125697
F_T5 = complex(2.884158080, -4.592125697)

CONFIG_KEYS = {
    "abs_tol": float,
    "contour_truncation": float,
    "quad_points": int,
    "tol": float,
    "threads": int,
}


class UsageError(Exception):
    pass


def _jsonable(x):
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def read_config(path: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise UsageError(f"{path}:{n}: unknown key {key!r}")
        try:
            out[key] = CONFIG_KEYS[key](val.strip("\"'"))
        except ValueError:
            raise UsageError(f"{path}:{n}: bad value for {key}") from None
    return out


def _settings(args) -> dict:
    cfg = read_config(args.config) if args.config else {}
    for key in CONFIG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _precision(cfg):
    from .specfun import PrecisionConfig

    kw = {k: cfg[k] for k in ("abs_tol", "contour_truncation", "quad_points") if k in cfg}
    try:
        return PrecisionConfig(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _triangulation(args, default="ideal73"):
    from .triangulation import BUILTINS, load_triangulation

    if getattr(args, "triangulation", None):
        try:
            return load_triangulation(args.triangulation)
        except (OSError, KeyError, ValueError) as exc:
            raise UsageError(f"cannot load triangulation: {exc}") from None
    name = getattr(args, "builtin", None) or default
    return BUILTINS[name]()


def _parse_number(s: str) -> complex:
    try:
        return complex(s.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise UsageError(f"not a number: {s!r}") from None


def _parse_b_list(s: str) -> list[float]:
    try:
        vals = [float(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad --b list: {s!r}") from None
    if not vals:
        raise UsageError("--b list is empty")
    return vals


# ------------------------------------------------------------------ commands

def cmd_specfun(args, cfg):
    from . import specfun as sf

    x = _parse_number(args.x)
    fn = args.fn
    if fn in ("lobachevsky", "lobachevsky_prime"):
        if x.imag != 0:
            raise UsageError(f"{fn} takes a real argument")
        val = getattr(sf, fn)(x.real)
    elif fn in ("dilog", "bloch_wigner"):
        val = getattr(sf, fn)(x)
    else:
        cc = sf.CouplingConstant(args.b)
        val = getattr(sf, fn)(x, cc, _precision(cfg))
    val = complex(val) if np.iscomplexobj(val) else float(val)
    return {"fn": fn, "x": x, "b": args.b, "value": val}, 0


def cmd_angles(args, cfg):
    from .angle_opt import maximize_volume_report

    rep = maximize_volume_report(_triangulation(args))
    return rep.to_json(), 0


def _saddle_report(args):
    from .angle_opt import maximize_volume
    from .complex_geometry import solve_gluing

    alpha = maximize_volume(_triangulation(args))
    return solve_gluing(alpha)


def cmd_gluing(args, cfg):
    from .complex_geometry import bloch_wigner_volume

    rep = _saddle_report(args)
    doc = rep.to_json()
    doc["bloch_wigner_volume"] = bloch_wigner_volume(rep)
    return doc, 0


def _root_entry(k: int, t: complex) -> dict:
    from .complex_geometry import classify_saddle, f_of_t

    sc = classify_saddle(t)
    return {
        "index": k, "t": t, "exp_y": sc.exp_y, "exp_x_minus_y": sc.exp_x_minus_y,
        "h": sc.h, "i": sc.i, "j": sc.j, "eigenvalues": list(sc.eigenvalues),
        "admissible": sc.admissible, "f": f_of_t(t),
    }


def _root_table() -> list[dict]:
    from .complex_geometry import labeled_roots
    from .specfun import DomainError

    rows = []
    for k, t in enumerate(labeled_roots()):
        try:
            rows.append(_root_entry(k, t))
        except DomainError as exc:
            rows.append({"index": k, "t": t, "note": str(exc)})
    return rows


def cmd_saddle(args, cfg):
    from .complex_geometry import labeled_roots

    if args.t_index is None:
        return {"roots": _root_table()}, 0
    roots = labeled_roots()
    if not 0 <= args.t_index < len(roots):
        raise UsageError(f"--t-index must lie in 0..{len(roots) - 1}")
    return _root_entry(args.t_index, roots[args.t_index]), 0


def _sweep_csv(table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["b", "hbar", "log_abs_J", "volume_estimate", "err_bound"])
    for r in table.rows:
        w.writerow([repr(r.b), repr(r.hbar), repr(r.log_abs_J), repr(r.volume_estimate), repr(r.err_bound)])
    return buf.getvalue()


def cmd_integrate(args, cfg):
    from .integrator import (contour_from_angles, integrate_JX_2d, integrate_JX_3d,
                             sweep_volume_limit)

    tol = cfg.get("tol", 1e-8)
    prec = _precision(cfg)
    if args.what == "sweep":
        table = sweep_volume_limit(_parse_b_list(args.b), args.method, tol=tol, prec=prec)
        if args.out_csv:
            Path(args.out_csv).write_text(_sweep_csv(table))
        bad = [r.b for r in table.rows if r.err_bound > tol]
        return table.to_json(), (1 if bad else 0)
    from .angle_opt import maximize_volume
    from .specfun import CouplingConstant

    cc = CouplingConstant(float(args.b))
    alpha = maximize_volume(_triangulation(args))
    if args.method == "3d":
        res = integrate_JX_3d(cc, contour_from_angles(cc, alpha, 3), tol, prec)
    else:
        res = integrate_JX_2d(cc, contour_from_angles(cc, alpha, 2), tol, prec)
    doc = {"b": cc.b, "hbar": cc.hbar, "method": args.method, "value": res.value,
           "log_abs": res.log_abs, "err_bound": res.rel_err, "box": res.box,
           "decay_ratio": res.decay_ratio, "levels": res.levels}
    return doc, (1 if res.rel_err > tol else 0)


def _crosscheck(tol, prec) -> dict:
    from .angle_opt import maximize_volume, random_angle_structure
    from .integrator import (contour_from_angles, h_compatible_alpha,
                             h_triangulation_cross_check, integrate_JX_3d)
    from .specfun import CouplingConstant
    from .triangulation import NONEMPTY_POINT, builtin_ideal_73

    t = builtin_ideal_73()
    a0 = maximize_volume(t)
    cc = CouplingConstant(0.5)
    contours = {
        "alpha0": a0,
        "nonempty_point": NONEMPTY_POINT,
        "random": random_angle_structure(t, np.random.default_rng(7)),
    }
    vals = {k: integrate_JX_3d(cc, contour_from_angles(cc, a, 3), tol, prec).value
            for k, a in contours.items()}
    ref = vals["alpha0"]
    spread = max(abs(v - ref) for v in vals.values()) / abs(ref)
    h_rows = []
    for b in (0.5, 0.4):
        ccb = CouplingConstant(b)
        for label, alpha, b1 in (("alpha0", a0, 0.25), ("shifted", h_compatible_alpha(a0), 0.1)):
            h_abs, j_abs = h_triangulation_cross_check(ccb, alpha, b1, tol, prec)
            h_rows.append({"b": b, "alpha": label, "b1_tau": b1, "abs_H": h_abs, "abs_J": j_abs,
                           "rel_diff": abs(h_abs - j_abs) / j_abs})
    return {
        "contour_invariance": {"b": 0.5, "values": vals, "rel_spread": spread,
                               "pass": spread < 10 * tol},
        "h_modulus": {"rows": h_rows, "pass": all(r["rel_diff"] < 4 * tol for r in h_rows)},
    }


def cmd_crosscheck(args, cfg):
    doc = _crosscheck(cfg.get("tol", 1e-8), _precision(cfg))
    ok = doc["contour_invariance"]["pass"] and doc["h_modulus"]["pass"]
    return doc, (0 if ok else 1)


def cmd_full(args, cfg):
    from .angle_opt import maximize_volume_report
    from .complex_geometry import bloch_wigner_volume, f_of_t, labeled_roots, solve_gluing
    from .integrator import sweep_volume_limit

    tol = cfg.get("tol", 1e-8)
    prec = _precision(cfg)
    opt = maximize_volume_report(_triangulation(args))
    rep = solve_gluing(opt.alpha)
    f5 = f_of_t(labeled_roots()[5])
    table = sweep_volume_limit((0.5, 0.42, 0.35, 0.3, 0.25), "2d", opt.alpha, tol, prec)
    cross = _crosscheck(tol, prec)
    vols = [r.volume_estimate for r in table.rows]
    checks = {
        "volume_optimizer": abs(opt.volume - VOLUME) < 1e-6,
        "volume_potential": abs(-rep.S_value.real - VOLUME) < 1e-8 and rep.grad_norm < 1e-12,
        "volume_bloch_wigner": abs(bloch_wigner_volume(rep) + rep.S_value.real) < 1e-8,
        "f_t5": abs(f5 - F_T5) < 1e-8,
        "im_f_equals_re_S": abs(f5.imag - rep.S_value.real) < 1e-8,
        "sweep_extrapolation": abs(table.extrapolated_volume + VOLUME) < 0.05,
        "sweep_monotone": all(v2 < v1 for v1, v2 in zip(vols[1:], vols[2:])),
        "contour_invariance": cross["contour_invariance"]["pass"],
        "h_modulus": cross["h_modulus"]["pass"],
    }
    doc = {
        "max_volume": opt.volume,
        "y0": list(rep.y0),
        "re_S": rep.S_value.real,
        "minus_volume": -rep.volume,
        "roots": _root_table(),
        "f_t5": f5,
        "sweep": table.to_json(),
        "crosscheck": cross,
        "checks": checks,
        "all_pass": all(checks.values()),
    }
    return doc, (0 if doc["all_pass"] else 1)


# --------------------------------------------------------------------- parser

def _common(p):
    p.add_argument("--config", help="key = value file (abs_tol, contour_truncation, quad_points, tol, threads)")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.add_argument("--threads", type=int, help="worker threads (overrides TQFT_THREADS)")
    p.add_argument("--abs-tol", dest="abs_tol", type=float, help="Φ_b absolute tolerance")
    p.add_argument("--tol", type=float, help="relative quadrature tolerance")


def _tri(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--builtin", choices=["ideal73", "h73"], help="shipped triangulation")
    g.add_argument("--triangulation", metavar="FILE", help="triangulation JSON file")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tqft-volume", description="Volume of the 7_3 knot complement via state integrals.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("specfun", help="evaluate a special function")
    p.add_argument("--fn", required=True, choices=["lobachevsky", "lobachevsky_prime", "dilog",
                                                   "bloch_wigner", "faddeev", "log_faddeev"])
    p.add_argument("--x", required=True, help="argument, e.g. 0.3 or 0.1+0.2j")
    p.add_argument("--b", type=float, default=1.0, help="coupling for Φ_b")
    _common(p)
    p.set_defaults(func=cmd_specfun)

    p = sub.add_parser("angles", help="maximize the volume functional")
    _tri(p)
    _common(p)
    p.set_defaults(func=cmd_angles)

    p = sub.add_parser("gluing", help="solve the gluing equations from the maximizer")
    _tri(p)
    _common(p)
    p.set_defaults(func=cmd_gluing)

    p = sub.add_parser("saddle", help="roots of the reduced saddle polynomial")
    p.add_argument("--t-index", dest="t_index", type=int, help="report a single root")
    _common(p)
    p.set_defaults(func=cmd_saddle)

    p = sub.add_parser("integrate", help="state-integral quadrature")
    p.add_argument("what", choices=["sweep", "point"])
    p.add_argument("--b", default="0.5,0.42,0.35,0.3,0.25", help="b value (point) or comma list (sweep)")
    p.add_argument("--method", choices=["2d", "3d"], default="2d")
    p.add_argument("--csv", dest="out_csv", metavar="FILE", help="sweep table as CSV")
    p.add_argument("--json", action="store_true", help="accepted for symmetry; JSON is always emitted")
    _tri(p)
    _common(p)
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("crosscheck", help="contour invariance and H-triangulation modulus checks")
    _common(p)
    p.set_defaults(func=cmd_crosscheck)

    p = sub.add_parser("full", help="run the whole pipeline and check all tolerances")
    _tri(p)
    _common(p)
    p.set_defaults(func=cmd_full)
    return ap


def main(argv=None) -> int:
    from .angle_opt import OptimizationError
    from .complex_geometry import GluingError
    from .integrator import IntegrationError
    from .specfun import DomainError, PoleError

    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = _settings(args)
        if args.command == "integrate" and args.what == "point":
            args.b = _parse_b_list(args.b)[0]
        if "threads" in cfg:
            if cfg["threads"] < 1:
                raise UsageError("threads must be positive")
            os.environ["TQFT_THREADS"] = str(cfg["threads"])
        doc, status = args.func(args, cfg)
    except UsageError as exc:
        ap.error(str(exc))  # exits with status 2
    except (OptimizationError, GluingError, IntegrationError, DomainError, PoleError,
            ArithmeticError, np.linalg.LinAlgError) as exc:
        sys.stdout.write(dumps({"error": str(exc), "type": type(exc).__name__, "command": args.command}))
        return 1
    text = dumps(doc)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
