"""Command-line front end.

Exit codes: 0 success, 1 domain failure (invalid structure, inadmissible
profile, periodicity or ODE failure), 2 malformed input (bad expressions,
bad JSON, bad argument values).  Failure diagnostics go to stderr as
machine-parseable ``key=value`` pairs.  Outputs are byte-deterministic for
identical configurations.
"""
from __future__ import annotations

import argparse
import io
import json
import sys

import numpy as np

from .errors import (
    AdmissibilityFailure,
    HalfFlatError,
    ODEStiffness,
    ParseError,
    PeriodicityViolation,
    ValidationFailure,
)
from .exterior import Form
from .hitchin import validate_su3
from . import torus as torus_mod
from . import ts3 as ts3_mod


def _diag(**kv):
    print(" ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}"
                   for k, v in kv.items()), file=sys.stderr)


def _emit(text, out_path):
    if out_path:
        with open(out_path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json_text(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _want_plot(args):
    return bool(getattr(args, "plot", False))


def _plot_stem(args):
    stem = args.out
    for suffix in (".csv", ".json"):
        if stem.endswith(suffix):
            stem = stem[: -len(suffix)]
    return stem


def cmd_validate(args):
    try:
        with open(args.input) as fh:
            payload = json.load(fh)
        omega = Form.from_dict(payload["omega"])
        psi = Form.from_dict(payload["psi"])
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        _diag(error=type(exc).__name__, detail=str(exc).replace(" ", "_")[:120])
        return 2
    try:
        data = validate_su3(omega, psi, tol=args.tol)
    except HalfFlatError as exc:
        _diag(error=type(exc).__name__)
        return 1
    report = {"valid": data.valid, "P": data.P,
              "residuals": {k: float(v) for k, v in data.residuals.items()}}
    if args.full:
        report["structure"] = data.to_dict()
    _emit(_json_text(report), args.out)
    if not data.valid:
        _diag(error="InvalidStructure",
              normalization=float(data.residuals["normalization"]),
              compat=float(data.residuals["compat"]), P=float(data.P))
        return 1
    return 0


def _run_sweep(profile, args):
    built = ts3_mod.build_structure(profile, tol=args.tol)
    scal_closed, _ = ts3_mod.scal_closed_form(built)
    sweep = ts3_mod.scal_from_torsion(built)
    buf = io.StringIO()
    ts3_mod.write_sweep_csv(built, sweep.scal, scal_closed, buf)
    _emit(buf.getvalue(), args.out)
    if _want_plot(args):
        from .plots import ts3_figures
        for path in ts3_figures(built, sweep.scal, scal_closed, _plot_stem(args)):
            _diag(figure=path)
    return built, sweep


def cmd_ts3(args):
    if _want_plot(args) and not args.out:
        _diag(error="PlotRequiresOut")
        return 2
    try:
        profile = ts3_mod.symbolic_profile(args.f1, args.t_max, args.samples)
    except (ParseError, ValueError) as exc:
        kv = {"error": type(exc).__name__}
        if isinstance(exc, ParseError):
            kv["position"] = exc.position
        _diag(**kv)
        return 2
    try:
        _run_sweep(profile, args)
        return 0
    except AdmissibilityFailure as exc:
        kv = {"error": "AdmissibilityFailure"}
        if exc.first_violation_t is not None:
            kv["first_violation_t"] = float(exc.first_violation_t)
        _diag(**kv)
        return 1
    except ValidationFailure as exc:
        _diag(error="ValidationFailure", t=float(exc.t or 0.0))
        return 1


def cmd_torus(args):
    if _want_plot(args) and not args.out:
        _diag(error="PlotRequiresOut")
        return 2
    try:
        spec = torus_mod.TorusSpec.from_text(args.a, args.b, args.c, args.grid)
    except ParseError as exc:
        _diag(error="ParseError", position=exc.position)
        return 2
    except ValueError as exc:
        _diag(error="ValueError", detail=str(exc).replace(" ", "_")[:120])
        return 2
    try:
        report = torus_mod.full_report(spec, tol=args.tol)
    except PeriodicityViolation:
        _diag(error="PeriodicityViolation")
        return 1
    except ValidationFailure as exc:
        _diag(error="ValidationFailure", residual=float(exc.residual or 0.0))
        return 1
    _emit(_json_text(report), args.out)
    if _want_plot(args):
        from .plots import torus_figures
        for path in torus_figures(report, _plot_stem(args)):
            _diag(figure=path)
    return 0


def cmd_stenzel(args):
    if _want_plot(args) and not args.out:
        _diag(error="PlotRequiresOut")
        return 2
    if not args.f1_at_0 < 0.0:
        _diag(error="PositivityViolation", f1_at_0=float(args.f1_at_0))
        return 2
    try:
        profile = ts3_mod.stenzel_solve(args.f1_at_0, args.t_max, args.samples)
        built, sweep = _run_sweep(profile, args)
    except ODEStiffness as exc:
        _diag(error="ODEStiffness", last_valid_t=float(exc.last_valid_t or 0.0))
        return 1
    except (AdmissibilityFailure, ValidationFailure) as exc:
        _diag(error=type(exc).__name__)
        return 1
    scal_closed, _ = ts3_mod.scal_closed_form(built)
    window = np.abs(built.grid) >= 0.1
    worst = float(max(np.max(np.abs(sweep.scal[window])),
                      np.max(np.abs(scal_closed[window]))))
    if worst >= 1e-5:
        _diag(error="NotRicciFlat", max_abs_scal=worst)
        return 1
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="halfflat",
        description="Symplectic half-flat SU(3)-structures: validation, the "
                    "invariant construction on TS^3, and torus diagnostics.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="validate a serialized (omega, psi) pair")
    v.add_argument("input", help="JSON file with {omega: {...}, psi: {...}}")
    v.add_argument("--tol", type=float, default=1e-8)
    v.add_argument("--out", default=None)
    v.add_argument("--full", action="store_true",
                   help="include the full structure in the report")
    v.set_defaults(fn=cmd_validate)

    t = sub.add_parser("ts3", help="profile sweep along the TS^3 geodesic")
    t.add_argument("--f1", required=True,
                   help="profile expression in t, or builtin name `cosh`"
                        " (meaning -cosh(t))")
    t.add_argument("--t-max", type=float, default=3.0)
    t.add_argument("--samples", type=int, default=601)
    t.add_argument("--tol", type=float, default=1e-8)
    t.add_argument("--out", default=None)
    t.add_argument("--plot", action="store_true",
                   help="render profile/curvature figures next to --out")
    t.set_defaults(fn=cmd_ts3)

    o = sub.add_parser("torus", help="T^6 family diagnostics")
    o.add_argument("--a", default="0")
    o.add_argument("--b", default="0")
    o.add_argument("--c", default="0")
    o.add_argument("--grid", type=int, default=32)
    o.add_argument("--tol", type=float, default=1e-8)
    o.add_argument("--out", default=None)
    o.add_argument("--plot", action="store_true")
    o.set_defaults(fn=cmd_torus)

    s = sub.add_parser("stenzel", help="Ricci-flat (Calabi-Yau) profile sweep")
    s.add_argument("--f1-at-0", type=float, required=True)
    s.add_argument("--t-max", type=float, default=2.0)
    s.add_argument("--samples", type=int, default=801)
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--out", default=None)
    s.add_argument("--plot", action="store_true")
    s.set_defaults(fn=cmd_stenzel)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
