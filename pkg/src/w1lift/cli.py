"""Command-line front end.

Exit codes: 0 when every check passes, 1 on a verification failure, 2 on
bad input. JSON output is key-sorted and timing-free so identical inputs
give identical bytes; CSV floats use 12 significant digits.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .current import extract_field, field_csv_rows, verify_field
from .examples import EXAMPLES, ExampleError, ExampleSpec, run_example
from .lift import (Lift, LiftInputError, LiftVerificationError, build_lift, check_marginals,
                   check_superposition_bound, geodesic_lift_check)
from .space import MetricSpace, validate_metric
from .suite import run_suite
from .transport import w1
from .wcurves import MeasureCurve, curve_variation, decompose_variation, is_bv_geodesic, is_constant_speed

PASS, FAIL, BAD_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items() if k != "runtime_s"}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return "%.12g" % v
    return str(v)


def write_csv(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _load(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        raise InputError(f"cannot read {path}: {err}") from None


def _curve(args) -> MeasureCurve:
    data = _load(args.curve)
    try:
        mc = MeasureCurve.from_json(data)
        if getattr(args, "grid", None):
            mc = mc.refine(args.grid)
    except (KeyError, TypeError, ValueError) as err:
        raise InputError(f"invalid curve in {args.curve}: {err}") from None
    return mc


def _lift(args, space: MetricSpace) -> Lift:
    data = _load(args.lift)
    try:
        return Lift.from_json(data, None if isinstance(data, dict) and "space" in data else space)
    except (KeyError, TypeError, ValueError) as err:
        raise InputError(f"invalid lift in {args.lift}: {err}") from None


def _emit(args, report: dict, name: str, summary: str):
    text = dumps(report)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{name}.json").write_text(text + "\n")
    if args.json:
        print(text)
    else:
        print(summary)
    return PASS if report.get("ok", True) else FAIL


def cmd_space_validate(args):
    data = _load(args.space)
    try:
        if "coords" in data and data["coords"] is not None and data.get("dist") is None:
            space = MetricSpace.from_coords(data["coords"], check=False)
        else:
            space = MetricSpace(np.asarray(data["dist"], dtype=float), check=False,
                                coords=data.get("coords"))
    except (KeyError, TypeError, ValueError) as err:
        raise InputError(f"invalid space in {args.space}: {err}") from None
    bad = validate_metric(space, args.tol or 0.0)
    report = {"ok": not bad, "size": space.size, "violations": [v.to_dict() for v in bad]}
    lines = [f"{space.size} points: " + ("valid metric" if not bad else f"{len(bad)} violation(s)")]
    lines += [f"  {v}" for v in bad[:20]]
    return _emit(args, report, "space", "\n".join(lines))


def cmd_w1_dist(args):
    data = _load(args.input)
    try:
        space = MetricSpace.from_json(data["space"])
        res = w1(space, data["mu"], data["nu"])
    except (KeyError, TypeError, ValueError) as err:
        raise InputError(f"invalid transport input: {err}") from None
    tol = args.tol if args.tol is not None else 1e-9
    report = {"ok": res.cert.reported_gap <= tol, "distance": res.distance,
              "coupling": res.coupling.to_json(), "potential": res.cert.potential,
              "dual_gap": res.cert.reported_gap, "lipschitz_excess": res.cert.lipschitz_excess(space),
              "tol": tol}
    return _emit(args, report, "w1", f"W1 = {res.distance:.12g} (dual gap {res.cert.reported_gap:.3g})")


def cmd_lift_build(args):
    mc = _curve(args)
    try:
        lift = build_lift(mc, args.level)
    except LiftInputError as err:
        raise InputError(str(err)) from None
    text = dumps(lift.to_json())
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "lift.json").write_text(text + "\n")
    if args.json or not args.out:
        print(text)
    else:
        print(f"{len(lift)} atoms at level {args.level} ({lift.gluing} gluing)")
    return PASS


def cmd_lift_verify(args):
    mc = _curve(args)
    lift = _lift(args, mc.space)
    tol = args.tol if args.tol is not None else 1e-8
    level_mc = mc.restrict(lift.grid) if lift.grid is not None else mc
    try:
        sup = check_superposition_bound(lift, level_mc, tol=tol)
    except LiftVerificationError as err:
        report = {"ok": False, "error": str(err), "marginal_error": check_marginals(lift, level_mc)}
        return _emit(args, report, "lift_verify", f"FAIL: {err}")
    geo = geodesic_lift_check(lift, level_mc)
    report = {"ok": sup.ok, "superposition": sup.to_dict(), "geodesic": geo.to_dict()}
    summary = (f"{'PASS' if sup.ok else 'FAIL'}: marginal error {sup.marginal_error:.3g}, "
               f"lift variation {sup.lift_total:.12g}, max slack {sup.max_slack:.3g}, "
               f"geodesic fraction {geo.fraction:.6g}")
    return _emit(args, report, "lift_verify", summary)


def cmd_curve_var(args):
    mc = _curve(args)
    inc = mc.increments()
    report = {"ok": True, "variation": curve_variation(mc), "increments": inc, "grid": mc.grid}
    if args.out:
        write_csv(Path(args.out) / "increments.csv", ("t", "w1_increment"), zip(mc.grid[:-1], inc))
    return _emit(args, report, "variation", f"variation = {curve_variation(mc):.12g}")


def cmd_curve_decompose(args):
    mc = _curve(args)
    try:
        prof = decompose_variation(mc, args.levels)
    except ValueError as err:
        raise InputError(str(err)) from None
    report = {"ok": True, **prof.to_dict()}
    if args.out:
        write_csv(Path(args.out) / "decomposition.csv", ("t", "w1_increment", "ac_density"), prof.csv_rows())
    summary = (f"total {prof.total:.12g}: atoms {prof.atom_estimate:.6g}, "
               f"ac {prof.ac_estimate:.6g}, residual {prof.residual_estimate:.6g}")
    return _emit(args, report, "decomposition", summary)


def cmd_curve_geodesic(args):
    mc = _curve(args)
    tol = args.tol if args.tol is not None else 1e-9
    geo = is_bv_geodesic(mc, tol)
    speed = is_constant_speed(mc, tol) if mc.uniform else None
    report = {"ok": geo, "bv_geodesic": geo, "constant_speed": speed,
              "variation": curve_variation(mc), "tol": tol}
    return _emit(args, report, "geodesic", f"geodesic: {geo}, constant speed: {speed}")


def cmd_current_extract(args):
    mc = _curve(args)
    lift = _lift(args, mc.space)
    level_mc = mc.restrict(lift.grid) if lift.grid is not None else mc
    try:
        field = extract_field(lift, level_mc)
    except LiftVerificationError as err:
        print(f"FAIL: {err}", file=sys.stderr)
        return FAIL
    rows = list(field_csv_rows(level_mc, field))
    header = ("t", "x", "y", "v", "contribution")
    if args.out:
        write_csv(Path(args.out) / "velocity.csv", header, rows)
    if args.json:
        print(dumps({"ok": True, "rows": [dict(zip(header, r)) for r in rows]}))
    elif not args.out:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    else:
        print(f"{len(rows)} velocity entries written")
    return PASS


def cmd_current_verify(args):
    mc = _curve(args)
    lift = _lift(args, mc.space)
    level_mc = mc.restrict(lift.grid) if lift.grid is not None else mc
    tol = args.tol if args.tol is not None else 1e-9
    try:
        rep = verify_field(level_mc, extract_field(lift, level_mc), tol)
    except LiftVerificationError as err:
        return _emit(args, {"ok": False, "error": str(err)}, "current_verify", f"FAIL: {err}")
    return _emit(args, rep.to_dict(), "current_verify",
                 f"{'PASS' if rep.ok else 'FAIL'}: max residual {rep.max_residual:.3g}, "
                 f"max speed gap {rep.max_speed_gap:.3g}")


def _parse_params(items):
    params = {}
    for item in items or ():
        if "=" not in item:
            raise InputError(f"parameter {item!r} is not key=value")
        k, v = item.split("=", 1)
        try:
            params[k] = json.loads(v)
        except json.JSONDecodeError:
            params[k] = v
    return params


def cmd_example_run(args):
    params = _parse_params(args.param)
    if args.level is not None:
        params["level"] = args.level
    if args.grid is not None:
        params["grid"] = args.grid
    try:
        rep = run_example(ExampleSpec(args.name, params))
    except (ExampleError, ValueError) as err:
        raise InputError(str(err)) from None
    if args.out:
        for name, (header, rows) in rep.tables.items():
            write_csv(Path(args.out) / f"{args.name}_{name}.csv", header, rows)
    lines = [f"{args.name}: {'PASS' if rep.ok else 'FAIL'}"]
    lines += [f"  [{'ok' if c['ok'] else 'FAIL'}] {c['name']}" for c in rep.checks]
    return _emit(args, rep.to_dict(), args.name, "\n".join(lines))


def cmd_suite(args):
    only = None
    if args.only:
        try:
            only = {int(x) for x in args.only.split(",")}
        except ValueError:
            raise InputError("--only takes comma-separated criterion numbers") from None
    res = run_suite(only)
    lines = [f"criterion {r['id']} ({r['name']}): {'PASS' if r['ok'] else 'FAIL'}" for r in res["criteria"]]
    lines.append("all criteria pass" if res["ok"] else "some criteria FAIL")
    return _emit(args, res, "suite", "\n".join(lines))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="print the JSON report")
    common.add_argument("--out", help="directory for JSON/CSV artifacts")
    common.add_argument("--tol", type=float, help="comparison tolerance")

    p = argparse.ArgumentParser(prog="w1lift", description="Discrete W1 curves, lifts and currents.")
    sub = p.add_subparsers(dest="group", required=True)

    sp = sub.add_parser("space").add_subparsers(dest="cmd", required=True)
    c = sp.add_parser("validate", parents=[common])
    c.add_argument("space")
    c.set_defaults(fn=cmd_space_validate)

    sp = sub.add_parser("w1").add_subparsers(dest="cmd", required=True)
    c = sp.add_parser("dist", parents=[common], help='input JSON: {"space", "mu", "nu"}')
    c.add_argument("input")
    c.set_defaults(fn=cmd_w1_dist)

    sp = sub.add_parser("lift").add_subparsers(dest="cmd", required=True)
    c = sp.add_parser("build", parents=[common])
    c.add_argument("--curve", required=True)
    c.add_argument("--level", type=int, required=True)
    c.add_argument("--grid", type=int)
    c.set_defaults(fn=cmd_lift_build)
    c = sp.add_parser("verify", parents=[common])
    c.add_argument("--lift", required=True)
    c.add_argument("--curve", required=True)
    c.add_argument("--grid", type=int)
    c.set_defaults(fn=cmd_lift_verify)

    sp = sub.add_parser("curve").add_subparsers(dest="cmd", required=True)
    for name, fn in (("var", cmd_curve_var), ("decompose", cmd_curve_decompose),
                     ("geodesic", cmd_curve_geodesic)):
        c = sp.add_parser(name, parents=[common])
        c.add_argument("--curve", required=True)
        c.add_argument("--grid", type=int)
        if name == "decompose":
            c.add_argument("--levels", type=int, default=6)
        c.set_defaults(fn=fn)

    sp = sub.add_parser("current").add_subparsers(dest="cmd", required=True)
    for name, fn in (("extract", cmd_current_extract), ("verify", cmd_current_verify)):
        c = sp.add_parser(name, parents=[common])
        c.add_argument("--lift", required=True)
        c.add_argument("--curve", required=True)
        c.add_argument("--grid", type=int)
        c.set_defaults(fn=fn)

    sp = sub.add_parser("example").add_subparsers(dest="cmd", required=True)
    c = sp.add_parser("run", parents=[common])
    c.add_argument("name", choices=EXAMPLES)
    c.add_argument("--level", type=int)
    c.add_argument("--grid", type=int)
    c.add_argument("--param", action="append", metavar="KEY=VALUE")
    c.set_defaults(fn=cmd_example_run)

    c = sub.add_parser("suite", parents=[common])
    c.add_argument("--only", help="comma-separated criterion numbers")
    c.set_defaults(fn=cmd_suite)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return BAD_INPUT if exc.code else PASS
    try:
        return args.fn(args)
    except InputError as err:
        print(f"error: {err}", file=sys.stderr)
        return BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
