"""Command-line interface.

    projgeom <subcommand> SCENARIO.json [--json] [options]

Exit codes: 0 success (all checks passed), 1 check or numerical failure,
2 usage or scenario error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from typing import Sequence

import numpy as np

from .checks import SUITES, CheckResult, applicable_suites, run_suites
from .connections import normal_omega0, pi_symbols
from .densities import bracket_eval, upper_connection
from .dynamics import (
    IntegrationError,
    fit_fractional_linear,
    integrate_linear_geodesic,
    integrate_projective_geodesic,
    parallel_transport,
)
from .expr import ExprError, as_field, evaluate_many
from .geometry import GeometryError
from .operators import extend_to_densities, projective_laplacian, symbol_to_operator_report
from .scenario import SCHEMA, Scenario, ScenarioError
from .thomas import hat_connection, thomas_lift

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _floats(a) -> list:
    return np.asarray(a, dtype=float).tolist()


# -- subcommands (each returns (payload, exit code)) ---------------------------------


def cmd_pi(sc: Scenario, args) -> tuple[dict, int]:
    P = pi_symbols(sc.connection())
    return {
        "symbols": P.texts(),
        "samples": [{"point": p, "values": _floats(P.at(p))} for p in sc.points()],
    }, EXIT_OK


def cmd_lift(sc: Scenario, args) -> tuple[dict, int]:
    P = pi_symbols(sc.connection())
    if args.flavor == "hat":
        L, fibre = hat_connection(P), 1.0 if args.fibre is None else args.fibre
    else:
        L, fibre = thomas_lift(P), 0.0 if args.fibre is None else args.fibre
    samples = [{"point": [fibre] + p, "values": _floats(L.at([fibre] + p))} for p in sc.points()]
    return {"flavor": args.flavor, "coefficients": L.texts(), "samples": samples}, EXIT_OK


def cmd_laplacian(sc: Scenario, args) -> tuple[dict, int]:
    op = projective_laplacian(pi_symbols(sc.connection()), sc.upper_metric())
    f = as_field(sc.function(), sc.dim)
    samples = []
    for p in sc.points():
        S, b, _ = op.coefficients_at(p)
        samples.append({"point": p, "principal": _floats(S), "drift": _floats(b), "applied": op.apply(f, p)})
    return {**op.to_json(), "function": f.text, "samples": samples}, EXIT_OK


def cmd_upper(sc: Scenario, args) -> tuple[dict, int]:
    gamma = upper_connection(pi_symbols(sc.connection()), sc.upper_metric())
    return {
        "gamma": [g.text for g in gamma],
        "samples": [{"point": p, "values": _floats(evaluate_many(gamma, p))} for p in sc.points()],
    }, EXIT_OK


def _density_samples(d, points) -> list:
    return [{"point": p, "values": {str(w): v for w, v in d.values(p).items()}} for p in points]


def cmd_bracket(sc: Scenario, args) -> tuple[dict, int]:
    a, b = sc.densities()
    result = bracket_eval(sc.bracket(), a, b)
    return {"bracket": result.to_json(), "samples": _density_samples(result, sc.points())}, EXIT_OK


def cmd_extend(sc: Scenario, args) -> tuple[dict, int]:
    P = pi_symbols(sc.connection())
    B = sc.bracket()
    D = extend_to_densities(B, P)
    a, _ = sc.densities()
    image = D.apply(a)
    payload = {
        "weight_shift": str(D.weight),
        "operator": D.op.to_json(),
        "input": a.to_json(),
        "image": image.to_json(),
        "samples": _density_samples(image, sc.points()),
    }
    if B.weight == 0:
        payload["report"] = symbol_to_operator_report(B.S, P).to_json(sc.points())
    return payload, EXIT_OK


def _csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([f"{v:.17g}" for v in r])
    return buf.getvalue()


def cmd_geodesic(sc: Scenario, args) -> tuple[dict, int]:
    g = sc.geodesic()
    G = sc.connection()
    n = sc.dim
    if args.projective:
        if args.normal:
            w = normal_omega0(G, [g["x0"]])
        else:
            sc.require("omega0")
            w = sc.raw["omega0"]
        path = integrate_projective_geodesic(G, w, g["x0"], g["v0"], g["T"], g["h"])
    else:
        path = integrate_linear_geodesic(G, g["x0"], g["v0"], g["T"], g["h"])
    header = ["t"] + [f"x{i}" for i in range(n)] + [f"v{i}" for i in range(n)]
    return {"columns": header, "rows": path.rows().tolist()}, EXIT_OK


def cmd_transport(sc: Scenario, args) -> tuple[dict, int]:
    E, base, opts = sc.transport()
    path = parallel_transport(E, base, opts["xi0"], opts["T"], opts["h"])
    header = ["t"] + [f"xi{a}" for a in range(E.fibre_dim)]
    payload = {"columns": header, "rows": path.rows().tolist()}
    if args.fit:
        rng = np.random.default_rng(opts["seed"])
        pairs = []
        for _ in range(opts["pairs"]):
            xi = rng.uniform(-0.5, 0.5, E.fibre_dim)
            pairs.append((xi, parallel_transport(E, base, xi, opts["T"], opts["h"]).end))
        fmap, residual = fit_fractional_linear(pairs, E.fibre_dim)
        payload["fit"] = {"matrix": _floats(fmap.matrix()), "holdout_residual": residual}
    return payload, EXIT_OK


def cmd_check(sc: Scenario, args) -> tuple[dict, int]:
    names = applicable_suites(sc) if "all" in args.suite else args.suite
    results = run_suites(sc, names)
    ok = all(r.passed for r in results)
    return {"checks": [r.to_json() for r in results], "passed": ok}, EXIT_OK if ok else EXIT_FAIL


COMMANDS = {
    "pi": (cmd_pi, "projective symbols at the sample points"),
    "lift": (cmd_lift, "Thomas lift coefficients on M-tilde or M-hat"),
    "laplacian": (cmd_laplacian, "coefficients and applications of the projective Laplacian"),
    "upper": (cmd_upper, "the upper connection gamma"),
    "bracket": (cmd_bracket, "evaluate the bracket of the scenario densities"),
    "extend": (cmd_extend, "density-operator extension with the gamma/theta report"),
    "geodesic": (cmd_geodesic, "integrate a geodesic (CSV trajectory)"),
    "transport": (cmd_transport, "projective parallel transport (CSV trajectory)"),
    "check": (cmd_check, "run invariance suites"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="projgeom", description="Projective connections and density operators.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("scenario", help="path to a JSON scenario file")
        p.add_argument("--json", action="store_true", help="machine-readable output")
        if name == "lift":
            p.add_argument("--flavor", choices=["tilde", "hat"], default="tilde")
            p.add_argument("--fibre", type=float, default=None, help="fibre coordinate of the sample points")
        if name == "geodesic":
            p.add_argument("--projective", action="store_true", help="include the cubic omega0 term")
            p.add_argument("--normal", action="store_true", help="use the normal omega0 of the connection")
        if name in ("geodesic", "transport"):
            p.add_argument("--output", "-o", help="write the CSV trajectory here instead of stdout")
        if name == "transport":
            p.add_argument("--fit", action="store_true", help="also fit a fractional-linear fibre map")
        if name == "check":
            p.add_argument(
                "--suite", action="append", required=True, choices=sorted(SUITES) + ["all"],
                help="suite to run (repeatable)",
            )
    sub.add_parser("schema", help="print the scenario JSON schema")
    return parser


def _num(v) -> float:
    return float("inf") if v is None else v


def _human(name: str, payload: dict) -> str:
    if name == "check":
        lines = [CheckResult(c["name"], _num(c["defect"]), c["tolerance"], c["note"]).line() for c in payload["checks"]]
        lines.append("all checks passed" if payload["passed"] else "some checks FAILED")
        return "\n".join(lines)
    return json.dumps(payload, indent=2)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "schema":
        print(json.dumps(SCHEMA, indent=2))
        return EXIT_OK
    func, _ = COMMANDS[args.command]
    try:
        sc = Scenario.load(args.scenario)
        payload, code = func(sc, args)
    except ScenarioError as exc:
        _report_error(args, "scenario", exc.detail, exc.path)
        return EXIT_USAGE
    except (IntegrationError, ExprError, GeometryError, ArithmeticError, ValueError) as exc:
        _report_error(args, "numerical", str(exc))
        return EXIT_FAIL

    if args.command in ("geodesic", "transport") and not args.json:
        text = _csv(payload["columns"], payload["rows"])
        if args.output:
            with open(args.output, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        if "fit" in payload:
            print(json.dumps(payload["fit"], indent=2), file=sys.stdout if args.output else sys.stderr)
        return code
    if args.json:
        print(json.dumps({"command": args.command, "scenario": sc.name, **payload}, sort_keys=True))
    else:
        print(_human(args.command, payload))
    return code


def _report_error(args, kind: str, message: str, path: str | None = None) -> None:
    if getattr(args, "json", False):
        err = {"error": kind, "message": message}
        if path is not None:
            err["path"] = path
        print(json.dumps(err, sort_keys=True))
    else:
        where = f" at {path}" if path is not None else ""
        print(f"error ({kind}){where}: {message}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
