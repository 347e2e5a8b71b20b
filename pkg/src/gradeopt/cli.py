"""Command-line entry point: solve, check, project, generate."""
from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import presets
from .errors import GradeOptError, ParseError, ValidationError
from .scenario import (build_report, export_solution, group_label, group_residuals,
                       initial_objective, load_scenario, scenario_terms, spec_term)
from .solver import SolverConfig, report, solve


def _read_heights(path, n):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("["):
        try:
            z = np.asarray(json.loads(text), dtype=float)
        except (json.JSONDecodeError, ValueError) as exc:
            raise ParseError(1, f"{path}: {exc}") from exc
    else:
        rows = list(csv.DictReader(text.splitlines()))
        if not rows or "z" not in rows[0]:
            raise ParseError(1, f"{path}: expected a JSON array or a CSV with a 'z' column")
        try:
            z = np.array([float(r["z"]) for r in rows])
        except ValueError as exc:
            raise ParseError(1, f"{path}: {exc}") from exc
    if z.shape != (n,) or not np.all(np.isfinite(z)):
        raise ValidationError(f"{path}: expected {n} finite heights, got shape {z.shape}")
    return z


def _fmt(x):
    return format(float(x), ".12g")


def cmd_solve(args) -> int:
    sc = load_scenario(args.scenario)
    base = sc.solver
    try:
        cfg = SolverConfig(
            method=args.method or base.method,
            gamma=args.gamma if args.gamma is not None else base.gamma,
            tolerance=args.tol if args.tol is not None else base.tolerance,
            max_iterations=args.max_iters if args.max_iters is not None else base.max_iterations,
        )
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    sc.solver = cfg
    if not args.quiet:
        cfg.progress = lambda k, step, res: print(
            f"iter {k}  step {step:.3e}  max residual {res:.3e}", file=sys.stderr)
    terms = scenario_terms(sc, with_objective=cfg.method == "dr")
    if not terms:
        raise ValidationError("scenario has no constraints and no objective")
    x, state = solve(terms, sc.initial_heights, cfg)
    diag = report(state, scenario_terms(sc))
    diag["initial_objective"] = initial_objective(sc)
    diag["method"] = cfg.method
    rep = build_report(sc, scenario_terms(sc, with_objective=False), x, diag)
    if args.out:
        export_solution(rep, sc, args.out, args.contour_interval)
    status = "converged" if state.converged else "iteration limit"
    print(f"{status}: {state.iteration} iterations, max residual {_fmt(diag['max_violation'])}, "
          f"objective {_fmt(diag['objective'])} (initial {_fmt(diag['initial_objective'])})")
    return 0 if state.converged else 2


def cmd_check(args) -> int:
    sc = load_scenario(args.scenario)
    z = _read_heights(args.heights, sc.mesh.n) if args.heights else sc.initial_heights
    tol = args.tol if args.tol is not None else sc.solver.tolerance
    worst = 0.0
    for row in group_residuals(sc, z):
        flag = "ok" if row["max_residual"] < tol else "VIOLATED"
        worst = max(worst, row["max_residual"])
        print(f"{row['constraint']:<24} terms {row['terms']:>4}  max residual {_fmt(row['max_residual']):>20}  {flag}")
    print(f"max residual {_fmt(worst)} (tolerance {_fmt(tol)})")
    return 0


def _find_group(sc, key):
    kind, _, num = key.partition(":")
    norm = lambda s: s.replace("-", "").replace("_", "").lower()  # noqa: E731
    try:
        k = int(num)
    except ValueError:
        raise ValidationError(f"--constraint expects TYPE:N, got {key!r}") from None
    if not 1 <= k <= len(sc.constraints):
        raise ValidationError(f"--constraint {key}: scenario has {len(sc.constraints)} constraints")
    g = sc.constraints[k - 1]
    if norm(g.type) != norm(kind):
        raise ValidationError(f"--constraint {key}: constraint {k} is of type {g.type}")
    return k, g


def cmd_project(args) -> int:
    sc = load_scenario(args.scenario)
    z = _read_heights(args.heights, sc.mesh.n) if args.heights else sc.initial_heights.copy()
    k, g = _find_group(sc, args.constraint)
    results = []
    for spec in g.specs:
        term = spec_term(spec, sc.mesh, group_label(g, k))
        fp = list(term.footprint)
        before = z[fp].copy()
        z[fp] = term.kernel.apply(before, 1.0)
        results.append({"footprint": [i + 1 for i in fp], "input": before.tolist(),
                        "output": z[fp].tolist()})
    print(json.dumps({"constraint": group_label(g, k), "projections": results,
                      "heights": z.tolist()}))
    return 0


def cmd_generate(args) -> int:
    doc = presets.generate(args.preset, seed=args.seed)
    text = json.dumps(doc, indent=1) + "\n"
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gradeopt", description="Grading design by proximal splitting.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve a scenario and export the solution")
    s.add_argument("--scenario", required=True)
    s.add_argument("--method", choices=["dr", "cyclic", "parallel"])
    s.add_argument("--gamma", type=float)
    s.add_argument("--tol", type=float)
    s.add_argument("--max-iters", type=int)
    s.add_argument("--out")
    s.add_argument("--contour-interval", type=float, default=0.25)
    s.add_argument("--quiet", action="store_true")
    s.set_defaults(func=cmd_solve)

    c = sub.add_parser("check", help="report constraint residuals of a height vector")
    c.add_argument("--scenario", required=True)
    c.add_argument("--heights", help="JSON array or CSV with a z column (default: initial heights)")
    c.add_argument("--tol", type=float)
    c.set_defaults(func=cmd_check)

    j = sub.add_parser("project", help="apply one constraint's projection and print the result")
    j.add_argument("--scenario", required=True)
    j.add_argument("--constraint", required=True, help="TYPE:N with N the 1-based constraint index")
    j.add_argument("--heights")
    j.set_defaults(func=cmd_project)

    g = sub.add_parser("generate", help="write a synthetic preset scenario")
    g.add_argument("--preset", required=True, choices=presets.PRESETS)
    g.add_argument("--out")
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_generate)
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (GradeOptError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
