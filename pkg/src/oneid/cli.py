"""Command line entry point: ``oneid <subcommand>``."""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict
from typing import List, Optional

from .bounds import solve_lb_program, upper_bound_formula
from .core import InstanceError, RngStream, classify, load_instance
from .harness import (
    bracket_stats,
    concentration_check,
    lil_implication_check,
    load_config,
    loglog_inequality_check,
    maximal_inequality_check,
    run_experiment,
)

VIOLATION = 2


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.output:
        cfg.output = args.output
    if args.trials:
        cfg.trials = args.trials
    if args.seed is not None:
        cfg.base_seed = args.seed
    if args.emit_traces:
        cfg.emit_traces = True
    res = run_experiment(cfg, workers=args.workers)
    if not cfg.output:
        sys.stdout.write(res.csv_text)
    else:
        print(f"wrote {cfg.output}")
    return 0


def _fmt(x) -> str:
    if x is None:
        return "-"
    if isinstance(x, float):
        return "inf" if math.isinf(x) else f"{x:.6g}"
    return str(x)


def _cmd_bounds(args) -> int:
    inst = load_instance(args.instance)
    cls = classify(inst)
    out = {"class": cls.kind.value, "delta": args.delta}
    rows = []
    if cls.is_positive:
        lb = solve_lb_program(inst, args.delta, seed=args.seed, with_constant=args.with_constant)
        out["lower"] = asdict(lb)
        rows += [
            ("closed form", lb.closed_form),
            ("program value", lb.program_value),
            ("program argmin", ", ".join(f"{p:.4g}" for p in lb.argmin)),
            ("dual certificate", lb.dual_value),
            ("lagrangian at dual point", lb.lagrangian_value),
            ("solver converged", lb.converged),
            ("small-delta regime", lb.valid_regime),
        ]
        if args.with_constant:
            rows.append(("program value x 1/3200", lb.scaled()["program_value"]))
    ub = upper_bound_formula(inst, args.delta)
    out["upper"] = asdict(ub)
    rows.append((f"upper bound ({ub.kind})", ub.value))
    width = max(len(r[0]) for r in rows)
    for name, val in rows:
        print(f"{name:<{width}}  {_fmt(val)}")
    if cls.is_positive:
        print()
        print(f"{'j':>3}  {'ln(1/d)/D^2':>14}  {'H(j)':>12}  {'upper term':>12}")
        for j, (a, h) in lb.per_j_terms.items():
            print(f"{j:>3}  {a:>14.6g}  {h:>12.6g}  {_fmt(ub.per_j[j]):>12}")
    print(f"\nnote: {ub.note}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(out, fh, indent=2, default=str)
            fh.write("\n")
    return 0


def _cmd_bracket_stats(args) -> int:
    rows = bracket_stats(args.K, args.j, args.samples, RngStream(args.seed))
    bad = 0
    print(f"{'b':>3}  {'empirical':>10}  {'se':>9}  {'bound':>9}  {'exact':>9}")
    for r in rows:
        ok = r.empirical <= r.bound + 3 * r.se and (r.exact is None or r.exact <= r.bound)
        bad += not ok
        print(f"{r.b_tilde:>3}  {r.empirical:>10.5f}  {r.se:>9.2e}  {r.bound:>9.5f}  {_fmt(r.exact):>9}{'' if ok else '  VIOLATION'}")
    return VIOLATION if bad else 0


def _cmd_check_concentration(args) -> int:
    status = 0
    for i, d in enumerate(args.delta):
        rep = concentration_check(d, args.streams, args.horizon, RngStream(args.seed).substream(i))
        verdict = "ok" if rep.passed else "VIOLATION"
        print(f"delta={d:g} violations={rep.violations}/{rep.streams} fraction={rep.fraction:.4f} "
              f"se={rep.se:.4f} bound={rep.bound:.4f} {verdict}")
        status = status or (0 if rep.passed else VIOLATION)
    return status


def _cmd_check_lemmas(args) -> int:
    root = RngStream(args.seed)
    rows = maximal_inequality_check(rng=root.substream(0))
    worst = max(rows, key=lambda r: r.frequency - r.bound)
    max_ok = all(r.passed for r in rows)
    print(f"maximal inequality: {len(rows)} grid points, worst excess {worst.frequency - worst.bound:+.4f} "
          f"{'ok' if max_ok else 'VIOLATION'}")
    imp = lil_implication_check(args.samples, root.substream(1))
    print(f"threshold implication: {imp.premise_true} valid tuples, {imp.failures} failures "
          f"{'ok' if imp.passed else 'VIOLATION'}")
    ll = loglog_inequality_check(args.samples, root.substream(2))
    print(f"log-log inequality: {ll.premise_true} cases, {ll.failures} failures {'ok' if ll.passed else 'VIOLATION'}")
    conc = concentration_check(0.05, 2000, 4096, root.substream(3))
    print(f"anytime envelope: fraction {conc.fraction:.4f} vs bound {conc.bound:.4f} "
          f"{'ok' if conc.passed else 'VIOLATION'}")
    return 0 if (max_ok and imp.passed and ll.passed and conc.passed) else VIOLATION


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oneid", description="1-identification bandit toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser(
        "run",
        help="run a Monte Carlo experiment from a JSON config",
        description="Run every (algorithm, delta) cell of a JSON experiment config. The uniform-lil "
        "baseline splits delta as (6 delta / pi^2) / K per arm so its error guarantee is honest.",
    )
    r.add_argument("config")
    r.add_argument("-o", "--output", help="CSV path (JSON summary and records go next to it)")
    r.add_argument("--trials", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--emit-traces", action="store_true", help="also write one JSON trial record per line")
    r.set_defaults(func=_cmd_run)

    b = sub.add_parser("bounds", help="print lower and upper bound quantities for an instance")
    b.add_argument("instance")
    b.add_argument("--delta", type=float, default=0.01)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--with-constant", action="store_true", help="also show the program value times 1/3200")
    b.add_argument("--json", metavar="PATH", help="also write the reports as JSON")
    b.set_defaults(func=_cmd_bounds)

    s = sub.add_parser("bracket-stats", help="first-hit bracket tail probabilities vs their bound")
    s.add_argument("-K", type=int, required=True)
    s.add_argument("-j", type=int, required=True)
    s.add_argument("--samples", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=_cmd_bracket_stats)

    c = sub.add_parser("check-concentration", help="envelope violation frequency of Gaussian random walks")
    c.add_argument("--delta", type=float, nargs="+", default=[0.05, 0.2])
    c.add_argument("--streams", type=int, default=2000)
    c.add_argument("--horizon", type=int, default=4096)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=_cmd_check_concentration)

    L = sub.add_parser("check-lemmas", help="run the technical inequality checks")
    L.add_argument("--samples", type=int, default=10_000)
    L.add_argument("--seed", type=int, default=0)
    L.set_defaults(func=_cmd_check_lemmas)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InstanceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
