"""Command-line entry point.

Exit codes: 0 success, 1 gate failure, 2 usage or configuration error,
3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import parse_config
from .errors import ConfigError, DistalError, ProblemError
from .experiment import run_experiment
from .generator import SHARED_KINDS, GeneratorParams, generate_random_problem
from .oracle import CACHE_ENV, cached_solution, solve_centralized
from .problem import validate_problem
from .problem_io import load_problem, save_problem

EXIT_OK, EXIT_GATE, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def _cmd_validate(args):
    spec = load_problem(args.problem)
    report = validate_problem(spec)
    print(json.dumps({"agents": spec.n, "edges": len(spec.edges), "n_s": spec.n_s,
                      "strong_convexity": list(report.strong_convexity),
                      "global_feasible": report.global_feasible}, indent=2))
    return EXIT_OK


def _cmd_oracle(args):
    spec = load_problem(args.problem)
    validate_problem(spec)
    if args.no_cache:
        sol = solve_centralized(spec, args.tol)
    else:
        sol = cached_solution(spec, args.tol, args.cache)
    print(json.dumps(sol.to_dict(), indent=2))
    return EXIT_OK


def _cmd_generate(args):
    params = GeneratorParams(n=args.agents, density=args.density, n_s=args.n_s,
                             curvature=(args.m_lo, args.m_hi), half_width=args.half_width,
                             shared_kind=args.shared_kind)
    spec = generate_random_problem(params, args.seed)
    save_problem(spec, args.out)
    print(f"wrote {args.out}: {spec.n} agents, {len(spec.edges)} edges")
    return EXIT_OK


def _cmd_run(args):
    cfg = parse_config(args.config)
    summary = run_experiment(cfg, args.out_dir, workers=args.workers, cache=args.cache)
    for r in summary.runs:
        status = r.error or f"{r.termination} after {r.iterations} iterations"
        print(f"run {r.index}: {status}")
    for k, mean, se, rhs, holds in summary.rate_rows:
        print(f"rate k={k}: lhs {mean:.4g} +/- {se:.2g}, rhs {rhs:.4g} "
              f"{'ok' if holds else 'VIOLATED'}")
    for name, ok in summary.gates.items():
        print(f"gate {name}: {'pass' if ok else 'FAIL'}")
    if summary.failures:
        return EXIT_RUNTIME
    if args.gate and not summary.gates_passed:
        return EXIT_GATE
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="distal",
                                description="Distributed augmented Lagrangian experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a problem file")
    v.add_argument("--problem", required=True)
    v.set_defaults(func=_cmd_validate)

    o = sub.add_parser("oracle", help="centralized saddle point of a problem file")
    o.add_argument("--problem", required=True)
    o.add_argument("--tol", type=float, default=1e-10)
    o.add_argument("--cache", default=None, help=f"cache directory (default ${CACHE_ENV})")
    o.add_argument("--no-cache", action="store_true")
    o.set_defaults(func=_cmd_oracle)

    g = sub.add_parser("generate", help="write a random problem file")
    g.add_argument("--agents", type=int, required=True)
    g.add_argument("--density", type=float, required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--n-s", type=int, default=1)
    g.add_argument("--m-lo", type=float, default=0.5)
    g.add_argument("--m-hi", type=float, default=2.0)
    g.add_argument("--half-width", type=float, default=5.0)
    g.add_argument("--shared-kind", choices=SHARED_KINDS, default="quadratic")
    g.set_defaults(func=_cmd_generate)

    r = sub.add_parser("run", help="run a Monte Carlo experiment")
    r.add_argument("--config", required=True)
    r.add_argument("--out-dir", required=True)
    r.add_argument("--gate", action="store_true", help="exit 1 when a gate fails")
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--cache", default=None, help=f"oracle cache directory (default ${CACHE_ENV})")
    r.set_defaults(func=_cmd_run)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, ProblemError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DistalError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
