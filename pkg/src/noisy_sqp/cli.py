"""Command line entry point: solve / grid / profile / verify subcommands."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import verify as verify_mod
from .harness import (
    ExperimentConfig,
    VariantSpec,
    costs_to_tsv,
    performance_profile,
    profile_to_tsv,
    records_from_csv,
    run_grid,
    run_single,
)
from .problems import builtin_registry, get_problem
from .driver import SolverParams, solve
from .noise import NoiseSpec, derive_gradient_noise


def _build_parser():
    parser = argparse.ArgumentParser(prog="noisy-sqp")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run one problem once")
    p_solve.add_argument("--problem", required=True)
    p_solve.add_argument("--variant", choices=["ada", "ls"], required=True)
    p_solve.add_argument("--optimism", choices=["opt", "pes"], required=True)
    p_solve.add_argument("--eps-f", type=float, required=True)
    p_solve.add_argument("--eps-c", type=float, required=True)
    p_solve.add_argument("--seed", type=int, required=True)
    p_solve.add_argument("--exact", action="store_true")
    p_solve.add_argument("--kappa", type=float, default=1e-2)
    p_solve.add_argument("--duplicated", action="store_true")
    p_solve.add_argument("--max-iters", type=int, default=1000)
    p_solve.add_argument("--max-weighted-evals", type=int, default=10000)

    p_grid = sub.add_parser("grid", help="run an experiment grid from a config")
    p_grid.add_argument("--config", required=True)
    p_grid.add_argument("--out", required=True)

    p_prof = sub.add_parser("profile", help="performance profiles from a results CSV")
    p_prof.add_argument("--in", dest="infile", required=True)
    p_prof.add_argument("--cost", choices=["evals", "minres"], default="evals")
    p_prof.add_argument("--out", required=True)

    p_verify = sub.add_parser("verify", help="run the independent verification suite")
    p_verify.add_argument("--suite", default="all")
    p_verify.add_argument("--out", default=None)
    return parser


def _cmd_solve(args) -> int:
    variant = VariantSpec(
        scheme=args.variant, optimism=args.optimism,
        exactness="exact" if args.exact else "inexact", kappa=args.kappa)
    record = run_single(
        args.problem, variant, args.eps_f, args.eps_c, args.seed,
        "duplicated" if args.duplicated else "original",
        budgets=(args.max_iters, args.max_weighted_evals))
    print(f"problem            {record.problem}")
    print(f"status             {record.status}")
    print(f"iterations         {record.iters}")
    print(f"weighted evals     {record.weighted_evals}")
    print(f"minres iterations  {record.minres_iters}")
    print(f"cg iterations      {record.cg_iters}")
    print(f"best feasibility   {record.best_feas_err:.6e}")
    print(f"best stationarity  {record.best_stat_err:.6e}")
    print(f"best infeas. stat. {record.best_infeas_stat_err:.6e}")
    print(f"terminated early   {record.terminated_early}")
    print(f"solved             {record.solved}")
    return 0


def _cmd_grid(args) -> int:
    try:
        with open(args.config) as fh:
            config = ExperimentConfig.from_json(fh.read())
        config.out_dir = args.out
        records, path = run_grid(config)
    except (OSError, ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    solved = sum(1 for r in records if r.solved)
    print(f"{len(records)} runs -> {path} ({solved} solved)")
    return 0


def _cmd_profile(args) -> int:
    cost_field = {"evals": "weighted_evals", "minres": "minres_iters"}[args.cost]
    try:
        with open(args.infile) as fh:
            records = records_from_csv(fh.read())
    except OSError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    table = performance_profile(records, cost_field=cost_field)
    with open(args.out, "w") as fh:
        fh.write(profile_to_tsv(table))
    costs_path = os.path.splitext(args.out)[0] + ".costs.tsv"
    with open(costs_path, "w") as fh:
        fh.write(costs_to_tsv(table))
    print(f"profiles -> {args.out}; per-instance costs -> {costs_path}")
    return 0


def _cmd_verify(args) -> int:
    reports = []
    registry = builtin_registry()

    ok = True
    for problem in registry:
        grad_err, jac_err = verify_mod.fd_check(problem, problem.x0, 1e-6)
        good = grad_err <= 1e-5 and jac_err <= 1e-5
        ok &= good
        print(f"fd_check {problem.name:<20} grad {grad_err:.2e}  jac {jac_err:.2e}  "
              f"{'pass' if good else 'FAIL'}")

    quad = get_problem("quad-linear")
    report = verify_mod.cauchy_perturbation_scan(quad, quad.x0)
    reports.append(report)
    ok &= report.passed
    print(f"cauchy_perturbation_scan {'pass' if report.passed else 'FAIL'}")

    report = verify_mod.tangential_gap_scan(quad, np.zeros(quad.n))
    reports.append(report)
    ok &= report.passed
    print(f"tangential_gap_scan      {'pass' if report.passed else 'FAIL'}")

    eps_g, eps_J = derive_gradient_noise(1e-4, 1e-4)
    noise = NoiseSpec(eps_f=1e-4, eps_g=eps_g, eps_c=1e-4, eps_J=eps_J)
    params_list = [
        SolverParams.benchmark_defaults(noise, variant="adaptive", max_iters=60),
        SolverParams.benchmark_defaults(noise, variant="line_search", max_iters=60),
    ]
    sweep_problems = [p for p in registry if p.full_rank][:4]
    report = verify_mod.trace_invariant_sweep(
        sweep_problems, params_list, seeds=range(3), solve_fn=solve)
    reports.append(report)
    ok &= report.passed
    print(f"trace_invariant_sweep    {'pass' if report.passed else 'FAIL'}")

    if args.out:
        with open(args.out, "w") as fh:
            fh.write("[" + ",\n".join(r.to_json() for r in reports) + "]\n")
        print(f"reports -> {args.out}")
    return 0 if ok else 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    np.seterr(all="ignore")
    handlers = {
        "solve": _cmd_solve,
        "grid": _cmd_grid,
        "profile": _cmd_profile,
        "verify": _cmd_verify,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
