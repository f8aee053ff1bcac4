"""Experiment runner: noise/variant grids, best-iterate selection, profiles, CSV.

Grid runs execute on a bounded worker pool and are re-sorted canonically
before anything is written, so identical configs produce byte-identical
CSV.  Floats serialize with 17 significant digits and round-trip exactly.
"""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .driver import EARLY_STATIONARY, SolverParams, solve
from .linalg import least_squares_multiplier, norm_inf
from .noise import NoiseSpec, derive_gradient_noise
from .problems import duplicate_last_constraint, get_problem

CSV_COLUMNS = [
    "problem", "variant", "optimism", "exactness", "eps_f", "eps_c", "seed",
    "licq_mode", "status", "iters", "weighted_evals", "minres_iters",
    "cg_iters", "best_feas_err", "best_stat_err", "best_infeas_stat_err",
    "terminated_early", "solved",
]

EARLY_STATUSES = (EARLY_STATIONARY, "early_infeasible_stationary")


@dataclass
class VariantSpec:
    scheme: str = "ada"            # ada | ls
    optimism: str = "opt"          # opt | pes
    exactness: str = "inexact"     # exact | inexact
    kappa: float = 1e-2

    @property
    def label(self) -> str:
        return f"{self.scheme}-{self.optimism}-{self.exactness}"

    def solver_params(self, noise: NoiseSpec, budgets) -> SolverParams:
        return SolverParams.benchmark_defaults(
            noise=noise,
            variant="adaptive" if self.scheme == "ada" else "line_search",
            optimism="optimistic" if self.optimism == "opt" else "pessimistic",
            exactness=self.exactness,
            kappa=self.kappa,
            max_iters=budgets[0],
            max_weighted_evals=budgets[1],
        )


@dataclass
class ExperimentConfig:
    problems: list
    noise_grid: list                      # list of (eps_f, eps_c)
    variants: list                        # list of VariantSpec
    seeds: list
    budgets: tuple = (1000, 10000)
    licq_mode: str = "original"           # original | duplicated
    out_dir: str = "."

    def validate(self):
        if not self.problems or not self.variants or not self.seeds:
            raise ValueError("problems, variants, and seeds must be non-empty")
        for eps_f, eps_c in self.noise_grid:
            if eps_f <= 0 or eps_c <= 0:
                raise ValueError("noise grid values must be positive")
        if self.licq_mode not in ("original", "duplicated"):
            raise ValueError(f"bad licq_mode {self.licq_mode!r}")
        return self

    @classmethod
    def from_json(cls, text: str):
        data = json.loads(text)
        variants = [VariantSpec(**v) for v in data["variants"]]
        return cls(
            problems=list(data["problems"]),
            noise_grid=[tuple(pair) for pair in data["noise_grid"]],
            variants=variants,
            seeds=list(data["seeds"]),
            budgets=tuple(data.get("budgets", (1000, 10000))),
            licq_mode=data.get("licq_mode", "original"),
            out_dir=data.get("out_dir", "."),
        ).validate()


@dataclass
class RunRecord:
    problem: str
    variant: str
    optimism: str
    exactness: str
    eps_f: float
    eps_c: float
    seed: int
    licq_mode: str
    status: str
    iters: int
    weighted_evals: int
    minres_iters: int
    cg_iters: int
    best_feas_err: float
    best_stat_err: float
    best_infeas_stat_err: float
    terminated_early: bool
    solved: bool

    def sort_key(self):
        return (self.problem, self.variant, self.optimism, self.exactness,
                self.eps_f, self.eps_c, self.seed, self.licq_mode)


def best_iterate(trace, eps_c: float, eps_f: float):
    """Pick the reported iterate from a trace per the benchmark rule.

    Among iterates with ||c||_inf <= 2 max{eps_c, eps_f} (exact snapshots,
    least-squares multipliers) the one with the lowest stationarity error
    wins; with no qualifying iterate, the lowest feasibility error wins.
    Iterates after an early termination never participate; ties break to
    the smallest index.
    """
    records = [r for r in trace.records if r.exact is not None]
    if not records:
        raise ValueError("trace has no exact snapshots")
    feas_gate = 2.0 * max(eps_c, eps_f)
    rows = []
    for idx, rec in enumerate(records):
        ex = rec.exact
        y = least_squares_multiplier(ex.J, ex.g)
        feas = norm_inf(ex.c)
        stat = norm_inf(ex.g + ex.J.T @ y)
        infeas_stat = norm_inf(ex.J.T @ ex.c)
        rows.append((idx, feas, stat, infeas_stat, norm_inf(y)))
    qualified = [row for row in rows if row[1] <= feas_gate]
    if qualified:
        best = min(qualified, key=lambda row: (row[2], row[0]))
    else:
        best = min(rows, key=lambda row: (row[1], row[0]))
    return best[0], best[1], best[2], best[3], best[4]


def success(feas_err: float, stat_err: float, y_inf_norm: float,
            eps: NoiseSpec) -> bool:
    """Approximate-stationarity criterion at the reported iterate."""
    return (feas_err <= 2.0 * max(eps.eps_c, eps.eps_f)
            and stat_err <= 2.0 * (eps.eps_g + y_inf_norm * eps.eps_J))


def run_single(problem_name: str, variant: VariantSpec, eps_f: float,
               eps_c: float, seed: int, licq_mode: str,
               budgets=(1000, 10000)) -> RunRecord:
    """One grid cell: solve, select the best iterate, summarize."""
    problem = get_problem(problem_name)
    if licq_mode == "duplicated":
        problem = duplicate_last_constraint(problem)
    eps_g, eps_J = derive_gradient_noise(eps_f, eps_c)
    noise = NoiseSpec(eps_f=eps_f, eps_g=eps_g, eps_c=eps_c, eps_J=eps_J)
    params = variant.solver_params(noise, budgets)
    trace = solve(problem, params, seed)
    if any(r.exact is not None for r in trace.records):
        _, feas, stat, infeas_stat, y_inf = best_iterate(trace, eps_c, eps_f)
    else:
        # budget exhausted before the first full iteration
        feas = stat = infeas_stat = float("inf")
        y_inf = 0.0
    terminated_early = trace.status in EARLY_STATUSES
    solved = (trace.status == EARLY_STATIONARY
              or success(feas, stat, y_inf, noise))
    return RunRecord(
        problem=problem_name, variant=variant.scheme, optimism=variant.optimism,
        exactness=variant.exactness, eps_f=eps_f, eps_c=eps_c, seed=seed,
        licq_mode=licq_mode, status=trace.status, iters=len(trace.records),
        weighted_evals=trace.counters.weighted_total,
        minres_iters=trace.minres_iters, cg_iters=trace.cg_iters,
        best_feas_err=feas, best_stat_err=stat,
        best_infeas_stat_err=infeas_stat, terminated_early=terminated_early,
        solved=solved)


def _run_cell(task):
    return run_single(*task)


def run_grid(config: ExperimentConfig, max_workers: int | None = None):
    """Run the full grid concurrently, write results.csv, return the records.

    One record per (problem x variant x noise x seed); per-run failures are
    recorded as statuses and never abort the grid.
    """
    config.validate()
    for name in config.problems:
        get_problem(name)  # unknown names are config errors, not run failures
    tasks = [
        (p, v, eps_f, eps_c, s, config.licq_mode, config.budgets)
        for p in config.problems
        for v in config.variants
        for (eps_f, eps_c) in config.noise_grid
        for s in config.seeds
    ]
    if max_workers is None:
        max_workers = min(os.cpu_count() or 1, 8)
    if max_workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            records = list(pool.map(_run_cell, tasks, chunksize=4))
    else:
        records = [_run_cell(t) for t in tasks]
    records.sort(key=RunRecord.sort_key)
    os.makedirs(config.out_dir, exist_ok=True)
    path = os.path.join(config.out_dir, "results.csv")
    with open(path, "w", newline="") as fh:
        fh.write(records_to_csv(records))
    return records, path


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def records_to_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        writer.writerow([_fmt(getattr(rec, col)) for col in CSV_COLUMNS])
    return buf.getvalue()


def records_from_csv(text: str):
    reader = csv.DictReader(io.StringIO(text))
    records = []
    for row in reader:
        records.append(RunRecord(
            problem=row["problem"], variant=row["variant"],
            optimism=row["optimism"], exactness=row["exactness"],
            eps_f=float(row["eps_f"]), eps_c=float(row["eps_c"]),
            seed=int(row["seed"]), licq_mode=row["licq_mode"],
            status=row["status"], iters=int(row["iters"]),
            weighted_evals=int(row["weighted_evals"]),
            minres_iters=int(row["minres_iters"]), cg_iters=int(row["cg_iters"]),
            best_feas_err=float(row["best_feas_err"]),
            best_stat_err=float(row["best_stat_err"]),
            best_infeas_stat_err=float(row["best_infeas_stat_err"]),
            terminated_early=row["terminated_early"] == "true",
            solved=row["solved"] == "true"))
    return records


@dataclass
class ProfileTable:
    """Dolan-More data: per-instance costs, ratios, and sampled rho curves."""

    solvers: list
    instances: list
    costs: dict            # (instance, solver) -> cost or None for failures
    ratios: dict           # (instance, solver) -> ratio (may be inf)
    tau_grid: np.ndarray
    curves: dict           # solver -> array of rho values on tau_grid

    def rho(self, solver: str, tau: float) -> float:
        hits = sum(1 for p in self.instances
                   if self.ratios[(p, solver)] <= tau)
        return hits / len(self.instances)


def performance_profile(records, cost_field: str = "weighted_evals",
                        n_grid: int = 64) -> ProfileTable:
    """Build Dolan-More performance profiles over the run records.

    Cost of a failed run is infinite; a solver's curve can never exceed its
    solved fraction.  Requires at least two solvers and one instance.
    """
    if cost_field not in ("weighted_evals", "minres_iters"):
        raise ValueError(f"bad cost_field {cost_field!r}")
    solvers = sorted({f"{r.variant}-{r.optimism}-{r.exactness}" for r in records})
    if len(solvers) < 2:
        raise ValueError("performance profile needs >= 2 solvers")
    instances = sorted({(r.problem, r.eps_f, r.eps_c, r.seed, r.licq_mode)
                        for r in records})
    if not instances:
        raise ValueError("performance profile needs >= 1 problem instance")

    costs = {}
    for r in records:
        solver = f"{r.variant}-{r.optimism}-{r.exactness}"
        inst = (r.problem, r.eps_f, r.eps_c, r.seed, r.licq_mode)
        costs[(inst, solver)] = float(getattr(r, cost_field)) if r.solved else None

    ratios = {}
    for inst in instances:
        finite = [costs.get((inst, s)) for s in solvers]
        finite = [c for c in finite if c is not None]
        best = min(finite) if finite else None
        for s in solvers:
            c = costs.get((inst, s))
            if c is None or best is None:
                ratios[(inst, s)] = np.inf
            else:
                ratios[(inst, s)] = c / best if best > 0 else 1.0

    finite_ratios = [r for r in ratios.values() if np.isfinite(r)]
    r_max = max(finite_ratios) if finite_ratios else 1.0
    r_max = max(r_max, 1.0 + 1e-12)
    tau_grid = np.geomspace(1.0, r_max, n_grid)
    curves = {}
    for s in solvers:
        vals = np.array(sorted(ratios[(inst, s)] for inst in instances))
        curves[s] = np.searchsorted(vals, tau_grid, side="right") / len(instances)
    return ProfileTable(solvers=solvers, instances=instances, costs=costs,
                        ratios=ratios, tau_grid=tau_grid, curves=curves)


def profile_to_tsv(table: ProfileTable) -> str:
    """Plot-ready rho curves: one tau column plus one column per solver."""
    lines = ["\t".join(["tau"] + table.solvers)]
    for i, tau in enumerate(table.tau_grid):
        row = [format(float(tau), ".17g")]
        row += [format(float(table.curves[s][i]), ".17g") for s in table.solvers]
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"


def costs_to_tsv(table: ProfileTable) -> str:
    """Per-instance cost table; failures serialize as empty cells, not sentinels."""
    lines = ["\t".join(["instance"] + table.solvers)]
    for inst in table.instances:
        label = "|".join(str(part) for part in inst)
        row = [label]
        for s in table.solvers:
            c = table.costs.get((inst, s))
            row.append("" if c is None else format(c, ".17g"))
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"
