import numpy as np
import pytest

from noisy_sqp.driver import SolverParams, solve
from noisy_sqp.harness import (
    ExperimentConfig,
    RunRecord,
    VariantSpec,
    best_iterate,
    costs_to_tsv,
    performance_profile,
    profile_to_tsv,
    records_from_csv,
    records_to_csv,
    run_grid,
    run_single,
    success,
)
from noisy_sqp.noise import NoiseSpec, derive_gradient_noise
from noisy_sqp.problems import registry_by_name


def make_record(**kw):
    base = dict(problem="p", variant="ada", optimism="opt", exactness="inexact",
                eps_f=1e-2, eps_c=1e-2, seed=0, licq_mode="original",
                status="budget_iters", iters=10, weighted_evals=30,
                minres_iters=40, cg_iters=12, best_feas_err=0.0,
                best_stat_err=0.0, best_infeas_stat_err=0.0,
                terminated_early=False, solved=True)
    base.update(kw)
    return RunRecord(**base)


class TestBestIterateRule:
    """Rule-application checks on synthetic traces with hand-set errors."""

    def _fake_trace(self, rows):
        # rows: (feas, stat); J = [[1, 0]] and g = (0, stat) realize the
        # stationarity error exactly under least-squares multipliers
        from types import SimpleNamespace
        records = []
        for k, (feas, stat) in enumerate(rows):
            exact = SimpleNamespace(c=np.array([feas]),
                                    g=np.array([0.0, stat]),
                                    J=np.array([[1.0, 0.0]]))
            records.append(SimpleNamespace(k=k, exact=exact))
        return SimpleNamespace(records=records)

    def test_both_qualified_lowest_stationarity_wins(self):
        trace = self._fake_trace([(0.0, 0.5), (0.0, 0.2)])
        idx, feas, stat, _, _ = best_iterate(trace, 1e-1, 1e-1)
        assert idx == 1
        assert stat == pytest.approx(0.2)

    def test_none_qualified_lowest_feasibility_wins(self):
        trace = self._fake_trace([(3.0, 0.0), (1.0, 0.9)])
        idx, feas, stat, _, _ = best_iterate(trace, 1e-1, 1e-1)
        assert idx == 1
        assert feas == pytest.approx(1.0)

    def test_ties_break_to_smallest_index(self):
        trace = self._fake_trace([(0.0, 0.2), (0.0, 0.2)])
        idx, *_ = best_iterate(trace, 1e-1, 1e-1)
        assert idx == 0

    def test_zero_noise_converged_run_selects_final_iterate(self):
        # dense-KKT-oracle comparison: the converged run ends exactly at x*
        p = registry_by_name()["quad-linear"]
        params = SolverParams.benchmark_defaults(NoiseSpec(), variant="adaptive",
                                             exactness="exact", max_iters=100)
        trace = solve(p, params, 0)
        idx, feas, stat, _, _ = best_iterate(trace, 0.0, 0.0)
        assert idx == len(trace.records) - 1
        assert stat <= 1e-6
        x_star = np.asarray(p.known_kkt[0])
        assert np.max(np.abs(trace.records[idx].x - x_star)) <= 1e-8


class TestBestIterate:
    def _trace(self, eps=1e-1):
        p = registry_by_name()["unit-circle"]
        eps_g, eps_J = derive_gradient_noise(eps, eps)
        noise = NoiseSpec(eps_f=eps, eps_g=eps_g, eps_c=eps, eps_J=eps_J)
        params = SolverParams.benchmark_defaults(noise, variant="adaptive", max_iters=40)
        return solve(p, params, 0)

    def test_qualified_iterates_pick_min_stationarity(self):
        trace = self._trace()
        idx, feas, stat, infeas, y_inf = best_iterate(trace, 1e-1, 1e-1)
        gate = 2 * 1e-1
        # recompute the rule directly from the trace
        from noisy_sqp.linalg import least_squares_multiplier, norm_inf
        rows = []
        for i, r in enumerate(trace.records):
            y = least_squares_multiplier(r.exact.J, r.exact.g)
            rows.append((i, norm_inf(r.exact.c),
                         norm_inf(r.exact.g + r.exact.J.T @ y)))
        qualified = [row for row in rows if row[1] <= gate]
        want = min(qualified, key=lambda row: (row[2], row[0]))
        assert idx == want[0]
        assert stat == pytest.approx(want[2])

    def test_no_qualified_falls_back_to_feasibility(self):
        trace = self._trace()
        # impossible gate: nothing qualifies, the most feasible iterate wins
        idx, feas, stat, infeas, y_inf = best_iterate(trace, 0.0, 0.0)
        from noisy_sqp.linalg import norm_inf
        feas_all = [norm_inf(r.exact.c) for r in trace.records]
        assert feas == pytest.approx(min(feas_all))
        assert idx == int(np.argmin(feas_all))

    def test_never_selects_after_early_termination(self):
        # early-terminated traces end at the termination record by construction
        from noisy_sqp.problems import ExactEvaluation, ProblemSpec
        A = np.array([[1.0, 1.0]])

        def ev(x):
            return ExactEvaluation(f=0.5 * float(x @ x), g=x.copy(), c=A @ x, J=A)

        p = ProblemSpec("kkt-start", 2, 1, np.zeros(2), ev)
        noise = NoiseSpec(eps_f=1e-2, eps_g=1e-1, eps_c=1e-2, eps_J=1e-1)
        params = SolverParams.benchmark_defaults(
            noise, variant="adaptive", optimism="optimistic", exactness="exact")
        trace = solve(p, params, 0)
        assert trace.status == "early_stationary"
        idx, *_ = best_iterate(trace, 1e-2, 1e-2)
        assert idx <= trace.records[-1].k


class TestSuccess:
    def test_exact_kkt_zero_noise(self):
        assert success(0.0, 0.0, 0.0, NoiseSpec())

    def test_feasibility_violation(self):
        eps = NoiseSpec(eps_f=1e-1, eps_c=1e-1)
        assert not success(3e-1, 0.0, 0.0, eps)

    def test_stationarity_bound_with_multiplier_norm(self):
        eps = NoiseSpec(eps_g=0.1, eps_J=0.1)
        assert success(0.0, 0.25, 0.5, eps)
        assert not success(0.0, 0.35, 0.5, eps)


class TestRunGrid:
    def _config(self, out_dir):
        return ExperimentConfig(
            problems=["quad-linear", "unit-circle"],
            noise_grid=[(1e-2, 1e-2)],
            variants=[VariantSpec("ada", "opt"), VariantSpec("ls", "opt")],
            seeds=[0],
            budgets=(60, 2000),
            out_dir=str(out_dir),
        )

    def test_cardinality(self, tmp_path):
        records, path = run_grid(self._config(tmp_path), max_workers=1)
        assert len(records) == 2 * 2 * 1 * 1

    def test_byte_identical_reruns(self, tmp_path):
        _, path1 = run_grid(self._config(tmp_path / "a"), max_workers=1)
        _, path2 = run_grid(self._config(tmp_path / "b"), max_workers=2)
        assert open(path1, "rb").read() == open(path2, "rb").read()

    def test_csv_roundtrip_17_digits(self, tmp_path):
        records, path = run_grid(self._config(tmp_path), max_workers=1)
        text = open(path).read()
        parsed = records_from_csv(text)
        assert records_to_csv(parsed) == text
        assert parsed == records

    def test_run_single_smoke(self):
        rec = run_single("quad-linear", VariantSpec("ada", "opt"), 1e-2, 1e-2,
                         0, "original", budgets=(60, 2000))
        assert rec.solved
        assert rec.best_feas_err >= 0.0


class TestPerformanceProfile:
    def test_hand_computed_two_by_two(self):
        records = [
            make_record(problem="p1", variant="ada", weighted_evals=2),
            make_record(problem="p2", variant="ada", weighted_evals=4),
            make_record(problem="p1", variant="ls", weighted_evals=4),
            make_record(problem="p2", variant="ls", weighted_evals=2),
        ]
        table = performance_profile(records)
        a = "ada-opt-inexact"
        b = "ls-opt-inexact"
        assert table.rho(a, 1.0) == pytest.approx(0.5)
        assert table.rho(a, 2.0) == pytest.approx(1.0)
        assert table.rho(b, 1.0) == pytest.approx(0.5)
        assert table.rho(b, 2.0) == pytest.approx(1.0)

    def test_single_solver_rejected(self):
        with pytest.raises(ValueError):
            performance_profile([make_record()])

    def test_failure_caps_curve(self):
        records = [
            make_record(problem="p1", variant="ada", weighted_evals=2),
            make_record(problem="p2", variant="ada", weighted_evals=4),
            make_record(problem="p1", variant="ls", weighted_evals=4),
            make_record(problem="p2", variant="ls", weighted_evals=2, solved=False),
        ]
        table = performance_profile(records)
        assert table.rho("ls-opt-inexact", 1e9) <= 0.5

    def test_curves_monotone_and_bounded(self):
        rng = np.random.default_rng(3)
        records = []
        for prob in ("a", "b", "c"):
            for variant in ("ada", "ls"):
                records.append(make_record(
                    problem=prob, variant=variant,
                    weighted_evals=int(rng.integers(1, 50)),
                    solved=bool(rng.random() < 0.8)))
        table = performance_profile(records)
        for solver in table.solvers:
            curve = table.curves[solver]
            assert np.all(np.diff(curve) >= -1e-12)
            solved_frac = np.mean([1 if table.costs[(p, solver)] is not None else 0
                                   for p in table.instances])
            assert curve[-1] <= solved_frac + 1e-12

    def test_tsv_outputs(self):
        records = [
            make_record(problem="p1", variant="ada", weighted_evals=2),
            make_record(problem="p1", variant="ls", weighted_evals=4, solved=False),
            make_record(problem="p2", variant="ada", weighted_evals=3),
            make_record(problem="p2", variant="ls", weighted_evals=6),
        ]
        table = performance_profile(records)
        tsv = profile_to_tsv(table)
        assert tsv.startswith("tau\tada-opt-inexact\tls-opt-inexact\n")
        costs = costs_to_tsv(table)
        # failures serialize as empty cells, never sentinel floats
        line = [l for l in costs.splitlines() if l.startswith("p1")][0]
        assert line.split("\t")[2] == ""


class TestConfigJson:
    def test_from_json(self):
        text = """{
          "problems": ["unit-circle"],
          "noise_grid": [[0.01, 0.01]],
          "variants": [{"scheme": "ada", "optimism": "opt"}],
          "seeds": [0, 1],
          "budgets": [100, 1000],
          "licq_mode": "duplicated"
        }"""
        cfg = ExperimentConfig.from_json(text)
        assert cfg.licq_mode == "duplicated"
        assert cfg.variants[0].label == "ada-opt-inexact"

    def test_bad_noise_rejected(self):
        cfg = ExperimentConfig(problems=["unit-circle"], noise_grid=[(0.0, 1e-2)],
                               variants=[VariantSpec()], seeds=[0])
        with pytest.raises(ValueError):
            cfg.validate()
