"""Main solver loop with the optimistic feasibility gate and both early exits.

One call to `solve` runs the full iteration: sample the noisy oracle, pick
the branch on ||c_bar|| <= eps_o, build the step bundle under the matching
termination test, update the merit parameter, choose the step size with the
configured controller, and advance.  Exact ground-truth snapshots are
recorded next to every noisy sample for post-hoc error measurement; they
never feed the solver path.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import merit, steps, stepsize
from .linalg import norm2, norm_inf
from .noise import NoiseSpec, NoisyOracle
from .problems import ProblemSpec, evaluate

BUDGET_ITERS = "budget_iters"
BUDGET_EVALS = "budget_evals"
EARLY_STATIONARY = "early_stationary"
EARLY_INFEASIBLE = "early_infeasible_stationary"
DEGENERATE = "degenerate_direction"
LINE_SEARCH_FAILURE = "line_search_failure"
TEST_UNSATISFIABLE = "test_unsatisfiable"

FEASIBLE_BRANCH = "feasible_branch"
INFEASIBLE_BRANCH = "infeasible_branch"

ADAPTIVE = "adaptive"
LINE_SEARCH = "line_search"


@dataclass
class AdaptiveSeeds:
    """Initial values and meta-parameters for the Option I controller."""

    beta: float = 1.0
    eta: float = 0.5
    theta: float = 1e4
    chi0: float = 1e-3
    zeta0: float = 1e3
    xi0: float = 1.0
    sigma_chi: float = 0.1
    sigma_zeta: float = 0.1
    sigma_xi: float = 0.1
    lipschitz_dirs: int = 10
    lipschitz_delta: float = 1e-2
    lipschitz_floor: float = 1e-4


@dataclass
class SolverParams:
    """Everything `solve` needs besides the problem and the seed.

    ``benchmark_defaults`` loads the benchmark preset: tau0 = 1, lambda_u = 5e-9,
    sigma_Jc = 1e2, sigma_u = 0.99, sigma_c = 0.1, sigma_r = 0.9999,
    sigma_tau = 1e-2, xi0 = 1, chi0 = 1e-3, zeta0 = 1e3, theta = 1e4,
    eta = 0.5 / beta = 1 (adaptive) or alpha_u = 1 / eta = 1e-3 / nu = 0.5
    (line search), kappa_u = kappa_v = 1e-2 when inexact.
    """

    noise: NoiseSpec = field(default_factory=NoiseSpec)
    variant: str = ADAPTIVE
    optimism: str = "optimistic"
    exactness: str = "inexact"
    kappa_u: float = 1e-2
    kappa_v: float = 1e-2
    tests: steps.TestParams = field(default_factory=steps.TestParams)
    tau0: float = 1.0
    sigma_tau: float = 1e-2
    adaptive: AdaptiveSeeds = field(default_factory=AdaptiveSeeds)
    ls: stepsize.LineSearchParams = field(default_factory=stepsize.LineSearchParams)
    max_iters: int = 1000
    max_weighted_evals: int = 10000
    tol_d: float = 1e-14
    tol_feas: float = 1e-12
    H: np.ndarray | None = None  # problem preference, then identity, when None

    def validate(self):
        if self.variant not in (ADAPTIVE, LINE_SEARCH):
            raise ValueError(f"bad variant {self.variant!r}")
        if self.optimism not in ("optimistic", "pessimistic"):
            raise ValueError(f"bad optimism {self.optimism!r}")
        if self.exactness not in ("exact", "inexact"):
            raise ValueError(f"bad exactness {self.exactness!r}")
        if self.tau0 <= 0:
            raise ValueError("tau0 must be > 0")
        if not 0.0 < self.sigma_tau < 1.0:
            raise ValueError("sigma_tau must be in (0,1)")
        if self.max_iters < 1 or self.max_weighted_evals < 1:
            raise ValueError("budgets must be positive")
        return self

    @classmethod
    def benchmark_defaults(cls, noise: NoiseSpec, variant: str = ADAPTIVE,
                       optimism: str = "optimistic", exactness: str = "inexact",
                       kappa: float = 1e-2, **overrides):
        params = cls(noise=noise, variant=variant, optimism=optimism,
                     exactness=exactness, kappa_u=kappa, kappa_v=kappa)
        for key, val in overrides.items():
            setattr(params, key, val)
        return params.validate()

    def resolved_eps_o(self) -> float:
        return self.noise.eps_c if self.optimism == "optimistic" else 0.0

    def hash(self) -> str:
        text = repr((self.noise, self.variant, self.optimism, self.exactness,
                     self.kappa_u, self.kappa_v, self.tests, self.tau0,
                     self.sigma_tau, self.adaptive, self.ls, self.max_iters,
                     self.max_weighted_evals, self.tol_d))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass
class IterRecord:
    """One loop iteration; alpha = 0 marks a terminal partial iteration."""

    k: int
    x: np.ndarray
    noisy: object
    exact: object
    bundle: steps.StepBundle | None
    tau_prev: float
    tau: float
    alpha: float
    branch: str
    counters_delta: tuple
    delta_l: float | None = None
    # adaptive controller snapshot
    chi: float | None = None
    zeta: float | None = None
    xi: float | None = None
    alpha_suff: float | None = None
    alpha_min: float | None = None
    alpha_max: float | None = None
    # line search snapshot (cached merit values used for acceptance)
    phi0: float | None = None
    phi_accept: float | None = None
    relax: float | None = None
    backtracks: int | None = None


@dataclass
class RunTrace:
    problem: str
    n: int
    m: int
    records: list
    status: str
    counters: object
    seed: int
    params_hash: str
    eps_o: float
    variant: str
    tau_history: list = field(default_factory=list)
    adaptive_state: stepsize.AdaptiveState | None = None

    @property
    def minres_iters(self) -> int:
        return sum(r.bundle.minres_iters for r in self.records if r.bundle is not None)

    @property
    def cg_iters(self) -> int:
        return sum(r.bundle.cg_iters for r in self.records if r.bundle is not None)


def handle_degenerate(d_norm_inf: float, tol_d: float) -> bool:
    """True when the assembled direction is numerically zero and the run must stop."""
    return d_norm_inf <= tol_d


def solve(problem: ProblemSpec, params: SolverParams, seed: int,
          oracle: NoisyOracle | None = None, record_exact: bool = True) -> RunTrace:
    """Run the solver on one problem; never raises for algorithmic outcomes.

    A caller-supplied oracle takes over noisy sampling (used by crafted
    fixtures); by default a fresh uniformly-perturbing oracle is seeded from
    ``seed``.  ``record_exact=False`` drops the ground-truth snapshots,
    which must not change the iterates.
    """
    params.validate()
    if oracle is None:
        oracle = NoisyOracle(problem, params.noise, np.random.default_rng(seed))
    eps_o = params.resolved_eps_o()
    # numerical meaning of "||c|| <= eps_o" at eps_o = 0: the branch gate gets
    # an absolute floor so machine-precision-feasible iterates take the
    # tangential-only branch instead of the infeasible-stationary exit
    branch_gate = max(eps_o, params.tol_feas)
    noise = params.noise
    exact_mode = params.exactness == "exact"
    n = problem.n
    H = params.H if params.H is not None else getattr(problem, "H", None)
    H = np.eye(n) if H is None else np.asarray(H, dtype=float)
    tau_state = merit.TauState(params.tau0)
    records: list[IterRecord] = []
    adapt = None
    if params.variant == ADAPTIVE:
        seeds = params.adaptive
        L, Gamma = stepsize.estimate_lipschitz(
            oracle, problem.x0, n_dirs=seeds.lipschitz_dirs,
            delta=seeds.lipschitz_delta, floor=seeds.lipschitz_floor)
        L, Gamma = stepsize.clamp_beta_admissible(
            L, Gamma, seeds.beta, seeds.eta, seeds.xi0, params.tau0)
        adapt = stepsize.AdaptiveState(
            chi=seeds.chi0, zeta=seeds.zeta0, xi=seeds.xi0, beta=seeds.beta,
            eta=seeds.eta, theta=seeds.theta, L_est=L, Gamma_est=Gamma,
            sigma_chi=seeds.sigma_chi, sigma_zeta=seeds.sigma_zeta,
            sigma_xi=seeds.sigma_xi)

    x = problem.x0.copy()
    status = None
    k = 0
    while True:
        if k >= params.max_iters:
            status = BUDGET_ITERS
            break
        if oracle.counters.weighted_total >= params.max_weighted_evals:
            status = BUDGET_EVALS
            break
        before = oracle.counters.snapshot()
        noisy = oracle.sample(x, want="both")
        exact = evaluate(problem, x) if record_exact else None
        tau_prev = tau_state.tau
        c_norm = norm2(noisy.c_bar)

        def make_record(bundle, tau, alpha, branch, **extra):
            after = oracle.counters.snapshot()
            return IterRecord(
                k=k, x=x.copy(), noisy=noisy, exact=exact, bundle=bundle,
                tau_prev=tau_prev, tau=tau, alpha=alpha, branch=branch,
                counters_delta=(after[0] - before[0], after[1] - before[1]),
                **extra)

        if c_norm <= branch_gate:
            branch = FEASIBLE_BRANCH
            v = np.zeros(n)
            tau_state.keep(k)
            try:
                bundle = steps.tangential_step(
                    H, noisy.J_bar, noisy.g_bar, v, noisy.c_bar, tau_prev,
                    params.tests, eps_o, params.kappa_u, noise.eps_f,
                    noise.eps_c, exact=exact_mode, feasible=True)
            except steps.TestUnsatisfiable:
                records.append(make_record(None, tau_prev, 0.0, branch))
                status = TEST_UNSATISFIABLE
                break
            tau_k = tau_prev
            delta_l = merit.model_reduction(
                tau_k, noisy.g_bar, noisy.c_bar, noisy.J_bar, bundle.d)
            if delta_l <= eps_o:
                records.append(make_record(bundle, tau_k, 0.0, branch, delta_l=delta_l))
                status = EARLY_STATIONARY
                break
        else:
            branch = INFEASIBLE_BRANCH
            if norm_inf(noisy.J_bar.T @ noisy.c_bar) <= steps.tol_Jc(noisy.c_bar):
                records.append(make_record(None, tau_prev, 0.0, branch))
                status = EARLY_INFEASIBLE
                break
            v, cg_iters = steps.normal_step(
                noisy.c_bar, noisy.J_bar, params.tests, params.kappa_v,
                noise.eps_f, noise.eps_c, exact=exact_mode)
            try:
                bundle = steps.tangential_step(
                    H, noisy.J_bar, noisy.g_bar, v, noisy.c_bar, tau_prev,
                    params.tests, eps_o, params.kappa_u, noise.eps_f,
                    noise.eps_c, exact=exact_mode, feasible=False)
            except steps.TestUnsatisfiable:
                records.append(make_record(None, tau_prev, 0.0, branch))
                status = TEST_UNSATISFIABLE
                break
            bundle.cg_iters = cg_iters
            outcome = bundle.fallback_case if bundle.test == steps.EXACT_FALLBACK else bundle.test
            if outcome in (steps.TT2_COND1, "cond1"):
                trial = merit.tau_trial(
                    noisy.g_bar, bundle.d, bundle.u, H, c_norm,
                    norm2(noisy.c_bar + noisy.J_bar @ bundle.v + bundle.r),
                    params.tests)
                merit.tau_update(tau_state, trial, params.sigma_tau, k)
            else:
                tau_state.keep(k)
            tau_k = tau_state.tau
            delta_l = merit.model_reduction(
                tau_k, noisy.g_bar, noisy.c_bar, noisy.J_bar, bundle.d)

        if handle_degenerate(norm_inf(bundle.d), params.tol_d):
            records.append(make_record(bundle, tau_k, 0.0, branch, delta_l=delta_l))
            status = DEGENERATE
            break

        if params.variant == ADAPTIVE:
            stepsize.update_chi_zeta(adapt, bundle.u, bundle.v, bundle.d, H)
            stepsize.xi_update(adapt, delta_l, tau_k, bundle.u, bundle.v, bundle.d)
            alpha, a_suff, a_min, a_max = stepsize.adaptive_alpha(
                adapt, delta_l, tau_k, bundle.u, bundle.v, bundle.d)
            records.append(make_record(
                bundle, tau_k, alpha, branch, delta_l=delta_l,
                chi=adapt.chi, zeta=adapt.zeta, xi=adapt.xi,
                alpha_suff=a_suff, alpha_min=a_min, alpha_max=a_max))
        else:
            phi0 = merit.merit_value(tau_k, noisy.f_bar, noisy.c_bar)
            relax = stepsize.epsilon_Ak(
                tau_k, noise.eps_f, noise.eps_c, noise.eps_g, noise.eps_J,
                params.ls.alpha_u, norm2(bundle.d))
            trial_values = []

            def merit_eval(a):
                trial = oracle.sample(x + a * bundle.d, want="value")
                val = merit.merit_value(tau_k, trial.f_bar, trial.c_bar)
                trial_values.append(val)
                return val

            try:
                alpha, backtracks = stepsize.line_search_alpha(
                    merit_eval, phi0, delta_l, relax, params.ls)
            except stepsize.BacktrackExhausted:
                records.append(make_record(
                    bundle, tau_k, 0.0, branch, delta_l=delta_l, phi0=phi0,
                    relax=relax, backtracks=params.ls.max_backtracks))
                status = LINE_SEARCH_FAILURE
                break
            records.append(make_record(
                bundle, tau_k, alpha, branch, delta_l=delta_l, phi0=phi0,
                phi_accept=trial_values[-1], relax=relax, backtracks=backtracks))

        x = x + alpha * bundle.d
        k += 1

    return RunTrace(
        problem=problem.name, n=problem.n, m=problem.m, records=records,
        status=status, counters=oracle.counters, seed=seed,
        params_hash=params.hash(), eps_o=eps_o, variant=params.variant,
        tau_history=list(tau_state.history), adaptive_state=adapt)
