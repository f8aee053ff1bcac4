"""Bounded-noise oracle over an exact problem, with evaluation counters.

Perturbations are uniform and scaled so the 2-norm (Frobenius for the
Jacobian) of each error stays within its bound:

    e_f ~ U(-eps_f, eps_f)                  e_g per component U(+-eps_g/sqrt(n))
    e_c per component U(+-eps_c/sqrt(m))    e_J per entry     U(+-eps_J/sqrt(mn))

Draws are fresh on every call (no caching at repeated points).  A value
request costs one function evaluation, a derivative request one gradient
evaluation; the weighted total counts gradients double.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problems import evaluate


@dataclass
class NoiseSpec:
    """Noise bounds; eps_o is the optimistic feasibility threshold in [0, eps_c].

    ``refresh`` controls whether repeated evaluation at the same point draws
    fresh noise (the default) or replays the first draw; ``duplicate_shares_noise``
    controls whether duplicated constraint rows copy the noise of the row
    they duplicate.
    """

    eps_f: float = 0.0
    eps_g: float = 0.0
    eps_c: float = 0.0
    eps_J: float = 0.0
    eps_o: float = 0.0
    refresh: bool = True
    duplicate_shares_noise: bool = True

    def __post_init__(self):
        for name in ("eps_f", "eps_g", "eps_c", "eps_J", "eps_o"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v < 0.0:
                raise ValueError(f"{name} must be finite and >= 0")
            setattr(self, name, v)
        if self.eps_o > self.eps_c:
            raise ValueError("eps_o must lie in [0, eps_c]")


def derive_gradient_noise(eps_f: float, eps_c: float):
    """Align derivative noise with the value noise: eps_g = sqrt(eps_f), eps_J = sqrt(eps_c)."""
    if eps_f < 0 or eps_c < 0:
        raise ValueError("noise levels must be >= 0")
    return float(np.sqrt(eps_f)), float(np.sqrt(eps_c))


@dataclass
class NoisyEvaluation:
    """One noisy oracle sample; unrequested parts are None."""

    f_bar: float | None
    g_bar: np.ndarray | None
    c_bar: np.ndarray | None
    J_bar: np.ndarray | None


@dataclass
class EvalCounters:
    function_evals: int = 0
    gradient_evals: int = 0

    @property
    def weighted_total(self) -> int:
        return self.function_evals + 2 * self.gradient_evals

    def snapshot(self):
        return (self.function_evals, self.gradient_evals)


class NoisyOracle:
    """Owns the rng and the counters for one run; not shared across runs."""

    def __init__(self, problem, spec: NoiseSpec, rng: np.random.Generator):
        self.problem = problem
        self.spec = spec
        self.rng = rng
        self.counters = EvalCounters()
        self._replay = {}  # (x bytes, part) -> draw, used when refresh is off

    def sample(self, x, want: str = "both") -> NoisyEvaluation:
        if want not in ("value", "derivative", "both"):
            raise ValueError(f"bad want {want!r}")
        exact = evaluate(self.problem, x)
        e_f, e_g, e_c, e_J = self._perturbations(exact, want)
        if not self.spec.refresh:
            e_f, e_g, e_c, e_J = self._replayed(x, want, (e_f, e_g, e_c, e_J))
        f_bar = g_bar = c_bar = J_bar = None
        if want in ("value", "both"):
            f_bar = exact.f + e_f
            c_bar = exact.c + e_c
            self.counters.function_evals += 1
        if want in ("derivative", "both"):
            g_bar = exact.g + e_g
            J_bar = exact.J + e_J
            self.counters.gradient_evals += 1
        return NoisyEvaluation(f_bar, g_bar, c_bar, J_bar)

    def _replayed(self, x, want, fresh):
        key = np.asarray(x, dtype=float).tobytes()
        e_f, e_g, e_c, e_J = fresh
        if want in ("value", "both"):
            e_f, e_c = self._replay.setdefault((key, "value"), (e_f, e_c))
        if want in ("derivative", "both"):
            e_g, e_J = self._replay.setdefault((key, "derivative"), (e_g, e_J))
        return e_f, e_g, e_c, e_J

    def _perturbations(self, exact, want):
        """Draw the uniform errors; override point for crafted test fixtures.

        Draw order is fixed (e_f, e_c, e_g, e_J) so streams are reproducible
        per seed.  Rows listed in the problem's shared_noise_rows receive the
        noise of the row they duplicate.
        """
        spec = self.spec
        n = self.problem.n
        m = self.problem.m
        shared = self.problem.shared_noise_rows if spec.duplicate_shares_noise else ()
        e_f = e_g = e_c = e_J = 0.0
        if want in ("value", "both"):
            e_f = float(self.rng.uniform(-spec.eps_f, spec.eps_f)) if spec.eps_f > 0 else 0.0
            if spec.eps_c > 0:
                a = spec.eps_c / np.sqrt(m)
                e_c = self.rng.uniform(-a, a, size=m)
                for src, dst in shared:
                    e_c[dst] = e_c[src]
            else:
                e_c = np.zeros(m)
        if want in ("derivative", "both"):
            if spec.eps_g > 0:
                a = spec.eps_g / np.sqrt(n)
                e_g = self.rng.uniform(-a, a, size=n)
            else:
                e_g = np.zeros(n)
            if spec.eps_J > 0:
                a = spec.eps_J / np.sqrt(m * n)
                e_J = self.rng.uniform(-a, a, size=(m, n))
                for src, dst in shared:
                    e_J[dst, :] = e_J[src, :]
            else:
                e_J = np.zeros((m, n))
        return e_f, e_g, e_c, e_J


def sample_noisy(problem, spec: NoiseSpec, x, rng: np.random.Generator,
                 want: str = "both", counters: EvalCounters | None = None) -> NoisyEvaluation:
    """One-shot draw with the same stream layout as NoisyOracle.sample."""
    oracle = NoisyOracle(problem, spec, rng)
    out = oracle.sample(x, want)
    if counters is not None:
        counters.function_evals += oracle.counters.function_evals
        counters.gradient_evals += oracle.counters.gradient_evals
    return out
