"""Exact problem definitions: interface, built-in registry, JSON quadratic format.

A problem is  min f(x)  s.t.  c(x) = 0  with analytic gradient and Jacobian.
The registry is a small self-contained suite (convex quadratics, circle
constraints, Rosenbrock-on-a-sphere, one built-in rank-deficient Jacobian)
standing in for an external test-set collection; every entry carries its
KKT point when that point is known in closed form.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .linalg import as_vector, smallest_singular_value


class DimensionMismatch(Exception):
    pass


class ParseError(Exception):
    """Problem file rejected; message names the offending field."""


@dataclass
class ExactEvaluation:
    f: float
    g: np.ndarray
    c: np.ndarray
    J: np.ndarray


@dataclass
class ProblemSpec:
    """An exact equality-constrained problem with dimensions and start point.

    ``eval_fn`` maps x to ExactEvaluation.  ``known_kkt`` is an optional
    (x_star, y_star) pair used by tests.  ``shared_noise_rows`` marks
    constraint rows that must receive identical noise draws (set by
    `duplicate_last_constraint`); ``full_rank`` tags whether the exact
    Jacobian has full row rank at the start point.
    """

    name: str
    n: int
    m: int
    x0: np.ndarray
    eval_fn: object
    known_kkt: tuple | None = None
    full_rank: bool = True
    shared_noise_rows: tuple = field(default_factory=tuple)
    H: np.ndarray | None = None  # preferred curvature matrix; identity when None

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError("need n >= 1 and m >= 1")
        self.x0 = as_vector(self.x0, "x0")
        if self.x0.size != self.n:
            raise DimensionMismatch(f"x0 has size {self.x0.size}, expected {self.n}")


def evaluate(problem: ProblemSpec, x) -> ExactEvaluation:
    """Exact (f, g, c, J) at x.  No counters; counting lives in the noisy oracle."""
    x = as_vector(x, "x")
    if x.size != problem.n:
        raise DimensionMismatch(f"x has size {x.size}, expected {problem.n}")
    ev = problem.eval_fn(x)
    g = np.asarray(ev.g, dtype=float)
    c = np.atleast_1d(np.asarray(ev.c, dtype=float))
    J = np.asarray(ev.J, dtype=float).reshape(problem.m, problem.n)
    if g.size != problem.n or c.size != problem.m:
        raise DimensionMismatch("eval returned inconsistent dimensions")
    return ExactEvaluation(float(ev.f), g, c, J)


def duplicate_last_constraint(problem: ProblemSpec) -> ProblemSpec:
    """Append a copy of the last constraint; feasible region is unchanged.

    The new row shares its noise draw with the row it copies, matching the
    protocol of duplicating the constraint after noise is added.
    """
    m_new = problem.m + 1
    inner = problem.eval_fn

    def eval_dup(x):
        ev = inner(x)
        c = np.atleast_1d(np.asarray(ev.c, dtype=float))
        J = np.asarray(ev.J, dtype=float).reshape(problem.m, problem.n)
        c2 = np.concatenate([c, c[-1:]])
        J2 = np.vstack([J, J[-1:, :]])
        return ExactEvaluation(ev.f, ev.g, c2, J2)

    shared = problem.shared_noise_rows + ((problem.m - 1, problem.m),)
    return ProblemSpec(
        name=problem.name + "+dup",
        n=problem.n,
        m=m_new,
        x0=problem.x0,
        eval_fn=eval_dup,
        known_kkt=None,
        full_rank=False,
        shared_noise_rows=shared,
        H=problem.H,
    )


def parse_problem_json(text) -> ProblemSpec:
    """Parse the on-disk quadratic problem format (extension ``.qp.json``).

    Fields: name, Q (n x n), q (n), A (m x n), b (m), x0 (n), defining
    f = 1/2 x'Qx + q'x and c = Ax - b.  Q is symmetrized as (Q + Q')/2.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    for fieldname in ("name", "Q", "q", "A", "b", "x0"):
        if fieldname not in data:
            raise ParseError(f"missing field '{fieldname}'")
    name = str(data["name"])
    try:
        Q = np.asarray(data["Q"], dtype=float)
        q = np.asarray(data["q"], dtype=float)
        A = np.asarray(data["A"], dtype=float)
        b = np.asarray(data["b"], dtype=float)
        x0 = np.asarray(data["x0"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"non-numeric entry: {exc}") from exc
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise DimensionMismatch(f"Q must be square, got {Q.shape}")
    n = Q.shape[0]
    if A.ndim != 2 or A.shape[1] != n:
        raise DimensionMismatch(f"A must be m x {n}, got {A.shape}")
    m = A.shape[0]
    if q.shape != (n,) or b.shape != (m,) or x0.shape != (n,):
        raise DimensionMismatch("q, b, or x0 has wrong length")
    Qs = 0.5 * (Q + Q.T)
    return _quadratic(name, Qs, q, A, b, x0)


def _quadratic(name, Q, q, A, b, x0, known_kkt="solve"):
    n = Q.shape[0]
    m = A.shape[0]

    def ev(x):
        return ExactEvaluation(
            f=0.5 * float(x @ Q @ x) + float(q @ x),
            g=Q @ x + q,
            c=A @ x - b,
            J=A,
        )

    if known_kkt == "solve":
        # equality-constrained QP: KKT point from one dense solve
        K = np.zeros((n + m, n + m))
        K[:n, :n] = Q
        K[:n, n:] = A.T
        K[n:, :n] = A
        try:
            z = np.linalg.solve(K, np.concatenate([-q, b]))
            known_kkt = (z[:n], z[n:])
        except np.linalg.LinAlgError:
            known_kkt = None
    full_rank = smallest_singular_value(A) > 1e-8
    return ProblemSpec(name, n, m, x0, ev, known_kkt=known_kkt, full_rank=full_rank)


def _unit_circle():
    def ev(x):
        return ExactEvaluation(
            f=x[0] + x[1],
            g=np.array([1.0, 1.0]),
            c=np.array([x[0] ** 2 + x[1] ** 2 - 1.0]),
            J=np.array([[2.0 * x[0], 2.0 * x[1]]]),
        )

    s = np.sqrt(2.0) / 2.0
    return ProblemSpec(
        "unit-circle", 2, 1, np.array([0.9, -0.3]), ev,
        known_kkt=(np.array([-s, -s]), np.array([s])),
    )


def _circle_shifted():
    # min 2 x1 - x2 on the radius-2 circle
    def ev(x):
        return ExactEvaluation(
            f=2.0 * x[0] - x[1],
            g=np.array([2.0, -1.0]),
            c=np.array([x[0] ** 2 + x[1] ** 2 - 4.0]),
            J=np.array([[2.0 * x[0], 2.0 * x[1]]]),
        )

    r5 = np.sqrt(5.0)
    return ProblemSpec(
        "circle-shifted", 2, 1, np.array([2.0, 0.5]), ev,
        known_kkt=(np.array([-4.0 / r5, 2.0 / r5]), np.array([r5 / 4.0])),
    )


def _parabola_ridge():
    # classic (1 - x1)^2 objective pinned to the parabola x2 = x1^2
    def ev(x):
        return ExactEvaluation(
            f=(1.0 - x[0]) ** 2,
            g=np.array([-2.0 * (1.0 - x[0]), 0.0]),
            c=np.array([10.0 * (x[1] - x[0] ** 2)]),
            J=np.array([[-20.0 * x[0], 10.0]]),
        )

    return ProblemSpec(
        "parabola-ridge", 2, 1, np.array([-1.2, 1.0]), ev,
        known_kkt=(np.array([1.0, 1.0]), np.array([0.0])),
    )


def _log_surface():
    # min log(1 + x1^2) - x2 on the quartic surface (1 + x1^2)^2 + x2^2 = 4
    def ev(x):
        t = 1.0 + x[0] ** 2
        return ExactEvaluation(
            f=np.log(t) - x[1],
            g=np.array([2.0 * x[0] / t, -1.0]),
            c=np.array([t ** 2 + x[1] ** 2 - 4.0]),
            J=np.array([[4.0 * x[0] * t, 2.0 * x[1]]]),
        )

    s3 = np.sqrt(3.0)
    return ProblemSpec(
        "log-surface", 2, 1, np.array([2.0, 2.0]), ev,
        known_kkt=(np.array([0.0, s3]), np.array([1.0 / (2.0 * s3)])),
    )


def _rosenbrock_sphere(n, name, x0):
    radius2 = float(n)

    def ev(x):
        d = x.size
        f = 0.0
        g = np.zeros(d)
        for i in range(d - 1):
            f += (1.0 - x[i]) ** 2 + 100.0 * (x[i + 1] - x[i] ** 2) ** 2
            g[i] += -2.0 * (1.0 - x[i]) - 400.0 * x[i] * (x[i + 1] - x[i] ** 2)
            g[i + 1] += 200.0 * (x[i + 1] - x[i] ** 2)
        return ExactEvaluation(
            f=f,
            g=g,
            c=np.array([float(x @ x) - radius2]),
            J=(2.0 * x).reshape(1, -1),
        )

    x0 = np.asarray(x0, dtype=float)
    # Gauss-Newton curvature at the start point; positive definite for the
    # chain, so it satisfies the null-space curvature requirement
    H = np.zeros((n, n))
    for i in range(n - 1):
        H[i, i] += 2.0
        J_row = np.zeros(n)
        J_row[i] = -20.0 * x0[i]
        J_row[i + 1] = 10.0
        H += 2.0 * np.outer(J_row, J_row)
    return ProblemSpec(
        name, n, 1, x0, ev,
        known_kkt=(np.ones(n), np.array([0.0])),
        H=H,
    )


def _sphere_dup():
    # built-in rank-deficient Jacobian: two identical sphere constraints
    def ev(x):
        row = (2.0 * x).reshape(1, -1)
        cval = float(x @ x) - 1.0
        return ExactEvaluation(
            f=x[0] + x[1] + x[2],
            g=np.ones(3),
            c=np.array([cval, cval]),
            J=np.vstack([row, row]),
        )

    s = 1.0 / np.sqrt(3.0)
    y = np.sqrt(3.0) / 4.0
    return ProblemSpec(
        "sphere-dup", 3, 2, np.array([0.9, 0.3, 0.3]), ev,
        known_kkt=(np.array([-s, -s, -s]), np.array([y, y])),
        full_rank=False,
        shared_noise_rows=((0, 1),),
    )


def builtin_registry() -> list[ProblemSpec]:
    """The built-in desk-scale suite; >= 8 problems, 2 <= n <= 20, 1 <= m < n."""
    probs = []

    A1 = np.array([[1.0, 1.0, 0.0, 0.0], [0.0, 1.0, 1.0, 2.0]])
    probs.append(_quadratic(
        "quad-linear", np.eye(4), np.zeros(4), A1, np.zeros(2),
        np.array([1.0, 1.0, 1.0, 1.0])))

    Q2 = np.diag([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
    q2 = np.array([1.0, 0.0, -1.0, 0.0, 1.0, 0.0])
    A2 = np.array([
        [1.0, 0.0, 1.0, 0.0, 1.0, 0.0],
        [0.0, 1.0, 0.0, 1.0, 0.0, 1.0],
    ])
    probs.append(_quadratic(
        "quad-ellipse", Q2, q2, A2, np.array([3.0, 0.0]),
        np.array([0.5, -0.5, 0.5, -0.5, 0.5, -0.5])))

    a3 = np.linspace(-1.0, 1.0, 10)
    A3 = np.zeros((3, 10))
    A3[0, :4] = 1.0
    A3[1, 3:7] = np.array([1.0, -1.0, 1.0, -1.0])
    A3[2, 6:] = np.array([0.5, 1.0, 1.5, 2.0])
    probs.append(_quadratic(
        "quad-linear-10", np.eye(10), -a3, A3, np.array([1.0, 0.0, 2.0]),
        np.zeros(10)))

    probs.append(_unit_circle())
    probs.append(_circle_shifted())
    probs.append(_parabola_ridge())
    probs.append(_log_surface())
    probs.append(_rosenbrock_sphere(2, "rosenbrock-sphere", [1.2, 0.8]))
    probs.append(_rosenbrock_sphere(4, "rosenbrock-sphere-4", [0.9, 1.1, 0.9, 1.1]))
    probs.append(_sphere_dup())
    return probs


def registry_by_name() -> dict:
    return {p.name: p for p in builtin_registry()}


def get_problem(name: str) -> ProblemSpec:
    """Look up a registry problem by name, or load a ``.qp.json`` file path."""
    table = registry_by_name()
    if name in table:
        return table[name]
    if name.endswith(".qp.json"):
        with open(name, "rb") as fh:
            return parse_problem_json(fh.read())
    raise KeyError(f"unknown problem {name!r}")
