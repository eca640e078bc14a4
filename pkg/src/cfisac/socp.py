"""Dense small-scale second-order cone programming.

Problems are linear objectives over constraints ||A x + b|| <= c.x + d plus
optional per-variable nonnegativity. Solved with CVXOPT's primal-dual
interior-point cone solver at tightened tolerances; solutions are checked
against the reported KKT residuals before being declared optimal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from cvxopt import matrix, solvers

__all__ = ["SocConstraint", "SocProblem", "SocSolution", "solve_socp",
           "dump_problem", "load_problem"]

# residual threshold for the "optimal" verdict
KKT_TOL = 1e-8

_SOLVER_OPTS = {
    "show_progress": False,
    "abstol": 1e-10,
    "reltol": 1e-10,
    "feastol": 1e-9,
    "maxiters": 200,
}

# fallbacks when the tight run breaks down numerically; the KKT residual gate
# below still decides whether the answer counts as optimal
_RELAXED_OPTS = (
    {"abstol": 1e-9, "reltol": 1e-9, "feastol": 1e-8},
    {"abstol": 1e-8, "reltol": 1e-8, "feastol": 1e-7, "refinement": 2},
)


@dataclass
class SocConstraint:
    """One cone ||A x + b|| <= c.x + d."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: float

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.atleast_1d(np.asarray(self.b, dtype=float))
        self.c = np.atleast_1d(np.asarray(self.c, dtype=float))
        self.d = float(self.d)
        if self.A.shape[0] != self.b.size:
            raise ValueError("cone rows mismatch between A and b")
        if self.A.shape[1] != self.c.size:
            raise ValueError("cone columns mismatch between A and c")

    def violation(self, x):
        return float(np.linalg.norm(self.A @ x + self.b) - (self.c @ x + self.d))


@dataclass
class SocProblem:
    """minimize obj.x  s.t.  cones, x[i] >= 0 where nonneg[i]."""

    objective: np.ndarray
    cones: list
    nonneg: np.ndarray = None

    def __post_init__(self):
        self.objective = np.atleast_1d(np.asarray(self.objective, dtype=float))
        n = self.objective.size
        if self.nonneg is None:
            self.nonneg = np.zeros(n, dtype=bool)
        self.nonneg = np.asarray(self.nonneg, dtype=bool)
        if self.nonneg.size != n:
            raise ValueError("nonneg mask size mismatch")
        for cone in self.cones:
            if cone.c.size != n:
                raise ValueError("cone dimension mismatch with objective")
        if not self.cones and not self.nonneg.any():
            raise ValueError("problem needs at least one constraint")

    @property
    def n(self):
        return self.objective.size


@dataclass
class SocSolution:
    status: str                      # optimal | infeasible | max_iter
    x: np.ndarray
    objective: float
    residuals: dict = field(default_factory=dict)
    iterations: int = 0


def _max_cone_violation(problem, x):
    scale = 1.0 + float(np.linalg.norm(x))
    v = 0.0
    for cone in problem.cones:
        v = max(v, cone.violation(x) / scale)
    if problem.nonneg.any():
        v = max(v, float(np.max(-x[problem.nonneg], initial=0.0)) / scale)
    return v


def solve_socp(problem: SocProblem) -> SocSolution:
    """Solve a SocProblem; deterministic for identical inputs."""
    n = problem.n
    c = matrix(problem.objective)

    Gl_rows = []
    for i in np.flatnonzero(problem.nonneg):
        row = np.zeros(n)
        row[i] = -1.0
        Gl_rows.append(row)
    Gl = matrix(np.asarray(Gl_rows).reshape(len(Gl_rows), n)) if Gl_rows else matrix(np.zeros((0, n)))
    hl = matrix(np.zeros(len(Gl_rows)))

    Gq, hq = [], []
    for cone in problem.cones:
        G = np.vstack([-cone.c[None, :], -cone.A])
        h = np.concatenate([[cone.d], cone.b])
        Gq.append(matrix(G))
        hq.append(matrix(h))

    old_opts = dict(solvers.options)
    sol, last_error = None, None
    try:
        for extra in ({},) + _RELAXED_OPTS:
            solvers.options.clear()
            solvers.options.update(old_opts)
            solvers.options.update(_SOLVER_OPTS)
            solvers.options.update(extra)
            try:
                sol = solvers.socp(c, Gl=Gl, hl=hl, Gq=Gq, hq=hq)
            except (ValueError, ArithmeticError, ZeroDivisionError) as exc:
                last_error = str(exc)
                continue
            if sol["status"] in ("optimal", "primal infeasible"):
                break
    finally:
        solvers.options.clear()
        solvers.options.update(old_opts)
    if sol is None:
        return SocSolution("max_iter", np.zeros(n), np.inf,
                           {"error": last_error or "solver failure"}, 0)

    iters = int(sol.get("iterations", 0))
    if sol["status"] == "primal infeasible":
        return SocSolution("infeasible", np.zeros(n), np.inf,
                           {"certificate_gap": float(sol.get("gap") or np.nan)}, iters)

    if sol["x"] is None:
        return SocSolution("max_iter", np.zeros(n), np.inf, {}, iters)

    x = np.asarray(sol["x"]).ravel()
    obj = float(problem.objective @ x)
    residuals = {
        "primal": max(float(sol.get("primal infeasibility") or 0.0),
                      _max_cone_violation(problem, x)),
        "dual": float(sol.get("dual infeasibility") or 0.0),
        "gap": float(sol.get("relative gap") or sol.get("gap") or 0.0),
    }
    ok = sol["status"] == "optimal" or all(
        np.isfinite(v) and v <= KKT_TOL for v in residuals.values()
    )
    if ok and max(residuals.values()) <= KKT_TOL:
        status = "optimal"
    elif sol["status"] == "dual infeasible":
        # unbounded below; surface as max_iter with a tag
        residuals["unbounded"] = 1.0
        status = "max_iter"
    else:
        status = "max_iter"
    return SocSolution(status, x, obj, residuals, iters)


# ---------------------------------------------------------------------------
# plain-text dump/load for regression fixtures
# ---------------------------------------------------------------------------

def dump_problem(problem: SocProblem, fh):
    """Write a problem in a line-oriented text format (see load_problem)."""
    close = False
    if isinstance(fh, str):
        fh, close = open(fh, "w"), True
    try:
        fh.write(f"n {problem.n}\n")
        fh.write("objective " + " ".join(f"{v:.17g}" for v in problem.objective) + "\n")
        fh.write("nonneg " + " ".join(str(int(v)) for v in problem.nonneg) + "\n")
        for cone in problem.cones:
            fh.write(f"cone {cone.A.shape[0]}\n")
            for row in cone.A:
                fh.write("A " + " ".join(f"{v:.17g}" for v in row) + "\n")
            fh.write("b " + " ".join(f"{v:.17g}" for v in cone.b) + "\n")
            fh.write("c " + " ".join(f"{v:.17g}" for v in cone.c) + "\n")
            fh.write(f"d {cone.d:.17g}\n")
    finally:
        if close:
            fh.close()


def load_problem(fh) -> SocProblem:
    """Read a problem written by dump_problem."""
    close = False
    if isinstance(fh, str):
        fh, close = open(fh), True
    try:
        lines = [ln.split() for ln in fh.read().splitlines() if ln.strip()]
    finally:
        if close:
            fh.close()
    it = iter(lines)
    tok = next(it)
    assert tok[0] == "n"
    tok = next(it)
    objective = np.array([float(v) for v in tok[1:]])
    tok = next(it)
    nonneg = np.array([bool(int(v)) for v in tok[1:]])
    cones = []
    for tok in it:
        if tok[0] == "cone":
            rows = int(tok[1])
            A = np.array([[float(v) for v in next(it)[1:]] for _ in range(rows)])
            b = np.array([float(v) for v in next(it)[1:]])
            cvec = np.array([float(v) for v in next(it)[1:]])
            d = float(next(it)[1])
            cones.append(SocConstraint(A.reshape(rows, objective.size), b, cvec, d))
    return SocProblem(objective, cones, nonneg)
