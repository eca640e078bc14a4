"""Power allocation: feasible-point-pursuit SCA over SOCP subproblems.

Minimizes total transmit power (equivalently maximizes energy efficiency)
subject to per-UE URLLC SINR constraints, per-AP power constraints and, in
the sensing-aware modes, a minimum multistatic sensing SINR. The nonconvex
sensing constraint is linearized around the previous iterate with a penalized
slack that must vanish for a feasible verdict.

Modes:
  SEURLLC_PLUS  dedicated sensing stream + sensing constraint
  SEURLLC       no sensing stream (rho_0 = 0), sensing constraint kept
  URLLC_ONLY    no sensing stream, sensing constraint dropped
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import urllc
from .scenario import ConfigError, ScaParams
from .socp import SocConstraint, SocProblem, solve_socp
from .stats import CommStatistics, SensingQuadratics, comm_sinr, sensing_sinr

__all__ = ["AllocationMode", "PowerAllocation", "ConstraintReport",
           "build_subproblem", "fpp_sca", "verify_allocation",
           "default_initial_point"]

VERIFY_TOL = 1e-6   # relative margin tolerance for the feasibility verdict


class AllocationMode(str, enum.Enum):
    SEURLLC_PLUS = "seurllc_plus"
    SEURLLC = "seurllc"
    URLLC_ONLY = "urllc_only"

    @property
    def has_sensing_symbol(self):
        return self is AllocationMode.SEURLLC_PLUS

    @property
    def has_sensing_constraint(self):
        return self is not AllocationMode.URLLC_ONLY


@dataclass
class ConstraintReport:
    """Relative margins from an independent re-evaluation of all constraints."""

    comm_margins: np.ndarray
    dep_margins: np.ndarray
    power_margins: np.ndarray
    sensing_margin: float = None
    ok: bool = False
    worst_class: str = ""

    def classify(self):
        worst = ("comm", float(np.min(self.comm_margins, initial=np.inf)))
        for name, m in (("dep", float(np.min(self.dep_margins, initial=np.inf))),
                        ("power", float(np.min(self.power_margins, initial=np.inf))),
                        ("sensing", np.inf if self.sensing_margin is None
                         else self.sensing_margin)):
            if m < worst[1]:
                worst = (name, m)
        self.worst_class = worst[0]
        self.ok = worst[1] >= -VERIFY_TOL
        return self


@dataclass
class PowerAllocation:
    """Result of one FPP-SCA run. `rho` holds sqrt-powers, entry 0 = sensing."""

    rho: np.ndarray
    chi: float
    status: str                 # feasible | infeasible | max_iter
    mode: AllocationMode
    objective_trace: list = field(default_factory=list)
    iterations: int = 0
    report: ConstraintReport = None

    @property
    def p_total(self):
        return float(self.rho @ self.rho)

    def per_ap_power(self, stats: CommStatistics):
        return (self.rho ** 2) @ (stats.F ** 2).T


def _stream_indices(mode, n_ues):
    if mode.has_sensing_symbol:
        return np.arange(n_ues + 1)
    return np.arange(1, n_ues + 1)


def build_subproblem(stats: CommStatistics, quad: SensingQuadratics,
                     gamma_c, gamma_s, rho_prev, chi_active, mode,
                     p_tx, penalty) -> tuple:
    """Convex SOCP subproblem at the linearization point `rho_prev`.

    Variables are the sqrt-powers of the active streams, the norm epigraph t,
    and (while `chi_active`) the sensing slack. Returns (problem, layout)
    where layout maps variable roles to indices.
    """
    n = stats.n_ues
    gamma_c = np.asarray(gamma_c, dtype=float)
    streams = _stream_indices(mode, n)
    ns = streams.size
    with_chi = mode.has_sensing_constraint and chi_active
    dim = ns + 1 + (1 if with_chi else 0)
    i_t = ns
    i_chi = ns + 1 if with_chi else None

    obj = np.zeros(dim)
    obj[i_t] = 1.0
    if with_chi:
        obj[i_chi] = penalty

    nonneg = np.zeros(dim, dtype=bool)
    nonneg[:ns] = True
    if with_chi:
        nonneg[i_chi] = True

    cones = []

    # ||rho|| <= t
    A = np.zeros((ns, dim))
    A[:, :ns] = np.eye(ns)
    c = np.zeros(dim)
    c[i_t] = 1.0
    cones.append(SocConstraint(A, np.zeros(ns), c, 0.0))

    # per-UE URLLC SINR cones, normalized by the noise std for conditioning
    sigma = np.sqrt(stats.noise_power)
    for i in range(n):
        coef = stats.b[i] / (np.sqrt(gamma_c[i]) * sigma)
        if not np.isfinite(coef) or coef <= 0.0:
            raise ConfigError(f"SINR threshold for UE {i} is unattainably large")
        A = np.zeros((ns + 1, dim))
        A[:ns, :ns] = np.diag(stats.a[i, streams] / sigma)
        b = np.zeros(ns + 1)
        b[ns] = 1.0
        c = np.zeros(dim)
        c[np.flatnonzero(streams == i + 1)[0]] = coef
        cones.append(SocConstraint(A, b, c, 0.0))

    # per-AP power cones ||F_k rho|| <= sqrt(P_tx)
    for k in range(stats.F.shape[0]):
        A = np.zeros((ns, dim))
        A[:, :ns] = np.diag(stats.F[k, streams])
        cones.append(SocConstraint(A, np.zeros(ns), np.zeros(dim), np.sqrt(p_tx)))

    # linearized sensing constraint as a rotated-cone SOC; A, B are divided
    # by the noise floor so every term (and the slack) is order one
    if mode.has_sensing_constraint:
        rho_prev = np.asarray(rho_prev, dtype=float)
        nf = quad.noise_floor
        A_s = quad.A[np.ix_(streams, streams)].real / nf
        B_s = quad.B[np.ix_(streams, streams)].real / nf
        rp = rho_prev[streams]
        g = 2.0 * (A_s @ rp)
        u = -gamma_s - float(rp @ A_s @ rp)
        # gamma_s rho^T B rho <= u + g.rho (+ chi)
        w_mat, V = np.linalg.eigh((B_s + B_s.T) / 2.0)
        B_sqrt = (V * np.sqrt(np.clip(w_mat, 0.0, None))) @ V.T
        rows = np.zeros((ns + 1, dim))
        rows[:ns, :ns] = 2.0 * np.sqrt(gamma_s) * B_sqrt
        rows[ns, :ns] = -g
        b = np.zeros(ns + 1)
        b[ns] = 1.0 - u
        c = np.zeros(dim)
        c[:ns] = g
        if with_chi:
            rows[ns, i_chi] = -1.0
            c[i_chi] = 1.0
        cones.append(SocConstraint(rows, b, c, 1.0 + u))

    layout = {"streams": streams, "t": i_t, "chi": i_chi, "dim": dim}
    return SocProblem(obj, cones, nonneg), layout


def default_initial_point(stats: CommStatistics, mode, p_tx):
    """Strictly positive start: 50% of the tightest AP budget, equal split."""
    streams = _stream_indices(mode, stats.n_ues)
    per_ap = (stats.F[:, streams] ** 2).sum(axis=1)
    power = 0.5 * p_tx / float(np.max(per_ap))
    rho = np.zeros(stats.n_ues + 1)
    rho[streams] = np.sqrt(power)
    return rho


def fpp_sca(stats: CommStatistics, quad: SensingQuadratics,
            targets: urllc.UrllcTargets, mode: AllocationMode,
            gamma_s, p_tx, sca: ScaParams, rho0=None) -> PowerAllocation:
    """Run the SCA loop until the objective stalls or iterations run out.

    A run is feasible only when the sensing slack has been driven to zero and
    an independent re-evaluation of every constraint passes.
    """
    mode = AllocationMode(mode)
    n = stats.n_ues
    gamma_c = targets.gamma_c()
    rho_prev = np.asarray(rho0, dtype=float) if rho0 is not None \
        else default_initial_point(stats, mode, p_tx)
    streams = _stream_indices(mode, n)

    chi_active = mode.has_sensing_constraint
    chi = np.inf if chi_active else 0.0
    f_prev = np.inf
    trace = []
    solver_status = None
    rho_full = np.zeros(n + 1)
    iterations = 0

    for _ in range(sca.max_iterations):
        problem, layout = build_subproblem(stats, quad, gamma_c, gamma_s,
                                           rho_prev, chi_active, mode,
                                           p_tx, sca.penalty)
        sol = solve_socp(problem)
        if sol.status != "optimal":
            solver_status = "infeasible" if sol.status == "infeasible" else "max_iter"
            break
        iterations += 1
        rho_s = np.clip(sol.x[:streams.size], 0.0, None)
        chi = float(sol.x[layout["chi"]]) if layout["chi"] is not None else 0.0
        f = float(np.linalg.norm(rho_s)) + sca.penalty * chi
        trace.append(f)
        rho_full = np.zeros(n + 1)
        rho_full[streams] = rho_s
        rho_prev = rho_full
        if chi_active and chi < sca.epsilon_chi:
            chi_active = False
            chi = 0.0
        if abs(f - f_prev) <= sca.epsilon:
            break
        f_prev = f
    else:
        solver_status = solver_status or "max_iter"

    alloc = PowerAllocation(rho_full, chi, "", mode, trace, iterations)
    if iterations == 0:
        # no iterate to fall back on; classify the initial point for the
        # infeasibility breakdown but keep the solver's verdict
        alloc.status = "infeasible" if solver_status == "infeasible" else "max_iter"
        alloc.report = verify_allocation(rho_prev, stats, quad, targets, mode,
                                         gamma_s, p_tx)
        return alloc

    # the verdict rests on a solver-free re-check of the last iterate, so a
    # late subproblem failure cannot flip a point that actually satisfies
    # every constraint
    report = verify_allocation(rho_full, stats, quad, targets, mode, gamma_s, p_tx)
    alloc.report = report
    if report.ok:
        alloc.status = "feasible"
    elif solver_status == "max_iter":
        alloc.status = "max_iter"
    else:
        alloc.status = "infeasible"
    return alloc


def verify_allocation(rho, stats: CommStatistics, quad: SensingQuadratics,
                      targets: urllc.UrllcTargets, mode, gamma_s,
                      p_tx) -> ConstraintReport:
    """Re-evaluate every constraint from first principles, solver-free.

    Checks the hardening SINR against the per-UE thresholds, the DEP bound
    chain against the DEP thresholds, the sensing SINR (when the mode requires
    it), and the per-AP powers. Margins are relative.
    """
    mode = AllocationMode(mode)
    rho = np.asarray(rho, dtype=float)
    n = stats.n_ues
    gamma_c = targets.gamma_c()

    sinrs = np.array([comm_sinr(rho, stats, i) for i in range(n)])
    comm_margins = (sinrs - gamma_c) / gamma_c

    eps_ub = np.array([urllc.dep_upper_bound(sinrs[i], targets.blocklength,
                                             targets.pilot_len, targets.bits[i])
                       for i in range(n)])
    dep_margins = (targets.eps_th - eps_ub) / targets.eps_th

    p_k = (rho ** 2) @ (stats.F ** 2).T
    power_margins = (p_tx - p_k) / p_tx

    sensing_margin = None
    if mode.has_sensing_constraint:
        sensing_margin = (sensing_sinr(rho, quad) - gamma_s) / gamma_s

    return ConstraintReport(comm_margins, dep_margins, power_margins,
                            sensing_margin).classify()
