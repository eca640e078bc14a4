"""Monte Carlo experiment driver: availability and energy-efficiency sweeps.

One trial = one UE drop plus one large-scale fading state. The per-trial
Monte Carlo statistics (hardening scalars, sensing quadratics) do not depend
on the swept quantities except through trivial rescalings, so each trial is
reduced once and then re-solved at every sweep point. Results are merged in
trial order, which keeps CSV output byte-identical for a fixed seed.
"""

from __future__ import annotations

import concurrent.futures
from collections import Counter
from dataclasses import dataclass, field, replace

import numpy as np

from . import urllc
from .allocator import AllocationMode, fpp_sca
from .precoding import DegenerateProjectionError
from .propagation import channel_statistics
from .scenario import ConfigError, Scenario, substream
from .stats import (comm_stats, scale_to_data_len, sensing_matrices,
                    sensing_sinr)

__all__ = ["TrialData", "SweepGrid", "PointSummary", "AvailabilityReport",
           "trial_statistics", "solve_point", "run_availability",
           "run_ee_sweep", "wilson_interval", "write_table",
           "availability_rows", "record_rows", "RECORD_FIELDS"]

_Z95 = 1.959963984540054        # two-sided 95% normal quantile

FAILURE_CLASSES = ("comm", "dep", "sensing", "power", "delay", "solver")

RECORD_FIELDS = ("trial", "mode", "L", "gamma_s_db", "eps_th", "status",
                 "p_total", "ee", "sensing_sinr", "iterations", "worst_class")


@dataclass
class TrialData:
    """Reduced statistics of one trial, reusable across sweep points."""

    trial: int
    stats: object               # CommStatistics
    quad: object                # SensingQuadratics at the config data length


@dataclass(frozen=True)
class SweepGrid:
    """One swept variable: 'L', 'gamma_s_db', or 'eps'."""

    var: str
    values: tuple

    def __post_init__(self):
        if self.var not in ("L", "gamma_s_db", "eps"):
            raise ConfigError(f"unknown sweep variable {self.var!r}")
        if len(self.values) == 0:
            raise ConfigError("sweep grid is empty")


@dataclass
class PointSummary:
    availability: float
    n_trials: int
    wilson_low: float
    wilson_high: float
    mean_ee: float              # over feasible trials, nan if none
    mean_p_total: float
    breakdown: Counter = field(default_factory=Counter)


@dataclass
class AvailabilityReport:
    sweep_var: str
    values: tuple
    modes: tuple
    n_trials: int
    points: dict                # (mode_value, sweep_value) -> PointSummary
    records: list               # per-trial per-point dicts with RECORD_FIELDS


def wilson_interval(k, n, z=_Z95):
    """Wilson 95% score interval for k successes in n trials."""
    if n <= 0:
        raise ValueError("n must be positive")
    p = k / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2.0 * n)) / denom
    half = z * np.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom
    return max(center - half, 0.0), min(center + half, 1.0)


def trial_statistics(scenario: Scenario, trial: int) -> TrialData:
    """Reduce one trial to deterministic optimizer inputs."""
    cfg = scenario.config
    chan = channel_statistics(scenario, trial)
    rng = substream(cfg.rng_seed, "fading", trial)
    stats, W = comm_stats(cfg, chan, cfg.mc_inner, rng, return_precoders=True)
    quad = sensing_matrices(W, chan, cfg.data_len, cfg.noise_power,
                            mode="expected")
    return TrialData(trial, stats, quad)


def _targets(cfg, L, eps):
    return urllc.UrllcTargets(
        bits=np.full(cfg.n_ues, cfg.packet_bits),
        eps_th=np.full(cfg.n_ues, eps),
        delay_th=np.full(cfg.n_ues, cfg.delay_threshold),
        blocklength=int(L), pilot_len=cfg.pilot_len, bandwidth=cfg.bandwidth)


def solve_point(cfg, data: TrialData, mode, L, gamma_s_db, eps) -> dict:
    """Run the allocator for one (trial, mode, sweep point); never raises."""
    mode = AllocationMode(mode)
    rec = {"trial": data.trial, "mode": mode.value, "L": int(L),
           "gamma_s_db": float(gamma_s_db), "eps_th": float(eps),
           "status": "infeasible", "p_total": float("nan"),
           "ee": float("nan"), "sensing_sinr": float("nan"),
           "iterations": 0, "worst_class": ""}
    try:
        targets = _targets(cfg, L, eps)
    except ValueError:
        rec["worst_class"] = "dep"
        return rec
    if L > urllc.max_blocklength(targets):
        rec["worst_class"] = "delay"
        return rec
    quad = scale_to_data_len(data.quad, int(L) - cfg.pilot_len)
    gamma_s = 10.0 ** (gamma_s_db / 10.0)
    try:
        alloc = fpp_sca(data.stats, quad, targets, mode, gamma_s,
                        cfg.max_ap_power, cfg.sca)
    except ConfigError:
        rec["worst_class"] = "comm"
        return rec
    rec["status"] = alloc.status
    rec["iterations"] = alloc.iterations
    if alloc.status == "max_iter":
        rec["worst_class"] = "solver"
        return rec
    if alloc.status == "infeasible":
        rec["worst_class"] = alloc.report.worst_class if alloc.report else "solver"
        return rec
    rec["p_total"] = alloc.p_total
    rec["ee"] = urllc.energy_efficiency(alloc.rho, targets)
    rec["sensing_sinr"] = sensing_sinr(alloc.rho, quad)
    rec["worst_class"] = ""
    return rec


def _sweep_points(cfg, sweep: SweepGrid):
    """(L, gamma_s_db, eps) triples with non-swept values from the config."""
    base = (cfg.blocklength, cfg.sensing_sinr_threshold_db, cfg.dep_threshold)
    out = []
    for v in sweep.values:
        L, gs, eps = base
        if sweep.var == "L":
            L = int(v)
        elif sweep.var == "gamma_s_db":
            gs = float(v)
        else:
            eps = float(v)
        out.append((L, gs, eps))
    return out


def _run_trial(scenario, modes, points, trial):
    """All records of one trial (worker task)."""
    cfg = scenario.config
    try:
        data = trial_statistics(scenario, trial)
    except DegenerateProjectionError:
        recs = []
        for mode in modes:
            for L, gs, eps in points:
                recs.append({"trial": trial, "mode": AllocationMode(mode).value,
                             "L": int(L), "gamma_s_db": float(gs),
                             "eps_th": float(eps), "status": "infeasible",
                             "p_total": float("nan"), "ee": float("nan"),
                             "sensing_sinr": float("nan"), "iterations": 0,
                             "worst_class": "solver"})
        return recs
    recs = []
    for mode in modes:
        for L, gs, eps in points:
            recs.append(solve_point(cfg, data, mode, L, gs, eps))
    return recs


def run_availability(scenario: Scenario, modes, sweep: SweepGrid, n_trials,
                     workers=1) -> AvailabilityReport:
    """Monte Carlo network availability over a sweep grid.

    Per trial: redraw UE positions, shadowing and correlation state, reduce,
    and solve every (mode, sweep point). Deterministic per seed; workers only
    change wall time, never the output.
    """
    if n_trials < 20:
        raise ValueError("need at least 20 trials")
    modes = tuple(AllocationMode(m) for m in modes)
    points = _sweep_points(scenario.config, sweep)

    if workers and workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_trial,
                                   [scenario] * n_trials,
                                   [modes] * n_trials,
                                   [points] * n_trials,
                                   range(n_trials)))
    else:
        chunks = [_run_trial(scenario, modes, points, t) for t in range(n_trials)]
    records = [rec for chunk in chunks for rec in chunk]

    summaries = {}
    for mode in modes:
        for value, (L, gs, eps) in zip(sweep.values, points):
            sel = [r for r in records
                   if r["mode"] == mode.value and r["L"] == L
                   and r["gamma_s_db"] == gs and r["eps_th"] == eps]
            feas = [r for r in sel if r["status"] == "feasible"]
            k, n = len(feas), len(sel)
            lo, hi = wilson_interval(k, n)
            breakdown = Counter(r["worst_class"] for r in sel
                                if r["status"] != "feasible")
            mean_ee = float(np.mean([r["ee"] for r in feas])) if feas else float("nan")
            mean_p = float(np.mean([r["p_total"] for r in feas])) if feas else float("nan")
            summaries[(mode.value, value)] = PointSummary(k / n, n, lo, hi,
                                                          mean_ee, mean_p,
                                                          breakdown)
    return AvailabilityReport(sweep.var, tuple(sweep.values),
                              tuple(m.value for m in modes), n_trials,
                              summaries, records)


def run_ee_sweep(scenario: Scenario, modes, L_values, gamma_s_db_values,
                 n_trials, workers=1):
    """Mean EE / power over feasible trials per (mode, L, gamma_s).

    Returns (rows, records); rows are plot-ready dicts, one per table line.
    """
    if len(L_values) == 0 or len(gamma_s_db_values) == 0:
        raise ValueError("grids must be nonempty")
    rows, records = [], []
    for gs in gamma_s_db_values:
        cfg = scenario.config
        sub = Scenario(replace(cfg, sensing_sinr_threshold_db=float(gs)),
                       scenario.geometry)
        rep = run_availability(sub, modes, SweepGrid("L", tuple(int(v) for v in L_values)),
                               n_trials, workers)
        records.extend(rep.records)
        for mode in rep.modes:
            for L in rep.values:
                s = rep.points[(mode, L)]
                feas_p = [r["p_total"] for r in rep.records
                          if r["mode"] == mode and r["L"] == L
                          and r["status"] == "feasible"]
                rows.append({"mode": mode, "L": int(L), "gamma_s_db": float(gs),
                             "availability": s.availability,
                             "mean_ee": s.mean_ee, "mean_p_total": s.mean_p_total,
                             "median_p_total": float(np.median(feas_p))
                             if feas_p else float("nan")})
    return rows, records


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.10g" % v
    return str(v)


def write_table(rows, header, stream):
    """Plain CSV with %.10g floats; deterministic for identical inputs."""
    stream.write(",".join(header) + "\n")
    for row in rows:
        stream.write(",".join(_fmt(row[h]) for h in header) + "\n")


AVAILABILITY_HEADER = ("mode", "value", "availability", "trials",
                       "wilson_low", "wilson_high", "mean_ee", "mean_p_total")
EE_HEADER = ("mode", "L", "gamma_s_db", "availability", "mean_ee",
             "mean_p_total", "median_p_total")


def availability_rows(report: AvailabilityReport):
    header = AVAILABILITY_HEADER + tuple("inf_" + c for c in FAILURE_CLASSES)
    rows = []
    for mode in report.modes:
        for value in report.values:
            s = report.points[(mode, value)]
            row = {"mode": mode, "value": value, "availability": s.availability,
                   "trials": s.n_trials, "wilson_low": s.wilson_low,
                   "wilson_high": s.wilson_high, "mean_ee": s.mean_ee,
                   "mean_p_total": s.mean_p_total}
            for c in FAILURE_CLASSES:
                row["inf_" + c] = s.breakdown.get(c, 0)
            rows.append(row)
    return header, rows


def record_rows(records):
    return RECORD_FIELDS, records
