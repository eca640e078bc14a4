"""Command line front end.

Subcommands:
  availability   Monte Carlo network availability over a sweep grid
  ee-sweep       energy efficiency / power tables over (L, gamma_s) grids
  dep-sweep      availability vs DEP threshold for several blocklengths
  single         one trial with full per-constraint diagnostics
  link-stats     dump the reduced per-trial statistics for debugging
  selftest       fast internal consistency checks

Exit codes: 0 success, 2 configuration / usage error, 3 internal failure.
"""

from __future__ import annotations

import argparse
import sys
from contextlib import ExitStack
from dataclasses import replace

import numpy as np

from . import harness, urllc
from .allocator import AllocationMode
from .scenario import ConfigError, build_scenario, load_config
from .socp import SocConstraint, SocProblem, solve_socp

__all__ = ["main", "parse_sweep", "parse_list"]

_MODES = [m.value for m in AllocationMode]


def parse_list(raw, cast=float):
    try:
        return tuple(cast(part) for part in raw.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad list {raw!r}: {exc}") from exc


def parse_sweep(spec) -> harness.SweepGrid:
    """Sweep grammar: var=a,b,c | L=start:step:stop | eps=lo:hi[:count].

    L and gamma_s_db ranges are arithmetic and inclusive of the stop value;
    eps ranges are log-spaced with a default of 5 points.
    """
    if "=" not in spec:
        raise ConfigError(f"sweep {spec!r} is not var=grid")
    var, raw = spec.split("=", 1)
    var = var.strip()
    if var == "gamma_s":
        var = "gamma_s_db"
    cast = int if var == "L" else float
    if ":" in raw:
        parts = raw.split(":")
        try:
            nums = [float(p) for p in parts]
        except ValueError as exc:
            raise ConfigError(f"bad sweep range {raw!r}") from exc
        if var == "eps":
            if len(nums) == 2:
                lo, hi, count = nums[0], nums[1], 5
            elif len(nums) == 3:
                lo, hi, count = nums[0], nums[1], int(nums[2])
            else:
                raise ConfigError("eps sweep needs lo:hi[:count]")
            if lo <= 0.0 or hi <= lo or count < 2:
                raise ConfigError("eps sweep needs 0 < lo < hi and count >= 2")
            values = tuple(float(v) for v in np.geomspace(lo, hi, count))
        else:
            if len(nums) != 3 or nums[1] <= 0.0:
                raise ConfigError(f"{var} sweep needs start:step:stop")
            start, step, stop = nums
            values = tuple(cast(v) for v in np.arange(start, stop + step / 2.0, step))
    else:
        values = parse_list(raw, cast)
    return harness.SweepGrid(var, values)


def _modes_from(arg):
    if arg == "all":
        return tuple(_MODES)
    return (AllocationMode(arg).value,)


def _load(args):
    overrides = list(args.set or [])
    cfg = load_config(args.config, overrides)
    if args.seed is not None:
        cfg = replace(cfg, rng_seed=args.seed)
    return build_scenario(cfg)


def _open_out(stack: ExitStack, path):
    if path is None or path == "-":
        return sys.stdout
    return stack.enter_context(open(path, "w"))


def _cmd_availability(args):
    scenario = _load(args)
    sweep = parse_sweep(args.sweep)
    report = harness.run_availability(scenario, _modes_from(args.mode), sweep,
                                      args.trials, args.workers)
    header, rows = harness.availability_rows(report)
    with ExitStack() as stack:
        harness.write_table(rows, header, _open_out(stack, args.out))
    return 0


def _cmd_ee_sweep(args):
    scenario = _load(args)
    L_values = parse_list(args.L, int)
    gs_values = parse_list(args.gamma_s, float)
    rows, _ = harness.run_ee_sweep(scenario, _modes_from(args.mode), L_values,
                                   gs_values, args.trials, args.workers)
    with ExitStack() as stack:
        harness.write_table(rows, harness.EE_HEADER, _open_out(stack, args.out))
    return 0


def _cmd_dep_sweep(args):
    scenario = _load(args)
    sweep = parse_sweep(args.sweep)
    if sweep.var != "eps":
        raise ConfigError("dep-sweep expects an eps=... sweep")
    modes = _modes_from(args.mode)
    header = ("mode", "L", "eps_th", "availability", "trials",
              "wilson_low", "wilson_high", "mean_ee", "mean_p_total")
    rows = []
    for L in parse_list(args.L, int):
        sub = harness.Scenario(replace(scenario.config, blocklength=int(L)),
                               scenario.geometry)
        report = harness.run_availability(sub, modes, sweep, args.trials,
                                          args.workers)
        for mode in report.modes:
            for eps in report.values:
                s = report.points[(mode, eps)]
                rows.append({"mode": mode, "L": int(L), "eps_th": eps,
                             "availability": s.availability, "trials": s.n_trials,
                             "wilson_low": s.wilson_low, "wilson_high": s.wilson_high,
                             "mean_ee": s.mean_ee, "mean_p_total": s.mean_p_total})
    with ExitStack() as stack:
        harness.write_table(rows, header, _open_out(stack, args.out))
    return 0


def _cmd_single(args):
    scenario = _load(args)
    cfg = scenario.config
    data = harness.trial_statistics(scenario, args.trial)
    records = []
    for mode in _modes_from(args.mode):
        rec = harness.solve_point(cfg, data, mode, cfg.blocklength,
                                  cfg.sensing_sinr_threshold_db,
                                  cfg.dep_threshold)
        records.append(rec)
    with ExitStack() as stack:
        out = _open_out(stack, args.out)
        harness.write_table(records, harness.RECORD_FIELDS, out)
    return 0


def _cmd_link_stats(args):
    scenario = _load(args)
    data = harness.trial_statistics(scenario, args.trial)
    stats, quad = data.stats, data.quad
    n = stats.n_ues
    header = ["stream", "b", "A_diag", "B_diag"] + \
             [f"a_{i}" for i in range(n)] + \
             [f"F_{k}" for k in range(stats.F.shape[0])]
    rows = []
    for j in range(n + 1):
        row = {"stream": j,
               "b": float(stats.b[j - 1]) if j >= 1 else 0.0,
               "A_diag": float(np.real(quad.A[j, j])),
               "B_diag": float(np.real(quad.B[j, j]))}
        for i in range(n):
            row[f"a_{i}"] = float(stats.a[i, j])
        for k in range(stats.F.shape[0]):
            row[f"F_{k}"] = float(stats.F[k, j])
        rows.append(row)
    with ExitStack() as stack:
        harness.write_table(rows, header, _open_out(stack, args.out))
    return 0


def _selftest_checks():
    yield ("sinr threshold golden value",
           abs(urllc.sinr_threshold(1e-5, 180, 10, 256) - 2.939) < 0.005 * 2.939)
    yield ("delay bound golden value",
           abs(urllc.delay_upper_bound(180, 200e3, 1e-5) - 0.900009e-3)
           < 1e-9 * 0.900009e-3)
    eps = 3.7e-6
    yield ("DEP / threshold inverse pair",
           abs(urllc.dep_upper_bound(urllc.sinr_threshold(eps, 160, 10, 200),
                                     160, 10, 200) - eps) < 1e-9 * eps)
    # min x1 + x2 s.t. ||x|| <= 1 has optimum -sqrt(2) at x = -(1,1)/sqrt(2)
    prob = SocProblem(np.ones(2),
                      [SocConstraint(np.eye(2), np.zeros(2), np.zeros(2), 1.0)],
                      np.zeros(2, dtype=bool))
    sol = solve_socp(prob)
    yield ("SOCP unit-ball LP", sol.status == "optimal"
           and abs(sol.objective + np.sqrt(2.0)) < 1e-8)
    rng = np.random.default_rng(7)
    for trial in range(3):
        h = (rng.standard_normal((64, 8)) + 1j * rng.standard_normal((64, 8)))
        h0 = (rng.standard_normal(64) + 1j * rng.standard_normal(64))
        from .precoding import zf_sensing_precoder
        w0 = zf_sensing_precoder(h, h0)
        leak = np.max(np.abs(h.conj().T @ w0) / np.linalg.norm(h, axis=0))
        yield (f"ZF nulling draw {trial}", leak < 1e-10)


def _cmd_selftest(args):
    failed = 0
    for name, ok in _selftest_checks():
        print(f"{'ok  ' if ok else 'FAIL'} {name}")
        if not ok:
            failed += 1
    return 0 if failed == 0 else 3


def _build_parser():
    p = argparse.ArgumentParser(prog="cfisac",
                                description="cell-free ISAC power allocation experiments")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, trials=True):
        sp.add_argument("--config", help="flat key = value configuration file")
        sp.add_argument("--seed", type=int, help="override the RNG seed")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one configuration value")
        sp.add_argument("--out", help="output CSV path (default stdout)")
        sp.add_argument("--mode", default="all", choices=_MODES + ["all"])
        if trials:
            sp.add_argument("--trials", type=int, default=100)
            sp.add_argument("--workers", type=int, default=1)

    sp = sub.add_parser("availability", help="availability over a sweep grid")
    common(sp)
    sp.add_argument("--sweep", default="L=100:20:180",
                    help="e.g. L=100:20:200, gamma_s=0,3,10, eps=1e-7:1e-3:5")
    sp.set_defaults(func=_cmd_availability)

    sp = sub.add_parser("ee-sweep", help="energy efficiency tables")
    common(sp)
    sp.add_argument("--L", default="100,140,180", help="comma list of blocklengths")
    sp.add_argument("--gamma-s", dest="gamma_s", default="3,10",
                    help="comma list of sensing SINR thresholds in dB")
    sp.set_defaults(func=_cmd_ee_sweep)

    sp = sub.add_parser("dep-sweep", help="availability vs DEP threshold")
    common(sp)
    sp.add_argument("--sweep", default="eps=1e-7:1e-3:5")
    sp.add_argument("--L", default="140,160,180", help="comma list of blocklengths")
    sp.set_defaults(func=_cmd_dep_sweep)

    sp = sub.add_parser("single", help="one trial with diagnostics")
    common(sp, trials=False)
    sp.add_argument("--trial", type=int, default=0)
    sp.set_defaults(func=_cmd_single)

    sp = sub.add_parser("link-stats", help="dump reduced trial statistics")
    common(sp, trials=False)
    sp.add_argument("--trial", type=int, default=0)
    sp.set_defaults(func=_cmd_link_stats)

    sp = sub.add_parser("selftest", help="fast internal consistency checks")
    sp.set_defaults(func=_cmd_selftest)

    return p


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:   # noqa: BLE001 - CLI boundary
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
