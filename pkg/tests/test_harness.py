import io

import numpy as np
import pytest

from cfisac import harness
from cfisac.scenario import SystemConfig, build_scenario


def reduced_scenario(**kw):
    """Small network that keeps one allocation under ~100 ms."""
    base = dict(n_tx_aps=4, n_rx_aps=1, n_ues=3, antennas_per_ap=2,
                area_side=300.0, pilot_len=10, mc_inner=100,
                rx_ap_offsets=((-40.0, 0.0),), rng_seed=3)
    base.update(kw)
    return build_scenario(SystemConfig(**base))


def test_wilson_interval_properties():
    lo, hi = harness.wilson_interval(8, 10)
    assert 0.0 <= lo <= 0.8 <= hi <= 1.0
    lo0, hi0 = harness.wilson_interval(0, 50)
    assert lo0 == pytest.approx(0.0, abs=1e-12) and hi0 > 0.0
    lo1, hi1 = harness.wilson_interval(50, 50)
    assert hi1 == pytest.approx(1.0, abs=1e-12) and lo1 < 1.0
    with pytest.raises(ValueError):
        harness.wilson_interval(0, 0)


def test_sweep_grid_validation():
    with pytest.raises(Exception):
        harness.SweepGrid("bogus", (1.0,))
    with pytest.raises(Exception):
        harness.SweepGrid("L", ())


def test_trial_statistics_deterministic():
    sc = reduced_scenario()
    d1 = harness.trial_statistics(sc, 1)
    d2 = harness.trial_statistics(sc, 1)
    assert np.array_equal(d1.stats.b, d2.stats.b)
    assert np.array_equal(d1.quad.A, d2.quad.A)


def test_solve_point_delay_limit():
    sc = reduced_scenario()
    data = harness.trial_statistics(sc, 0)
    rec = harness.solve_point(sc.config, data, "urllc_only", 250, 3.0, 1e-5)
    assert rec["status"] == "infeasible"
    assert rec["worst_class"] == "delay"


def test_availability_forced_infeasible():
    # packet far beyond the finite-blocklength capacity of any allocation
    sc = reduced_scenario(packet_bits=2000.0)
    rep = harness.run_availability(sc, ["urllc_only"],
                                   harness.SweepGrid("L", (180,)), 20)
    s = rep.points[("urllc_only", 180)]
    assert s.availability == 0.0
    assert sum(s.breakdown.values()) == 20


def test_availability_trivially_feasible():
    # one-bit packets at a lax DEP target are always servable
    sc = reduced_scenario(packet_bits=1.0, dep_threshold=0.49, blocklength=100)
    rep = harness.run_availability(sc, ["urllc_only"],
                                   harness.SweepGrid("L", (100,)), 20)
    assert rep.points[("urllc_only", 100)].availability == 1.0


def test_availability_monotone_in_sensing_threshold():
    sc = reduced_scenario()
    grid = harness.SweepGrid("gamma_s_db", (0.0, 25.0))
    rep = harness.run_availability(sc, ["seurllc_plus"], grid, 20)
    lo = rep.points[("seurllc_plus", 0.0)].availability
    hi = rep.points[("seurllc_plus", 25.0)].availability
    assert hi <= lo


def test_availability_requires_min_trials():
    sc = reduced_scenario()
    with pytest.raises(ValueError):
        harness.run_availability(sc, ["urllc_only"],
                                 harness.SweepGrid("L", (180,)), 5)


def test_report_accounting():
    sc = reduced_scenario()
    rep = harness.run_availability(sc, ["urllc_only", "seurllc_plus"],
                                   harness.SweepGrid("L", (140, 180)), 20)
    assert len(rep.records) == 2 * 2 * 20
    for key, s in rep.points.items():
        assert s.n_trials == 20
        assert 0.0 <= s.wilson_low <= s.availability <= s.wilson_high <= 1.0
        n_inf = sum(s.breakdown.values())
        assert n_inf == round((1.0 - s.availability) * 20)


def test_csv_determinism_and_format():
    sc = reduced_scenario()
    grid = harness.SweepGrid("L", (140, 180))
    outs = []
    for _ in range(2):
        rep = harness.run_availability(sc, ["urllc_only"], grid, 20)
        header, rows = harness.availability_rows(rep)
        buf = io.StringIO()
        harness.write_table(rows, header, buf)
        outs.append(buf.getvalue())
    assert outs[0] == outs[1]
    lines = outs[0].splitlines()
    assert lines[0].startswith("mode,value,availability")
    assert len(lines) == 1 + 2


def test_workers_do_not_change_results():
    sc = reduced_scenario()
    grid = harness.SweepGrid("L", (180,))
    r1 = harness.run_availability(sc, ["urllc_only"], grid, 20, workers=1)
    r2 = harness.run_availability(sc, ["urllc_only"], grid, 20, workers=2)
    assert len(r1.records) == len(r2.records)
    for a, b in zip(r1.records, r2.records):
        for key in a:
            va, vb = a[key], b[key]
            if isinstance(va, float) and np.isnan(va):
                assert np.isnan(vb)
            else:
                assert va == vb


def test_ee_sweep_rows():
    sc = reduced_scenario(packet_bits=1.0, dep_threshold=0.49, blocklength=100)
    rows, records = harness.run_ee_sweep(sc, ["urllc_only"], [100], [3.0], 20)
    assert len(rows) == 1
    row = rows[0]
    assert row["availability"] == 1.0
    assert row["mean_ee"] > 0.0
    assert row["median_p_total"] > 0.0
    with pytest.raises(ValueError):
        harness.run_ee_sweep(sc, ["urllc_only"], [], [3.0], 20)
