import numpy as np
import pytest

from cfisac.cli import main, parse_list, parse_sweep
from cfisac.scenario import ConfigError

REDUCED = ["--set", "n_tx_aps=4", "--set", "n_rx_aps=1", "--set", "n_ues=3",
           "--set", "antennas_per_ap=2", "--set", "area_side=300",
           "--set", "rx_ap_offsets=-40,0", "--set", "mc_inner=100"]


def test_parse_sweep_arithmetic():
    g = parse_sweep("L=100:20:200")
    assert g.var == "L"
    assert g.values == (100, 120, 140, 160, 180, 200)


def test_parse_sweep_list_and_alias():
    g = parse_sweep("gamma_s=0,3,10")
    assert g.var == "gamma_s_db"
    assert g.values == (0.0, 3.0, 10.0)


def test_parse_sweep_eps_logspaced():
    g = parse_sweep("eps=1e-7:1e-3:5")
    assert g.var == "eps"
    assert len(g.values) == 5
    assert g.values[0] == pytest.approx(1e-7)
    assert g.values[-1] == pytest.approx(1e-3)
    ratios = np.diff(np.log10(g.values))
    assert np.allclose(ratios, ratios[0])
    assert len(parse_sweep("eps=1e-7:1e-3").values) == 5


def test_parse_sweep_errors():
    for bad in ("L=1:2", "nope=1,2", "L", "eps=0:1e-3:4", "L=a:b:c"):
        with pytest.raises(ConfigError):
            parse_sweep(bad)


def test_parse_list():
    assert parse_list("140,160,180", int) == (140, 160, 180)
    with pytest.raises(ConfigError):
        parse_list("1,two", int)


def test_usage_error_exit_code(capsys):
    assert main(["availability", "--bogus-flag"]) == 2
    assert main([]) == 2


def test_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("frobnicate = 1\n")
    rc = main(["availability", "--config", str(bad), "--trials", "20"])
    assert rc == 2
    assert "configuration error" in capsys.readouterr().err


def test_missing_config_file():
    assert main(["availability", "--config", "/nonexistent/x.cfg"]) == 2


def test_selftest_passes(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out


def test_availability_subcommand_deterministic(tmp_path):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["availability", *REDUCED, "--mode", "urllc_only", "--trials", "20",
            "--sweep", "L=140,180", "--seed", "9"]
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    b1, b2 = out1.read_bytes(), out2.read_bytes()
    assert b1 == b2
    text = b1.decode()
    assert text.splitlines()[0].startswith("mode,value,availability")
    assert len(text.splitlines()) == 3


def test_single_subcommand(tmp_path):
    out = tmp_path / "one.csv"
    rc = main(["single", *REDUCED, "--mode", "urllc_only", "--out", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("trial,mode,L")
    assert len(lines) == 2


def test_link_stats_subcommand(tmp_path):
    out = tmp_path / "ls.csv"
    rc = main(["link-stats", *REDUCED, "--out", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0].split(",")[:4] == ["stream", "b", "A_diag", "B_diag"]
    assert len(lines) == 1 + 3 + 1      # header + UE streams + sensing stream


def test_dep_sweep_subcommand(tmp_path):
    out = tmp_path / "dep.csv"
    rc = main(["dep-sweep", *REDUCED, "--mode", "urllc_only", "--trials", "20",
               "--sweep", "eps=1e-6:1e-3:3", "--L", "140,180",
               "--out", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("mode,L,eps_th")
    assert len(lines) == 1 + 2 * 3


def test_dep_sweep_rejects_other_sweeps():
    assert main(["dep-sweep", *REDUCED, "--sweep", "L=100:20:180",
                 "--trials", "20"]) == 2
