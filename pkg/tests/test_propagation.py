import numpy as np
import pytest

from cfisac import propagation as prop
from cfisac.scenario import SystemConfig, build_scenario


def test_los_probability_limits():
    assert prop.los_probability(1.0) == pytest.approx(1.0)
    assert prop.los_probability(5000.0) < 0.01
    d = np.array([20.0, 50.0, 100.0, 300.0])
    p = prop.los_probability(d)
    assert np.all(np.diff(p) < 0)


def test_pathloss_values():
    # LoS: 30.18 + 26 log10(d); NLoS: 34.53 + 38 log10(d)
    assert prop.pathloss_los_db(100.0) == pytest.approx(30.18 + 52.0)
    assert prop.pathloss_nlos_db(100.0) == pytest.approx(34.53 + 76.0)
    assert prop.pathloss_nlos_db(100.0) > prop.pathloss_los_db(100.0)


def test_large_scale_statistics():
    rng = np.random.default_rng(0)
    n_los = 0
    sf_los = []
    for _ in range(4000):
        pl, sf, k, is_los = prop.large_scale(30.0, rng)
        if is_los:
            n_los += 1
            sf_los.append(sf)
            assert k == pytest.approx(10 ** (1.3 - 0.003 * 30.0))
        else:
            assert k == 0.0
    # P_LoS(30 m) = 0.6*(1 - e^{-30/36}) + e^{-30/36} = 0.7747
    assert n_los / 4000 == pytest.approx(0.7747, abs=0.03)
    assert np.std(sf_los) == pytest.approx(4.0, rel=0.1)


def test_array_response_norm_and_phase():
    a = prop.array_response(0.3, 0.1, 4)
    assert np.linalg.norm(a) ** 2 == pytest.approx(4.0)
    assert a[0] == pytest.approx(1.0)
    step = np.pi * np.sin(0.3) * np.cos(0.1)
    assert np.angle(a[1]) == pytest.approx(step)


def test_local_scattering_corr_properties():
    R = prop.local_scattering_corr(0.0, np.deg2rad(15.0), 4)
    assert np.allclose(np.diag(R), 1.0)
    assert np.allclose(R, R.conj().T)
    w = np.linalg.eigvalsh(R)
    assert w.sum() == pytest.approx(4.0)
    assert w.min() > -1e-12
    # zero spread collapses to the rank-one steering outer product
    R0 = prop.local_scattering_corr(0.3, 0.0, 4)
    a = prop.array_response(0.3, 0.0, 4)
    assert np.allclose(R0, np.outer(a, a.conj()))


def test_psd_sqrt_roundtrip_and_rejection():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    R = X @ X.conj().T
    S = prop.psd_sqrt(R)
    assert np.allclose(S @ S, R)
    with pytest.raises(ValueError):
        prop.psd_sqrt(np.diag([1.0, -0.5]))


def test_sample_comm_channel_covariance():
    rng = np.random.default_rng(2)
    M = 4
    corr = prop.local_scattering_corr(0.4, 0.2, M)
    h_bar = 0.3 * prop.array_response(0.4, 0.0, M)
    stats = prop.LinkStats(beta=1.0, rician_k=1.0, is_los=True,
                           h_bar=h_bar, R_nlos=0.1 * corr)
    draws = np.stack([prop.sample_comm_channel(stats, rng) for _ in range(40000)])
    emp = np.einsum("na,nb->ab", draws, draws.conj()) / draws.shape[0]
    assert np.allclose(emp, stats.R_total, atol=0.02 * np.abs(stats.R_total).max())
    # uniform phase makes the mean vanish even with a LoS component
    assert np.abs(draws.mean(axis=0)).max() < 0.02


def test_sample_clutter_identity_covariance():
    rng = np.random.default_rng(3)
    M = 3
    c = prop.ClutterStats(R_rx=np.eye(M), R_tx=np.eye(M))
    draws = np.stack([prop.sample_clutter_channel(c, rng).ravel()
                      for _ in range(100000)])
    emp = np.einsum("na,nb->ab", draws, draws.conj()) / draws.shape[0]
    assert np.allclose(emp, np.eye(M * M), atol=0.02)


def test_bistatic_gain_golden():
    g = prop.bistatic_gain(70.7, 70.7, 0.15779, 1.0)
    assert g == pytest.approx(5.02e-13, rel=5e-3)
    with pytest.raises(ValueError):
        prop.bistatic_gain(0.0, 10.0, 0.15, 1.0)


def test_channel_statistics_shapes_and_determinism():
    sc = build_scenario(SystemConfig(mc_inner=100))
    ch1 = prop.channel_statistics(sc, 2)
    ch2 = prop.channel_statistics(sc, 2)
    assert np.array_equal(ch1.ue_positions, ch2.ue_positions)
    assert ch1.link.shape == (8, 16)
    assert ch1.clutter.shape == (2, 16)
    assert ch1.sensing.h0.shape == (64,)
    assert ch1.sensing.beta_bistatic.shape == (2, 16)
    assert ch1.link[0, 0].beta == ch2.link[0, 0].beta
    ch3 = prop.channel_statistics(sc, 3)
    assert ch1.link[0, 0].beta != ch3.link[0, 0].beta


def test_clutter_trace_split():
    cfg = SystemConfig(mc_inner=100)
    sc = build_scenario(cfg)
    ch = prop.channel_statistics(sc, 0)
    geom = sc.geometry
    for r in range(2):
        for k in range(16):
            d = np.hypot(*(geom.tx_ap_positions[k] - geom.rx_ap_positions[r]))
            d = max(d, 1.0)
            g = cfg.clutter_scaling * 10 ** (-prop.pathloss_nlos_db(d) / 10.0)
            tr_rx = np.trace(ch.clutter[r, k].R_rx).real
            tr_tx = np.trace(ch.clutter[r, k].R_tx).real
            assert tr_rx == pytest.approx(np.sqrt(g), rel=1e-9)
            assert tr_rx * tr_tx == pytest.approx(g, rel=1e-9)


def test_sensing_channel_gains():
    cfg = SystemConfig(mc_inner=100)
    sc = build_scenario(cfg)
    ch = prop.channel_statistics(sc, 0)
    geom = sc.geometry
    for k in range(16):
        d = np.hypot(np.hypot(*(geom.tx_ap_positions[k] - geom.target_position)),
                     cfg.ap_height - cfg.target_height)
        expect = (cfg.wavelength / (4.0 * np.pi * d)) ** 2
        assert ch.sensing.beta_one_way[k] == pytest.approx(expect, rel=1e-9)
        block = ch.sensing.h0[4 * k:4 * (k + 1)]
        assert np.linalg.norm(block) ** 2 == pytest.approx(4 * expect, rel=1e-9)
    d_rx = np.hypot(np.hypot(*(geom.rx_ap_positions[0] - geom.target_position)),
                    cfg.ap_height - cfg.target_height)
    d_tx = np.hypot(np.hypot(*(geom.tx_ap_positions[0] - geom.target_position)),
                    cfg.ap_height - cfg.target_height)
    assert ch.sensing.beta_bistatic[0, 0] == pytest.approx(
        prop.bistatic_gain(d_tx, d_rx, cfg.wavelength, cfg.rcs_variance))
