"""Large-scale fading, spatial correlation, and random channel realizations.

Covers the three channel families of the system: spatially correlated Rician
UE channels, Kronecker-model target-free (clutter) channels between AP pairs,
and the deterministic line-of-sight sensing channel toward the target.

Urban-microcell constants (pathloss intercepts/slopes, shadowing deviations,
Rician K law) are collected in UMI so an alternate table can be swapped in
one place.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import Scenario, azimuth_elevation, distance_3d, substream

__all__ = [
    "UMI", "LinkStats", "ClutterStats", "SensingChannel", "ChannelStats",
    "array_response", "los_probability", "pathloss_los_db", "pathloss_nlos_db",
    "large_scale", "local_scattering_corr", "psd_sqrt", "crandn",
    "sample_comm_channel", "sample_clutter_channel", "bistatic_gain",
    "channel_statistics",
]

# urban microcell large-scale constants
UMI = {
    "pl_los_intercept": 30.18,   # dB
    "pl_los_slope": 26.0,        # dB / decade
    "pl_nlos_intercept": 34.53,
    "pl_nlos_slope": 38.0,
    "shadow_std_los": 4.0,       # dB
    "shadow_std_nlos": 10.0,
    "rician_k_base": 1.3,        # K = 10^(base - slope*d) linear
    "rician_k_slope": 0.003,
}


def crandn(rng, *shape):
    """Circularly symmetric standard complex normal samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def array_response(azimuth, elevation, m_antennas):
    """ULA response [e^{j pi m sin(az) cos(el)}], m = 0..M-1; ||a||^2 = M."""
    if m_antennas < 1:
        raise ValueError("need at least one antenna")
    phase = np.pi * np.sin(azimuth) * np.cos(elevation)
    return np.exp(1j * phase * np.arange(m_antennas))


def los_probability(distance):
    """Probability of line of sight at the given distance (m)."""
    d = np.asarray(distance, dtype=float)
    return np.minimum(18.0 / d, 1.0) * (1.0 - np.exp(-d / 36.0)) + np.exp(-d / 36.0)


def pathloss_los_db(distance):
    return UMI["pl_los_intercept"] + UMI["pl_los_slope"] * np.log10(distance)


def pathloss_nlos_db(distance):
    return UMI["pl_nlos_intercept"] + UMI["pl_nlos_slope"] * np.log10(distance)


def large_scale(distance_3d, rng):
    """Draw (pathloss_db, shadowing_db, rician_k, is_los) for one link."""
    d = float(distance_3d)
    if d <= 0.0:
        raise ValueError("distance must be positive")
    is_los = bool(rng.random() < los_probability(d))
    if is_los:
        pl = pathloss_los_db(d)
        sf = UMI["shadow_std_los"] * rng.standard_normal()
        k = 10.0 ** (UMI["rician_k_base"] - UMI["rician_k_slope"] * d)
    else:
        pl = pathloss_nlos_db(d)
        sf = UMI["shadow_std_nlos"] * rng.standard_normal()
        k = 0.0
    return pl, sf, k, is_los


def local_scattering_corr(nominal_azimuth, asd, m_antennas):
    """Closed-form local-scattering correlation for a Gaussian angular spread.

    Entry (l, m): e^{j pi (l-m) sin(phi)} * e^{-(asd^2/2) (pi (l-m) cos(phi))^2}.
    Unit diagonal, Hermitian, PSD up to eigen-clipping.
    """
    if asd < 0.0:
        raise ValueError("angular spread must be >= 0")
    delta = np.subtract.outer(np.arange(m_antennas), np.arange(m_antennas))
    phase = np.pi * delta * np.sin(nominal_azimuth)
    spread = -(asd ** 2 / 2.0) * (np.pi * delta * np.cos(nominal_azimuth)) ** 2
    return np.exp(1j * phase + spread)


def psd_sqrt(R, rel_tol=1e-12):
    """Hermitian PSD square root with small-negative eigenvalue clipping."""
    R = np.asarray(R)
    w, V = np.linalg.eigh((R + R.conj().swapaxes(-1, -2)) / 2.0)
    wmax = np.max(w, axis=-1, keepdims=True)
    if np.any(w < -rel_tol * np.maximum(wmax, 0.0) - rel_tol):
        raise ValueError("matrix is not positive semidefinite")
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)[..., None, :]) @ V.conj().swapaxes(-1, -2)


@dataclass
class LinkStats:
    """Large-scale description of one UE-AP link."""

    beta: float                 # total linear gain
    rician_k: float             # linear; 0 when NLoS
    is_los: bool
    h_bar: np.ndarray           # LoS component (M,)
    R_nlos: np.ndarray          # NLoS correlation (M, M), tr = M * beta_nlos

    @property
    def R_total(self):
        """Correlation of the full channel (phase-unaware: uniform LoS phase)."""
        return np.outer(self.h_bar, self.h_bar.conj()) + self.R_nlos


@dataclass
class ClutterStats:
    """Kronecker correlation pair for one (receive AP, transmit AP) link.

    The clutter link gain g (pathloss x clutter scaling) is carried inside the
    matrices with tr(R_rx) = tr(R_tx) = sqrt(g), i.e. split evenly between the
    two traces so their product recovers g.
    """

    R_rx: np.ndarray
    R_tx: np.ndarray


@dataclass
class SensingChannel:
    """LoS channel from all transmit APs to the target location."""

    h0: np.ndarray              # (n_tx * M,) concatenated steering blocks
    beta_one_way: np.ndarray    # (n_tx,) AP-to-target gains inside h0
    beta_bistatic: np.ndarray   # (n_rx, n_tx) reflected-path gains
    a_tx: np.ndarray            # (n_tx, M) array responses toward the target


def sample_comm_channel(stats: LinkStats, rng):
    """One realization e^{j psi} h_bar + R_nlos^(1/2) z."""
    sqrt_R = psd_sqrt(stats.R_nlos)
    psi = rng.uniform(0.0, 2.0 * np.pi)
    z = crandn(rng, stats.h_bar.size)
    return np.exp(1j * psi) * stats.h_bar + sqrt_R @ z


def sample_clutter_channel(c: ClutterStats, rng):
    """One Kronecker-model clutter realization R_rx^(1/2) W (R_tx^(1/2))^T."""
    sr = psd_sqrt(c.R_rx)
    st = psd_sqrt(c.R_tx)
    m = sr.shape[0]
    W = crandn(rng, m, m)
    return sr @ W @ st.T


def bistatic_gain(d_tx, d_rx, wavelength, rcs_var):
    """Reflected-path gain from the bistatic radar range equation."""
    if d_tx <= 0.0 or d_rx <= 0.0:
        raise ValueError("distances must be positive")
    return wavelength ** 2 * rcs_var / ((4.0 * np.pi) ** 3 * d_tx ** 2 * d_rx ** 2)


# ---------------------------------------------------------------------------
# per-trial assembly
# ---------------------------------------------------------------------------

@dataclass
class ChannelStats:
    """All large-scale quantities of one Monte Carlo trial."""

    ue_positions: np.ndarray
    link: np.ndarray            # (n_ue, n_tx) object array of LinkStats
    clutter: np.ndarray         # (n_rx, n_tx) object array of ClutterStats
    sensing: SensingChannel

    def link_beta(self):
        return np.array([[ls.beta for ls in row] for row in self.link])


def _ue_link(cfg, az, el, d3d, rng):
    pl, sf, k, is_los = large_scale(d3d, rng)
    beta = 10.0 ** (-(pl + sf) / 10.0)
    M = cfg.antennas_per_ap
    corr = local_scattering_corr(az, np.deg2rad(cfg.asd_deg), M)
    if is_los:
        beta_los = beta * k / (k + 1.0)
        beta_nlos = beta / (k + 1.0)
        h_bar = np.sqrt(beta_los) * array_response(az, el, M)
    else:
        beta_nlos = beta
        h_bar = np.zeros(M, dtype=complex)
    return LinkStats(beta, k, is_los, h_bar, beta_nlos * corr)


def channel_statistics(scenario: Scenario, trial_index: int) -> ChannelStats:
    """Draw the large-scale state of one trial (UE drop + shadowing/LoS).

    Deterministic per (seed, trial_index); fading realizations are drawn later
    from the separate fading stream.
    """
    from .scenario import drop_ues

    cfg = scenario.config
    geom = drop_ues(scenario, trial_index)
    rng = substream(cfg.rng_seed, "shadowing", trial_index)
    M = cfg.antennas_per_ap
    asd = np.deg2rad(cfg.asd_deg)

    # UE-AP links; angles taken from the AP array toward the UE
    link = np.empty((cfg.n_ues, cfg.n_tx_aps), dtype=object)
    for i, ue in enumerate(geom.ue_positions):
        for k, ap in enumerate(geom.tx_ap_positions):
            az, el = azimuth_elevation(ap, geom.ap_height, ue, geom.ue_height)
            d3d = distance_3d(ap, geom.ap_height, ue, geom.ue_height)
            link[i, k] = _ue_link(cfg, az, el, d3d, rng)

    # clutter between every (rx, tx) AP pair; correlation angles follow the
    # AP-pair bearing, the link gain sits in the traces (see ClutterStats)
    clutter = np.empty((cfg.n_rx_aps, cfg.n_tx_aps), dtype=object)
    for r, rx in enumerate(geom.rx_ap_positions):
        for k, tx in enumerate(geom.tx_ap_positions):
            d3d = distance_3d(tx, geom.ap_height, rx, geom.ap_height,
                              min_2d=1.0)
            gain = cfg.clutter_scaling * 10.0 ** (-pathloss_nlos_db(d3d) / 10.0)
            az_rx, el_rx = azimuth_elevation(rx, geom.ap_height, tx, geom.ap_height)
            az_tx, el_tx = azimuth_elevation(tx, geom.ap_height, rx, geom.ap_height)
            amp = np.sqrt(gain) / M
            clutter[r, k] = ClutterStats(
                R_rx=amp * local_scattering_corr(az_rx, asd, M),
                R_tx=amp * local_scattering_corr(az_tx, asd, M),
            )

    # deterministic sensing channel and reflected-path gains
    a_tx = np.empty((cfg.n_tx_aps, M), dtype=complex)
    beta0 = np.empty(cfg.n_tx_aps)
    blocks = []
    for k, tx in enumerate(geom.tx_ap_positions):
        az, el = azimuth_elevation(tx, geom.ap_height, geom.target_position,
                                   geom.target_height)
        d3d = distance_3d(tx, geom.ap_height, geom.target_position,
                          geom.target_height)
        a_tx[k] = array_response(az, el, M)
        beta0[k] = (cfg.wavelength / (4.0 * np.pi * d3d)) ** 2
        # conjugate steering so the projected precoder illuminates the target
        blocks.append(np.sqrt(beta0[k]) * a_tx[k].conj())
    h0 = np.concatenate(blocks)

    beta_bi = np.empty((cfg.n_rx_aps, cfg.n_tx_aps))
    for r, rx in enumerate(geom.rx_ap_positions):
        d_rx = distance_3d(rx, geom.ap_height, geom.target_position,
                           geom.target_height)
        for k, tx in enumerate(geom.tx_ap_positions):
            d_tx = distance_3d(tx, geom.ap_height, geom.target_position,
                               geom.target_height)
            beta_bi[r, k] = bistatic_gain(d_tx, d_rx, cfg.wavelength,
                                          cfg.rcs_variance)

    return ChannelStats(geom.ue_positions, link, clutter,
                        SensingChannel(h0, beta0, beta_bi, a_tx))
