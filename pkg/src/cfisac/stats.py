"""Monte Carlo reduction of random channels to deterministic optimizer inputs.

One trial fixes the large-scale state (ChannelStats); this module averages
over small-scale fading, estimation noise, and the induced precoders to
produce the scalars of the hardening SINR bound (b_i, a_ij, per-AP power
diagonals F_k) and the quadratic forms (A, B) of the sensing SINR.

Stream index 0 is always the sensing stream; streams 1..N_ue are the UEs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .precoding import (assign_pilots, lmmse_filter, rzf_precoders,
                        rzf_regularizer, zf_sensing_precoder)
from .propagation import ChannelStats, crandn, psd_sqrt

__all__ = ["CommStatistics", "SensingQuadratics", "comm_stats",
           "sensing_matrices", "sensing_sinr", "comm_sinr",
           "scale_to_data_len"]


@dataclass
class CommStatistics:
    """Deterministic scalars of the downlink SINR bound.

    a has shape (n_ue, n_ue + 1) with column 0 the sensing-stream leakage;
    F has shape (n_tx, n_ue + 1) holding sqrt(E ||w_{j,k}||^2).
    """

    b: np.ndarray
    a: np.ndarray
    F: np.ndarray
    noise_power: float
    mc_inner: int
    clamp_warnings: int = 0

    @property
    def n_ues(self):
        return self.b.size


@dataclass
class SensingQuadratics:
    """Quadratic forms of the sensing SINR over the sqrt-power vector."""

    A: np.ndarray
    B: np.ndarray
    noise_floor: float          # L_d * M * N_rx * sigma_n^2
    mode: str                   # expected-symbols | realized-symbols
    data_len: int
    m_antennas: int
    n_rx: int
    noise_power: float


def _draw_realizations(cfg, chan: ChannelStats, n_draws, rng):
    """Channels, estimates and precoders for `n_draws` realizations.

    The draw order (LoS phases, NLoS fading, pilot noise) is a fixed contract
    so independent re-implementations can reuse identical randomness.
    """
    N, K, M = cfg.n_ues, cfg.n_tx_aps, cfg.antennas_per_ap
    dim = K * M
    pilots = assign_pilots(N, cfg.pilot_len, chan.link_beta())
    energy = cfg.pilot_power * cfg.pilot_len
    sigma2 = cfg.noise_power

    h_bar = np.stack([[chan.link[i, k].h_bar for k in range(K)] for i in range(N)])
    R_sqrt = np.stack([[psd_sqrt(chan.link[i, k].R_nlos) for k in range(K)]
                       for i in range(N)])
    filt = np.empty((N, K, M, M), dtype=complex)
    for i in range(N):
        group = pilots.group_of(i)
        for k in range(K):
            r_sum = sum(chan.link[j, k].R_total for j in group)
            filt[i, k] = lmmse_filter(chan.link[i, k].R_total, r_sum, energy, sigma2)

    psi = rng.uniform(0.0, 2.0 * np.pi, size=(n_draws, N, K))
    z = crandn(rng, n_draws, N, K, M)
    v = crandn(rng, n_draws, cfg.pilot_len, K, M)

    h = np.exp(1j * psi)[..., None] * h_bar + np.einsum("ikab,nikb->nika", R_sqrt, z)

    y = np.sqrt(sigma2) * v
    for i in range(N):
        y[:, pilots.pilot_index[i]] += np.sqrt(energy) * h[:, i]
    h_hat = np.einsum("ikab,nikb->nika", filt, y[:, pilots.pilot_index])

    # collective vectors, AP-major blocks: (n, dim, N)
    H = h.transpose(0, 2, 3, 1).reshape(n_draws, dim, N)
    H_hat = h_hat.transpose(0, 2, 3, 1).reshape(n_draws, dim, N)

    delta = rzf_regularizer(N, sigma2, cfg.max_ap_power)
    W_ue = rzf_precoders(H_hat, delta)
    w0 = zf_sensing_precoder(H_hat, chan.sensing.h0)
    W = np.concatenate([w0[:, :, None], W_ue], axis=2)   # (n, dim, N + 1)
    return H, H_hat, W


def comm_stats(cfg, chan: ChannelStats, mc_inner, rng, return_precoders=False):
    """Estimate b_i, a_ij and F_k over `mc_inner` channel realizations."""
    if mc_inner < 100:
        raise ValueError("mc_inner must be >= 100")
    N, K, M = cfg.n_ues, cfg.n_tx_aps, cfg.antennas_per_ap

    H, _, W = _draw_realizations(cfg, chan, mc_inner, rng)
    # z[n, i, j] = h_i^H w_j, stream 0 = sensing
    zij = np.einsum("ndi,ndj->nij", H.conj(), W)

    mean_own = zij[:, np.arange(N), np.arange(N) + 1].mean(axis=0)
    b = np.abs(mean_own)
    second = (np.abs(zij) ** 2).mean(axis=0)          # (N, N+1)

    a = np.sqrt(second)
    var_own = second[np.arange(N), np.arange(N) + 1] - b ** 2
    clamps = int(np.sum(var_own < 0.0))
    a[np.arange(N), np.arange(N) + 1] = np.sqrt(np.clip(var_own, 0.0, None))

    W4 = W.reshape(mc_inner, K, M, N + 1)
    F = np.sqrt((np.abs(W4) ** 2).sum(axis=2).mean(axis=0))

    stats = CommStatistics(b, a, F, cfg.noise_power, mc_inner, clamps)
    if return_precoders:
        return stats, W
    return stats


def _qpsk(rng, shape):
    bits = rng.integers(0, 2, size=shape + (2,))
    return ((2 * bits[..., 0] - 1) + 1j * (2 * bits[..., 1] - 1)) / np.sqrt(2.0)


def sensing_matrices(precoders, chan: ChannelStats, data_len, noise_power,
                     mode="expected", rng=None) -> SensingQuadratics:
    """Sensing SINR quadratics A (target return) and B (clutter).

    `precoders` is one (dim, n_streams) matrix or a batch of them; batches are
    averaged, matching the expectation convention of comm_stats. In expected
    mode the average over i.i.d. unit-power symbols removes off-diagonals; in
    realized mode one QPSK symbol block of length `data_len` is drawn.
    """
    if data_len < 1:
        raise ValueError("data_len must be >= 1")
    W = np.asarray(precoders)
    if W.ndim == 2:
        W = W[None]
    n_rx, n_tx = chan.clutter.shape
    n_sets, dim, n_streams = W.shape
    M = dim // n_tx
    W4 = W.reshape(n_sets, n_tx, M, n_streams)

    beta_sum = chan.sensing.beta_bistatic.sum(axis=0)    # (n_tx,)
    v = np.einsum("km,nkms->nks", chan.sensing.a_tx, W4)
    C_A = np.einsum("nks,nkt,k->st", v.conj(), v, beta_sum) / n_sets

    tr_rx = np.array([[np.trace(chan.clutter[r, k].R_rx).real
                       for k in range(n_tx)] for r in range(n_rx)])
    R_txT = np.stack([[chan.clutter[r, k].R_tx.T for k in range(n_tx)]
                      for r in range(n_rx)])
    tmp = np.einsum("rkab,nkbs->nrkas", R_txT, W4)
    C_B = np.einsum("nkas,nrkat,rk->st", W4.conj(), tmp, tr_rx) / n_sets

    if mode == "expected":
        A = data_len * M * np.diag(np.diag(C_A).real)
        B = data_len * np.diag(np.diag(C_B).real)
    elif mode == "realized":
        if rng is None:
            raise ValueError("realized-symbols mode needs an rng")
        s = _qpsk(rng, (data_len, n_streams))
        s_mat = s.conj().T @ s
        A = M * (C_A * s_mat)
        B = C_B * s_mat
    else:
        raise ValueError(f"unknown mode {mode!r}")

    noise_floor = data_len * M * n_rx * noise_power
    return SensingQuadratics(A, B, noise_floor, f"{mode}-symbols", data_len,
                             M, n_rx, noise_power)


def scale_to_data_len(quad: SensingQuadratics, data_len) -> SensingQuadratics:
    """Rescale expected-mode quadratics to a different data length."""
    if quad.mode != "expected-symbols":
        raise ValueError("only expected-symbols quadratics scale with data length")
    f = data_len / quad.data_len
    return SensingQuadratics(quad.A * f, quad.B * f, quad.noise_floor * f,
                             quad.mode, data_len, quad.m_antennas, quad.n_rx,
                             quad.noise_power)


def sensing_sinr(rho, quad: SensingQuadratics):
    """rho^T A rho / (noise floor + rho^T B rho) for a sqrt-power vector rho."""
    rho = np.asarray(rho, dtype=float)
    num = float(np.real(rho @ quad.A @ rho))
    den = quad.noise_floor + float(np.real(rho @ quad.B @ rho))
    return num / den


def comm_sinr(rho, stats: CommStatistics, ue):
    """Hardening-bound downlink SINR of one UE for a sqrt-power vector rho."""
    rho = np.asarray(rho, dtype=float)
    powers = rho ** 2
    num = powers[ue + 1] * stats.b[ue] ** 2
    den = float(powers @ (stats.a[ue] ** 2)) + stats.noise_power
    return num / den
