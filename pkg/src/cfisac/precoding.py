"""Pilot assignment, LMMSE channel estimation, and transmit precoders.

Communication streams use unit-norm regularized zero forcing over the
collective (all-AP) channel estimates; the sensing stream uses the projection
of the sensing channel onto the orthogonal complement of the estimated UE
subspace, which nulls the sensing interference at every UE estimate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["PilotAssignment", "DegenerateProjectionError", "assign_pilots",
           "lmmse_filter", "lmmse_estimate", "rzf_precoders",
           "zf_sensing_precoder", "rzf_regularizer"]


class DegenerateProjectionError(RuntimeError):
    """Sensing channel lies (numerically) inside the estimated UE subspace."""


@dataclass
class PilotAssignment:
    """Pilot index per UE plus the induced sharing groups."""

    pilot_index: np.ndarray          # (n_ue,) ints in [0, L_p)
    sharing_groups: list             # list over pilots of UE index lists

    def group_of(self, ue):
        return self.sharing_groups[self.pilot_index[ue]]


def assign_pilots(n_ues, pilot_len, channel_gains=None) -> PilotAssignment:
    """Orthogonal pilots when they suffice, otherwise greedy sharing.

    With more UEs than pilots, UEs are processed in descending order of their
    strongest-AP gain; each surplus UE joins the pilot whose current group has
    the least summed gain toward that UE's strongest AP.
    """
    if pilot_len < 1:
        raise ValueError("need at least one pilot")
    idx = np.full(n_ues, -1, dtype=int)
    if n_ues <= pilot_len:
        idx = np.arange(n_ues)
    else:
        if channel_gains is None:
            raise ValueError("channel gains required for pilot sharing")
        gains = np.asarray(channel_gains, dtype=float)
        order = np.argsort(-gains.max(axis=1), kind="stable")
        groups = [[] for _ in range(pilot_len)]
        for rank, ue in enumerate(order):
            if rank < pilot_len:
                pilot = rank
            else:
                k_star = int(np.argmax(gains[ue]))
                load = [sum(gains[j, k_star] for j in groups[t]) for t in range(pilot_len)]
                pilot = int(np.argmin(load))
            idx[ue] = pilot
            groups[pilot].append(int(ue))
    groups = [[int(u) for u in np.flatnonzero(idx == t)] for t in range(pilot_len)]
    return PilotAssignment(idx, groups)


def lmmse_filter(R_own, R_group_sum, pilot_energy, noise_power):
    """LMMSE estimation matrix: sqrt(E) R (E R_sum + sigma^2 I)^{-1}.

    `pilot_energy` is pilot power times pilot length; `R_group_sum` sums the
    total correlation matrices of every UE sharing the pilot (own included).
    The estimator is phase-unaware: the uniform LoS phase makes the channel
    zero-mean with total correlation h_bar h_bar^H + R_nlos.
    """
    m = R_own.shape[0]
    psi = pilot_energy * R_group_sum + noise_power * np.eye(m)
    return np.sqrt(pilot_energy) * R_own @ np.linalg.inv(psi)


def lmmse_estimate(pilot_obs, R_own, R_group_sum, pilot_energy, noise_power):
    """Estimate one UE-AP channel from the despread pilot observation."""
    return lmmse_filter(R_own, R_group_sum, pilot_energy, noise_power) @ pilot_obs


def rzf_regularizer(n_ues, noise_power, max_ap_power):
    """Default RZF regularization N_ue * sigma_n^2 / P_tx."""
    return n_ues * noise_power / max_ap_power


def rzf_precoders(h_hat, delta):
    """Unit-norm RZF precoders from collective channel estimates.

    `h_hat` has shape (..., dim, n_ue); returns matching unit-norm columns of
    (sum_j h_j h_j^H + delta I)^{-1} h_i, computed through the Gram matrix so
    only an n_ue x n_ue system is solved.
    """
    h_hat = np.asarray(h_hat)
    n = h_hat.shape[-1]
    gram = h_hat.conj().swapaxes(-1, -2) @ h_hat
    w_bar = h_hat @ np.linalg.solve(gram + delta * np.eye(n), np.eye(n))
    return w_bar / np.linalg.norm(w_bar, axis=-2, keepdims=True)


def zf_sensing_precoder(h_hat, h0):
    """Unit-norm sensing precoder orthogonal to every estimated UE channel.

    Projects h0 onto the complement of span{h_hat columns} with one
    reorthogonalization pass; raises DegenerateProjectionError when h0 lies in
    that span. Batched over leading axes.
    """
    h_hat = np.asarray(h_hat)
    h0 = np.asarray(h0)
    q, _ = np.linalg.qr(h_hat)
    qh = q.conj().swapaxes(-1, -2)
    w = h0 - np.squeeze(q @ (qh @ h0[..., None]), -1)
    w = w - np.squeeze(q @ (qh @ w[..., None]), -1)
    norm = np.linalg.norm(w, axis=-1)
    if np.any(norm < 1e-9 * np.linalg.norm(h0, axis=-1)):
        raise DegenerateProjectionError(
            "sensing direction lies in the estimated UE subspace")
    return w / norm[..., None]
