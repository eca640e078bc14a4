"""Finite-blocklength URLLC math.

Q-function machinery, the decoding-error-probability (DEP) upper bound for a
given effective SINR, the equivalent per-UE SINR thresholds, transmission
delay / blocklength limits, and the energy-efficiency objective.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, erfcinv

__all__ = [
    "UrllcTargets",
    "q_function",
    "q_inverse",
    "dep_upper_bound",
    "sinr_threshold",
    "delay_upper_bound",
    "max_blocklength",
    "energy_efficiency",
]

_SQRT2 = np.sqrt(2.0)


def q_function(x):
    """Upper-tail probability of the standard normal, Q(x) = P(N(0,1) > x)."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / _SQRT2)


def q_inverse(p):
    """Inverse of q_function. Requires 0 < p < 1."""
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise ValueError("q_inverse requires 0 < p < 1")
    return _SQRT2 * erfcinv(2.0 * p)


def dep_upper_bound(sinr, L, L_p, bits):
    """Upper bound on the DEP when sending `bits` over L - L_p data symbols.

    Q(sqrt(L - L_p) * [ln(1 + sinr) - bits*ln2/(L - L_p)]).
    """
    if L <= L_p:
        raise ValueError("blocklength must exceed pilot length")
    ld = float(L - L_p)
    arg = np.sqrt(ld) * (np.log1p(np.asarray(sinr, dtype=float)) - bits * np.log(2.0) / ld)
    return q_function(arg)


def sinr_threshold(eps_th, L, L_p, bits):
    """Minimum SINR so that dep_upper_bound stays below eps_th.

    Exact inverse of dep_upper_bound in the SINR argument.
    """
    if L <= L_p:
        raise ValueError("blocklength must exceed pilot length")
    ld = float(L - L_p)
    with np.errstate(over="ignore"):    # inf signals an unattainable demand
        return np.expm1(q_inverse(eps_th) / np.sqrt(ld)
                        + np.asarray(bits, dtype=float) * np.log(2.0) / ld)


def delay_upper_bound(L, bandwidth, eps_th):
    """Retransmission-averaged transmission delay bound, L / (B*(1 - eps_th))."""
    eps_th = np.asarray(eps_th, dtype=float)
    if np.any(eps_th >= 1.0):
        raise ValueError("eps_th must be < 1")
    return L / (bandwidth * (1.0 - eps_th))


@dataclass
class UrllcTargets:
    """Per-UE URLLC requirements plus the shared frame parameters."""

    bits: np.ndarray          # packet size per UE [bits]
    eps_th: np.ndarray        # DEP threshold per UE
    delay_th: np.ndarray      # delay threshold per UE [s]
    blocklength: int          # L [symbols]
    pilot_len: int            # L_p [symbols]
    bandwidth: float          # B [Hz]

    def __post_init__(self):
        self.bits = np.atleast_1d(np.asarray(self.bits, dtype=float))
        self.eps_th = np.atleast_1d(np.asarray(self.eps_th, dtype=float))
        self.delay_th = np.atleast_1d(np.asarray(self.delay_th, dtype=float))
        n = max(self.bits.size, self.eps_th.size, self.delay_th.size)
        self.bits = np.broadcast_to(self.bits, (n,)).copy()
        self.eps_th = np.broadcast_to(self.eps_th, (n,)).copy()
        self.delay_th = np.broadcast_to(self.delay_th, (n,)).copy()
        if self.blocklength <= self.pilot_len:
            raise ValueError("blocklength must exceed pilot length")
        if np.any(self.eps_th <= 0.0) or np.any(self.eps_th >= 0.5):
            raise ValueError("DEP thresholds must lie in (0, 0.5)")

    @property
    def n_ues(self):
        return self.bits.size

    @property
    def data_len(self):
        return self.blocklength - self.pilot_len

    @property
    def eps_max(self):
        return float(np.max(self.eps_th))

    def gamma_c(self):
        """Per-UE communication SINR thresholds."""
        return sinr_threshold(self.eps_th, self.blocklength, self.pilot_len, self.bits)


def max_blocklength(targets: UrllcTargets):
    """Largest blocklength that keeps every UE's delay bound below its threshold."""
    lmax = int(np.floor(np.min(targets.delay_th * targets.bandwidth * (1.0 - targets.eps_th))))
    if lmax <= targets.pilot_len:
        raise ValueError("delay thresholds leave no room for data symbols")
    return lmax


def energy_efficiency(rho, targets: UrllcTargets):
    """Delivered bits per joule for the power allocation `rho` (sqrt-power vector)."""
    p_total = float(np.dot(rho, rho))
    if p_total <= 0.0:
        raise ValueError("total power must be positive")
    return targets.bandwidth * float(np.sum(targets.bits)) * (1.0 - targets.eps_max) / (
        targets.data_len * p_total
    )
