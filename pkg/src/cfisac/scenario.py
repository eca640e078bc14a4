"""Network configuration, geometry, and reproducible randomness.

Everything random in a run derives from one 64-bit seed through counter-based
sub-streams keyed by (stage, trial), so that geometry draws, shadowing, fading
and symbol draws are independently reproducible and parallel trials never
share generator state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

__all__ = ["ConfigError", "ScaParams", "SystemConfig", "Geometry", "Scenario",
           "build_scenario", "drop_ues", "load_config", "substream",
           "azimuth_elevation", "distance_3d"]

SPEED_OF_LIGHT = 299792458.0

# fixed sub-stream indices; a new stage must be appended, never reordered
_STAGES = {"geometry": 0, "ue_drop": 1, "shadowing": 2, "fading": 3, "symbols": 4}

MIN_UE_AP_DISTANCE = 10.0


class ConfigError(ValueError):
    """Raised for inconsistent or out-of-range configuration."""


def substream(seed, stage, trial=0):
    """Independent Generator for (seed, stage, trial)."""
    if stage not in _STAGES:
        raise KeyError(f"unknown RNG stage {stage!r}")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(_STAGES[stage], int(trial)))
    return np.random.default_rng(ss)


@dataclass(frozen=True)
class ScaParams:
    """Stopping and penalty parameters of the successive convex approximation loop."""

    epsilon: float = 1e-3       # |f(c) - f(c-1)| stopping tolerance
    epsilon_chi: float = 1e-6   # slack zero-out threshold
    penalty: float = 10.0       # slack penalty weight
    max_iterations: int = 50


@dataclass(frozen=True)
class SystemConfig:
    """All scalar parameters of one experiment instance (defaults: evaluation setup)."""

    n_tx_aps: int = 16
    n_rx_aps: int = 2
    n_ues: int = 8
    antennas_per_ap: int = 4
    area_side: float = 500.0            # m
    carrier_freq: float = 1.9e9         # Hz
    bandwidth: float = 200e3            # Hz
    noise_power_dbm: float = -114.0
    max_ap_power: float = 0.1           # W
    pilot_power: float = 0.05           # W
    pilot_len: int = 10                 # symbols
    blocklength: int = 180              # symbols
    packet_bits: float = 256.0          # per UE
    dep_threshold: float = 1e-5
    delay_threshold: float = 1e-3       # s
    sensing_sinr_threshold_db: float = 3.0
    rcs_dbsm: float = 10.0              # bistatic RCS variance in dB(m^2)
    clutter_scaling: float = 0.3
    asd_deg: float = 15.0               # angular spread of local scattering
    ap_height: float = 10.0             # m
    ue_height: float = 1.5              # m
    target_height: float = 1.5          # m
    rx_ap_offsets: tuple = ((-50.0, 0.0), (50.0, 0.0))  # from target, m
    random_ap_layout: bool = False
    sca: ScaParams = field(default_factory=ScaParams)
    mc_inner: int = 300                 # channel realizations per trial
    rng_seed: int = 1

    # -- derived quantities ------------------------------------------------
    @property
    def noise_power(self):
        """Noise power in W (linear)."""
        return 10.0 ** ((self.noise_power_dbm - 30.0) / 10.0)

    @property
    def wavelength(self):
        return SPEED_OF_LIGHT / self.carrier_freq

    @property
    def rcs_variance(self):
        """RCS variance in m^2 (linear)."""
        return 10.0 ** (self.rcs_dbsm / 10.0)

    @property
    def sensing_sinr_threshold(self):
        return 10.0 ** (self.sensing_sinr_threshold_db / 10.0)

    @property
    def data_len(self):
        return self.blocklength - self.pilot_len

    def validate(self):
        if min(self.n_tx_aps, self.n_rx_aps, self.n_ues, self.antennas_per_ap) < 1:
            raise ConfigError("counts must be positive")
        if self.area_side <= 0.0:
            raise ConfigError("area_side must be positive")
        for name in ("max_ap_power", "pilot_power", "bandwidth", "carrier_freq",
                     "dep_threshold", "delay_threshold", "clutter_scaling"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"{name} must be positive")
        if not (0.0 < self.dep_threshold < 0.5):
            raise ConfigError("dep_threshold must lie in (0, 0.5)")
        if self.blocklength <= self.pilot_len:
            raise ConfigError("blocklength must exceed pilot_len")
        lmax = math.floor(self.delay_threshold * self.bandwidth * (1.0 - self.dep_threshold))
        if self.blocklength > lmax:
            raise ConfigError(
                f"blocklength {self.blocklength} exceeds delay-limited maximum {lmax}")
        return self

    def targets(self):
        from .urllc import UrllcTargets

        return UrllcTargets(
            bits=np.full(self.n_ues, self.packet_bits),
            eps_th=np.full(self.n_ues, self.dep_threshold),
            delay_th=np.full(self.n_ues, self.delay_threshold),
            blocklength=self.blocklength,
            pilot_len=self.pilot_len,
            bandwidth=self.bandwidth,
        )


@dataclass
class Geometry:
    """2D positions (m) plus the fixed heights used for elevation angles."""

    tx_ap_positions: np.ndarray   # (n_tx, 2)
    rx_ap_positions: np.ndarray   # (n_rx, 2)
    ue_positions: np.ndarray      # (n_ue, 2)
    target_position: np.ndarray   # (2,)
    ap_height: float
    ue_height: float
    target_height: float


@dataclass
class Scenario:
    """Immutable bundle of configuration and geometry; share freely across workers."""

    config: SystemConfig
    geometry: Geometry


def _grid_positions(n, side):
    """First n cell centers of the smallest square grid with >= n cells."""
    g = math.isqrt(n)
    if g * g < n:
        g += 1
    step = side / g
    pts = [((i % g + 0.5) * step, (i // g + 0.5) * step) for i in range(n)]
    return np.asarray(pts[:n], dtype=float)


def azimuth_elevation(from_xy, from_h, to_xy, to_h):
    """Azimuth (atan2) and elevation angle from one point to another, in rad."""
    d = np.asarray(to_xy, dtype=float) - np.asarray(from_xy, dtype=float)
    az = np.arctan2(d[..., 1], d[..., 0])
    d2 = np.hypot(d[..., 0], d[..., 1])
    el = np.arctan2(to_h - from_h, d2)
    return az, el


def distance_3d(from_xy, from_h, to_xy, to_h, min_2d=0.0):
    d = np.asarray(to_xy, dtype=float) - np.asarray(from_xy, dtype=float)
    d2 = np.maximum(np.hypot(d[..., 0], d[..., 1]), min_2d)
    return np.hypot(d2, to_h - from_h)


def build_scenario(config: SystemConfig) -> Scenario:
    """Deterministic scenario for one configuration.

    Transmit APs sit on a uniform grid unless `random_ap_layout` is set; the
    target sits at the area center and the receive APs at fixed offsets from
    it. UE positions are the trial-0 drop.
    """
    config.validate()
    side = config.area_side
    if config.random_ap_layout:
        rng = substream(config.rng_seed, "geometry")
        tx = rng.uniform(0.0, side, size=(config.n_tx_aps, 2))
    else:
        tx = _grid_positions(config.n_tx_aps, side)
    target = np.array([side / 2.0, side / 2.0])
    offsets = np.asarray(config.rx_ap_offsets, dtype=float)
    if offsets.shape[0] != config.n_rx_aps:
        raise ConfigError("rx_ap_offsets count must match n_rx_aps")
    rx = target[None, :] + offsets
    geom = Geometry(tx, rx, np.zeros((config.n_ues, 2)), target,
                    config.ap_height, config.ue_height, config.target_height)
    scenario = Scenario(config, geom)
    geom.ue_positions = drop_ues(scenario, 0).ue_positions
    return scenario


def drop_ues(scenario: Scenario, trial_index: int) -> Geometry:
    """Geometry with freshly drawn i.i.d. uniform UE positions for one trial.

    Deterministic per (seed, trial_index). Positions closer than 10 m (2D) to
    any AP are redrawn.
    """
    if trial_index < 0:
        raise ValueError("trial_index must be >= 0")
    cfg = scenario.config
    geom = scenario.geometry
    rng = substream(cfg.rng_seed, "ue_drop", trial_index)
    aps = np.vstack([geom.tx_ap_positions, geom.rx_ap_positions])
    ues = np.empty((cfg.n_ues, 2))
    for i in range(cfg.n_ues):
        while True:
            p = rng.uniform(0.0, cfg.area_side, size=2)
            d2 = np.hypot(*(aps - p[None, :]).T)
            if np.min(d2) >= MIN_UE_AP_DISTANCE:
                ues[i] = p
                break
    return replace(geom, ue_positions=ues)


# ---------------------------------------------------------------------------
# flat key = value configuration files
# ---------------------------------------------------------------------------

_INT_FIELDS = {"n_tx_aps", "n_rx_aps", "n_ues", "antennas_per_ap", "pilot_len",
               "blocklength", "mc_inner", "rng_seed", "sca_max_iterations"}
_BOOL_FIELDS = {"random_ap_layout"}
_SCA_KEYS = {"sca_epsilon": "epsilon", "sca_epsilon_chi": "epsilon_chi",
             "sca_penalty": "penalty", "sca_max_iterations": "max_iterations"}


def _parse_value(key, raw):
    raw = raw.strip()
    if key in _BOOL_FIELDS:
        if raw.lower() in ("1", "true", "yes"):
            return True
        if raw.lower() in ("0", "false", "no"):
            return False
        raise ConfigError(f"bad boolean for {key}: {raw!r}")
    if key == "rx_ap_offsets":
        pairs = []
        for part in raw.split(";"):
            x, y = part.split(",")
            pairs.append((float(x), float(y)))
        return tuple(pairs)
    if key in _INT_FIELDS:
        return int(raw)
    return float(raw)


def load_config(path=None, overrides=None) -> SystemConfig:
    """SystemConfig from a flat `key = value` file plus key=value overrides.

    Keys are the SystemConfig field names; SCA parameters use the prefixed
    keys sca_epsilon, sca_epsilon_chi, sca_penalty, sca_max_iterations.
    Unknown keys are an error.
    """
    entries = {}
    if path is not None:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key = value")
                key, raw = line.split("=", 1)
                entries[key.strip()] = raw
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        entries[key.strip()] = raw

    known = {f.name for f in fields(SystemConfig)} - {"sca"}
    kwargs, sca_kwargs = {}, {}
    for key, raw in entries.items():
        if key in _SCA_KEYS:
            sca_kwargs[_SCA_KEYS[key]] = _parse_value(key, raw)
        elif key in known:
            kwargs[key] = _parse_value(key, raw)
        else:
            raise ConfigError(f"unknown configuration key {key!r}")
    try:
        cfg = SystemConfig(sca=ScaParams(**sca_kwargs), **kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()
