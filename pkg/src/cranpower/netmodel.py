"""Physical layer of the single-cell C-RAN: channel realizations, SINR,
achievable rate, and the three-part RRH power accounting (transmit, state,
transition).

All physics runs in linear units (W, dimensionless ratios). dB/dBm inputs
are converted once, at config load time.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np


class ConfigError(ValueError):
    """Invalid network configuration; carries the offending key."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"config key '{key}': {message}")


def dbm_to_w(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class NetworkConfig:
    """All physical constants of the cell plus topology sizes and demand ranges.

    Single source of truth: every other module takes its physics from here.
    """

    num_rrhs: int = 8
    num_users: int = 4
    bandwidth_hz: float = 10e6
    max_tx_power_w: float = 1.0
    active_power_w: float = 6.8
    sleep_power_w: float = 4.3
    transition_power_w: float = 2.0
    noise_power_w: float = dbm_to_w(-102.0)
    antenna_gain_db: float = 9.0
    shadowing_std_db: float = 8.0
    amplifier_efficiency: float = 0.25
    sinr_margin: float = 1.0
    demand_min_mbps: float = 20.0
    demand_max_mbps: float = 40.0
    cell_radius_m: float = 800.0
    slot_duration_ms: float = 100.0

    def __post_init__(self):
        _validate_config(self)

    @property
    def antenna_gain_linear(self) -> float:
        return db_to_linear(self.antenna_gain_db)

    @classmethod
    def from_dict(cls, raw: dict) -> "NetworkConfig":
        """Build from a config mapping.

        Accepts either `noise_power_w` or `noise_power_dbm` (converted);
        unknown keys are rejected so typos surface immediately.
        """
        known = set(cls.__dataclass_fields__)
        values = {}
        for key, val in raw.items():
            if key == "noise_power_dbm":
                if "noise_power_w" in raw:
                    raise ConfigError(key, "give noise as dBm or W, not both")
                values["noise_power_w"] = dbm_to_w(float(val))
            elif key in known:
                values[key] = type(cls.__dataclass_fields__[key].default)(val)
            else:
                raise ConfigError(key, "unknown key")
        return cls(**values)

    @classmethod
    def from_file(cls, path) -> "NetworkConfig":
        """Load from a JSON file, either a bare mapping or one with a
        'network' section (a full run config)."""
        with open(path) as f:
            raw = json.load(f)
        if "network" in raw:
            raw = raw["network"]
        return cls.from_dict(raw)


def _validate_config(cfg: NetworkConfig):
    positive = [
        "bandwidth_hz", "max_tx_power_w", "active_power_w", "sleep_power_w",
        "transition_power_w", "noise_power_w", "cell_radius_m",
        "slot_duration_ms",
    ]
    for key in positive:
        if not getattr(cfg, key) > 0:
            raise ConfigError(key, "must be strictly positive")
    if cfg.num_rrhs < 1:
        raise ConfigError("num_rrhs", "need at least one RRH")
    if cfg.num_users < 1:
        raise ConfigError("num_users", "need at least one user")
    if not 0 < cfg.amplifier_efficiency <= 1:
        raise ConfigError("amplifier_efficiency", "must be in (0, 1]")
    if cfg.sinr_margin < 1:
        raise ConfigError("sinr_margin", "must be >= 1")
    if cfg.shadowing_std_db < 0:
        raise ConfigError("shadowing_std_db", "must be >= 0")
    if cfg.demand_min_mbps < 0:
        raise ConfigError("demand_min_mbps", "must be >= 0")
    if cfg.demand_min_mbps > cfg.demand_max_mbps:
        raise ConfigError("demand_min_mbps", "must be <= demand_max_mbps")
    # Sleeping must actually save energy, otherwise the control problem is void.
    if not cfg.sleep_power_w < cfg.active_power_w:
        raise ConfigError("sleep_power_w", "must be < active_power_w")


@dataclass(frozen=True)
class ChannelRealization:
    """Complex gains indexed (rrh, user). Positions are not retained."""

    gains: np.ndarray

    def __post_init__(self):
        if self.gains.ndim != 2:
            raise ValueError("channel gains must be a 2-D (rrh, user) matrix")
        if not np.all(np.isfinite(self.gains.view(float))):
            raise ValueError("channel gains must be finite")

    @property
    def num_rrhs(self) -> int:
        return self.gains.shape[0]

    @property
    def num_users(self) -> int:
        return self.gains.shape[1]


@dataclass
class SystemState:
    """RRH on/off pattern plus per-user demands; the RL state."""

    rrh_active: np.ndarray
    demands_mbps: np.ndarray

    def __post_init__(self):
        self.rrh_active = np.asarray(self.rrh_active, dtype=bool)
        self.demands_mbps = np.asarray(self.demands_mbps, dtype=float)

    def features(self) -> np.ndarray:
        """Flat feature vector of length m+n: [y_1..y_m, d_1..d_n]."""
        return np.concatenate([self.rrh_active.astype(float), self.demands_mbps])


@dataclass(frozen=True)
class PowerBreakdown:
    transmit_w: float
    state_w: float
    transition_w: float
    total_w: float


def path_loss_db(distance_km: float) -> float:
    """Macro-cell path loss, 148.1 + 37.6*log10(d[km])."""
    if np.any(np.asarray(distance_km) <= 0):
        raise ValueError("distance must be strictly positive")
    return 148.1 + 37.6 * np.log10(distance_km)


def channel_coefficient(distance_m, shadowing_db, small_scale, config: NetworkConfig):
    """Single channel coefficient h = 10^(-L/20) * sqrt(phi * s) * G.

    Vectorized; `distance_m` is clamped at 1 m to keep the path loss finite.
    """
    d_km = np.maximum(np.asarray(distance_m, dtype=float), 1.0) / 1000.0
    loss = path_loss_db(d_km)
    shadow_lin = db_to_linear(np.asarray(shadowing_db, dtype=float))
    amp = 10.0 ** (-loss / 20.0) * np.sqrt(config.antenna_gain_linear * shadow_lin)
    return amp * small_scale


def sample_channel(config: NetworkConfig, rng: np.random.Generator) -> ChannelRealization:
    """Draw one full channel realization.

    Per (rrh, user) pair: distance uniform on [0, cell_radius_m] (min 1 m),
    log-normal shadowing, circularly-symmetric unit-variance small-scale fading.
    """
    shape = (config.num_rrhs, config.num_users)
    distance_m = rng.uniform(0.0, config.cell_radius_m, size=shape)
    shadowing_db = (
        rng.normal(0.0, config.shadowing_std_db, size=shape)
        if config.shadowing_std_db > 0 else np.zeros(shape)
    )
    small_scale = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    gains = channel_coefficient(distance_m, shadowing_db, small_scale, config)
    return ChannelRealization(gains=gains)


def compute_sinr(weights: np.ndarray, channel: ChannelRealization,
                 user_index: int, noise_w: float) -> float:
    """SINR of one user: |h_i^T w_i|^2 / (sum_{j != i} |h_i^T w_j|^2 + noise)."""
    if weights.shape != channel.gains.shape:
        raise ValueError(
            f"weights shape {weights.shape} != channel shape {channel.gains.shape}")
    if not noise_w > 0:
        raise ValueError("noise power must be strictly positive")
    h = channel.gains[:, user_index]
    received = np.abs(h @ weights) ** 2
    signal = received[user_index]
    interference = float(np.sum(received)) - float(signal)
    return float(signal / (interference + noise_w))


def compute_rate(sinr: float, config: NetworkConfig) -> float:
    """Shannon rate with SINR margin, in Mbps."""
    if sinr < 0:
        raise ValueError("SINR must be >= 0")
    return config.bandwidth_hz * math.log2(1.0 + sinr / config.sinr_margin) / 1e6


def rrh_power(active: bool, tx_power_w: float, config: NetworkConfig) -> float:
    """Linear per-RRH power model: standby plus amplifier-scaled transmit."""
    if tx_power_w < 0:
        raise ValueError("transmit power must be >= 0")
    if not active:
        if tx_power_w != 0:
            raise ValueError("sleeping RRH cannot transmit")
        return config.sleep_power_w
    return config.active_power_w + tx_power_w / config.amplifier_efficiency


def state_and_transition_power(prev_pattern, next_pattern, config: NetworkConfig):
    """Standby power of `next_pattern` and the mode-switch cost from `prev_pattern`.

    Shared by the exact and surrogate reward paths so the two modes can only
    ever differ in the transmit term.
    """
    prev = np.asarray(prev_pattern, dtype=bool)
    nxt = np.asarray(next_pattern, dtype=bool)
    if prev.shape != nxt.shape or prev.ndim != 1:
        raise ValueError("patterns must be equal-length 1-D boolean vectors")
    if prev.size != config.num_rrhs:
        raise ValueError(f"pattern length {prev.size} != num_rrhs {config.num_rrhs}")
    n_active = int(np.count_nonzero(nxt))
    state_w = n_active * config.active_power_w + (nxt.size - n_active) * config.sleep_power_w
    transition_w = int(np.count_nonzero(prev != nxt)) * config.transition_power_w
    return state_w, transition_w


def total_power(prev_pattern, next_pattern, per_rrh_tx_w, config: NetworkConfig) -> PowerBreakdown:
    """Total system power for one slot, broken into its three parts."""
    nxt = np.asarray(next_pattern, dtype=bool)
    tx = np.asarray(per_rrh_tx_w, dtype=float)
    if tx.shape != nxt.shape:
        raise ValueError("transmit power vector length must match pattern length")
    if np.any(tx[~nxt] != 0):
        raise ValueError("sleeping RRHs must have zero transmit power")
    if np.any(tx < 0):
        raise ValueError("transmit powers must be >= 0")
    state_w, transition_w = state_and_transition_power(prev_pattern, next_pattern, config)
    transmit_w = float(np.sum(tx[nxt] / config.amplifier_efficiency))
    total_w = transmit_w + state_w + transition_w
    return PowerBreakdown(transmit_w=transmit_w, state_w=state_w,
                          transition_w=transition_w, total_w=total_w)


def sample_demands(config: NetworkConfig, rng: np.random.Generator) -> np.ndarray:
    """Per-user demands, continuous uniform on [demand_min, demand_max] Mbps."""
    return rng.uniform(config.demand_min_mbps, config.demand_max_mbps,
                       size=config.num_users)
