"""
Physical-layer quantities and the rate <-> power mappings.

Everything inside the package works in linear SI units (W, Hz, bit/s);
dB and dBm only appear at the file/flag boundary through the helpers
at the bottom of this module.
"""

import math
from dataclasses import dataclass, replace
from typing import Sequence, Tuple, Union

import numpy as np

from powerctl.validators import (
    DegenerateTimeShareError,
    InvalidConfigError,
    ValidationError,
)

# 2019 SI exact value
BOLTZMANN_J_PER_K = 1.380649e-23

# Largest accepted value of R / (W * mu); 2**1024 already overflows a double.
EXPONENT_LIMIT = 1024.0

DEFAULT_BANDWIDTH_HZ = 10e6
DEFAULT_NOISE_DBM = -103.0
DEFAULT_GAIN_DB = -100.0

Number = Union[float, np.ndarray]

EXPLICIT = 'explicit'
THERMAL = 'thermal'


class ExponentGuardError(ArithmeticError):
    """R / (W * mu) exceeded EXPONENT_LIMIT."""

    def __init__(self, exponent: float, limit: float = EXPONENT_LIMIT):
        super().__init__(
            f"Spectral efficiency exponent {exponent:.6g} exceeds limit {limit:g} "
            f"(rate too high for the available time share)"
        )
        self.exponent = exponent
        self.limit = limit

    def to_dict(self):
        return {'error': str(self), 'exponent': self.exponent, 'limit': self.limit}


@dataclass(frozen=True)
class NoiseConfig:
    """Bandwidth plus either an explicit noise power or a noise temperature."""

    bandwidth_hz: float = DEFAULT_BANDWIDTH_HZ
    mode: str = EXPLICIT
    noise_power_w: float = 0.0
    temperature_k: float = 290.0

    def __post_init__(self):
        if not (self.bandwidth_hz > 0) or math.isinf(self.bandwidth_hz):
            raise InvalidConfigError(f"bandwidth_hz must be > 0, got {self.bandwidth_hz}")
        if self.mode == EXPLICIT:
            if not (self.noise_power_w > 0) or math.isinf(self.noise_power_w):
                raise InvalidConfigError(
                    f"noise_power_w must be > 0 in explicit mode, got {self.noise_power_w}"
                )
        elif self.mode == THERMAL:
            if not (self.temperature_k > 0) or math.isinf(self.temperature_k):
                raise InvalidConfigError(
                    f"temperature_k must be > 0 in thermal mode, got {self.temperature_k}"
                )
        else:
            raise InvalidConfigError(
                f"Invalid noise mode: {self.mode}. Allowed: {EXPLICIT}, {THERMAL}"
            )

    @classmethod
    def explicit_dbm(cls, noise_dbm: float = DEFAULT_NOISE_DBM,
                     bandwidth_hz: float = DEFAULT_BANDWIDTH_HZ) -> 'NoiseConfig':
        return cls(bandwidth_hz=bandwidth_hz, mode=EXPLICIT,
                   noise_power_w=float(dbm_to_watts(noise_dbm)))

    @classmethod
    def reference(cls) -> 'NoiseConfig':
        """10 MHz bandwidth with -103 dBm noise."""
        return cls.explicit_dbm(DEFAULT_NOISE_DBM, DEFAULT_BANDWIDTH_HZ)

    @classmethod
    def thermal(cls, bandwidth_hz: float = DEFAULT_BANDWIDTH_HZ,
                temperature_k: float = 290.0) -> 'NoiseConfig':
        return cls(bandwidth_hz=bandwidth_hz, mode=THERMAL, temperature_k=temperature_k)


@dataclass(frozen=True)
class LinkSpec:
    """One mobile: linear channel gain and average target rate."""

    gain_linear: float
    target_rate_bps: float

    def __post_init__(self):
        if not (self.gain_linear > 0) or math.isinf(self.gain_linear):
            raise InvalidConfigError(f"gain_linear must be > 0, got {self.gain_linear}")
        if not (self.target_rate_bps >= 0) or math.isinf(self.target_rate_bps):
            raise InvalidConfigError(
                f"target_rate_bps must be >= 0, got {self.target_rate_bps}"
            )

    @classmethod
    def from_db(cls, gain_db: float, rate_bps: float) -> 'LinkSpec':
        return cls(gain_linear=float(db_to_linear(gain_db)), target_rate_bps=float(rate_bps))


@dataclass(frozen=True)
class Scenario:
    """A cell: noise configuration, ordered links and per-link transmit cap."""

    noise: NoiseConfig
    links: Tuple[LinkSpec, ...]
    p_max_w: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, 'links', tuple(self.links))
        if not self.links:
            raise InvalidConfigError("Scenario needs at least one link")
        if not (self.p_max_w > 0):
            raise InvalidConfigError(f"p_max_w must be > 0, got {self.p_max_w}")

    @property
    def n_links(self) -> int:
        return len(self.links)

    @property
    def is_bounded(self) -> bool:
        return math.isfinite(self.p_max_w)

    @property
    def gains(self) -> np.ndarray:
        return np.array([link.gain_linear for link in self.links], dtype=float)

    @property
    def rates(self) -> np.ndarray:
        return np.array([link.target_rate_bps for link in self.links], dtype=float)

    @property
    def active_indices(self) -> np.ndarray:
        """Indices of links with a positive target rate."""
        return np.flatnonzero(self.rates > 0)

    def with_rates(self, rates: Sequence[float]) -> 'Scenario':
        if len(rates) != self.n_links:
            raise ValidationError(f"Expected {self.n_links} rates, got {len(rates)}")
        links = tuple(LinkSpec(link.gain_linear, float(r)) for link, r in zip(self.links, rates))
        return replace(self, links=links)

    def with_gain(self, index: int, gain_linear: float) -> 'Scenario':
        links = list(self.links)
        links[index] = LinkSpec(gain_linear, links[index].target_rate_bps)
        return replace(self, links=tuple(links))


def noise_power(cfg: NoiseConfig) -> float:
    """
    Resolve the noise power N0 in watts.

    Thermal mode evaluates W * k * T; explicit mode returns the stored value.
    """
    if cfg.mode == THERMAL:
        return cfg.bandwidth_hz * BOLTZMANN_J_PER_K * cfg.temperature_k
    return cfg.noise_power_w


def shannon_rate(p_tx_w: Number, gain_linear: Number, cfg: NoiseConfig) -> Number:
    """
    Shannon rate W * log2(1 + G * P / N0) in bit/s.

    Args:
        p_tx_w: Transmit power(s) in W, >= 0
        gain_linear: Linear channel gain(s), > 0
        cfg: Noise configuration

    Raises:
        ValidationError: On negative power or non-positive gain
    """
    p = np.asarray(p_tx_w, dtype=float)
    g = np.asarray(gain_linear, dtype=float)
    if np.any(p < 0):
        raise ValidationError("Transmit power must be >= 0")
    if np.any(g <= 0):
        raise ValidationError("Channel gain must be > 0")

    snr = g * p / noise_power(cfg)
    rate = cfg.bandwidth_hz * np.log1p(snr) / math.log(2.0)
    return _like(rate, p_tx_w, gain_linear)


def required_tx_power(avg_rate_bps: Number, mu: Number, gain_linear: Number,
                      cfg: NoiseConfig) -> Number:
    """
    Transmit power that delivers an average rate within time share mu.

    Returns (N0 / G) * (2 ** (R / (W * mu)) - 1), the exact inverse of
    ``shannon_rate`` combined with R_avg = mu * R.

    Raises:
        DegenerateTimeShareError: If any mu <= 0
        ExponentGuardError: If R / (W * mu) exceeds EXPONENT_LIMIT
    """
    rate = np.asarray(avg_rate_bps, dtype=float)
    share = np.asarray(mu, dtype=float)
    gain = np.asarray(gain_linear, dtype=float)
    if np.any(share <= 0):
        raise DegenerateTimeShareError(f"Time share must be > 0, got {mu}")
    if np.any(rate < 0):
        raise ValidationError("Average rate must be >= 0")
    if np.any(gain <= 0):
        raise ValidationError("Channel gain must be > 0")

    exponent = spectral_exponent(rate, share, cfg)
    power = noise_power(cfg) / gain * np.expm1(exponent * math.log(2.0))
    return _like(power, avg_rate_bps, mu, gain_linear)


def spectral_exponent(avg_rate_bps: Number, mu: Number, cfg: NoiseConfig) -> np.ndarray:
    """R / (W * mu), checked against EXPONENT_LIMIT."""
    exponent = np.asarray(avg_rate_bps, dtype=float) / (cfg.bandwidth_hz * np.asarray(mu, dtype=float))
    worst = float(np.max(exponent)) if exponent.size else 0.0
    if worst > EXPONENT_LIMIT:
        raise ExponentGuardError(worst)
    return exponent


# dB helpers, used at the I/O boundary only

def db_to_linear(value_db: Number) -> Number:
    return _like(np.power(10.0, np.asarray(value_db, dtype=float) / 10.0), value_db)


def linear_to_db(value: Number) -> Number:
    with np.errstate(divide='ignore'):
        return _like(10.0 * np.log10(np.asarray(value, dtype=float)), value)


def dbm_to_watts(value_dbm: Number) -> Number:
    return _like(np.power(10.0, (np.asarray(value_dbm, dtype=float) - 30.0) / 10.0), value_dbm)


def watts_to_dbm(value_w: Number) -> Number:
    with np.errstate(divide='ignore'):
        return _like(10.0 * np.log10(np.asarray(value_w, dtype=float)) + 30.0, value_w)


def _like(result: np.ndarray, *inputs) -> Number:
    """Return a python float when every input was a scalar."""
    if all(np.ndim(x) == 0 for x in inputs):
        return float(result)
    return result
