"""
Affine base-station supply power model.

P_supply = P_0 + l * P_tx for 0 <= P_tx <= P_max, with load dependence
eta_ld = l * P_max / (P_0 + l * P_max). Presets carry typical P_max and
eta_ld per BS type; P_0 is derived from a caller-supplied load factor.
"""

import logging
import math
from collections import OrderedDict
from dataclasses import dataclass
from typing import TYPE_CHECKING, Dict, List, Union

import numpy as np

from powerctl.link_model import dbm_to_watts
from powerctl.validators import (
    CapExceededError,
    ValidationError,
    validate_fraction,
    validate_non_negative,
    validate_positive,
)

if TYPE_CHECKING:
    from powerctl.allocator import Allocation

logger = logging.getLogger(__name__)

# Relative slack on the P_max comparison for powers produced by the solver.
CAP_TOLERANCE = 1e-9


@dataclass(frozen=True)
class PowerModel:
    """Idle power P_0, load factor l and maximum transmit power P_max."""

    p0_w: float
    load_factor: float
    p_max_w: float

    def __post_init__(self):
        validate_non_negative(self.p0_w, 'p0_w')
        validate_positive(self.load_factor, 'load_factor')
        validate_positive(self.p_max_w, 'p_max_w')

    @property
    def eta_ld(self) -> float:
        return load_dependence(self)

    def to_dict(self) -> Dict[str, float]:
        return {
            'p0_w': self.p0_w,
            'load_factor': self.load_factor,
            'p_max_w': self.p_max_w,
            'eta_ld': self.eta_ld,
        }


@dataclass(frozen=True)
class BsPreset:
    """Typical P_max and load dependence of one base-station type."""

    name: str
    p_max_dbm: float
    eta_ld: float

    def __post_init__(self):
        validate_fraction(self.eta_ld, f"{self.name} eta_ld")

    @property
    def p_max_w(self) -> float:
        return float(dbm_to_watts(self.p_max_dbm))


PRESETS: 'OrderedDict[str, BsPreset]' = OrderedDict(
    (preset.name, preset) for preset in (
        BsPreset('macro', 46.0, 0.50),
        BsPreset('micro', 38.0, 0.30),
        BsPreset('pico', 21.0, 0.14),
        BsPreset('femto', 17.0, 0.10),
    )
)


def get_preset(name: str) -> BsPreset:
    """Look up a preset by (case-insensitive) name."""
    preset = PRESETS.get((name or '').strip().lower())
    if preset is None:
        raise ValidationError(
            f"Invalid preset: {name}. Allowed: {', '.join(PRESETS)}"
        )
    return preset


def supply_power(model: PowerModel, p_tx_w: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """
    Supply power P_0 + l * P_tx.

    Raises:
        CapExceededError: If any P_tx exceeds the model's P_max
        ValidationError: If any P_tx is negative
    """
    p = np.asarray(p_tx_w, dtype=float)
    if np.any(p < 0):
        raise ValidationError("Transmit power must be >= 0")
    _check_cap(model, p)
    result = model.p0_w + model.load_factor * p
    return float(result) if np.ndim(p_tx_w) == 0 else result


def load_dependence(model: PowerModel) -> float:
    """Share of the maximum supply power that depends on load."""
    dynamic = model.load_factor * model.p_max_w
    return dynamic / (model.p0_w + dynamic)


def model_from_load_dependence(eta_ld: float, p_max_w: float,
                               load_factor: float = 1.0) -> PowerModel:
    """Invert the load-dependence definition for P_0 at a given P_max and l."""
    validate_fraction(eta_ld, 'eta_ld', closed_high=True)
    validate_positive(p_max_w, 'p_max_w')
    validate_positive(load_factor, 'load_factor')
    p0_w = load_factor * p_max_w * (1.0 - eta_ld) / eta_ld
    return PowerModel(p0_w=p0_w, load_factor=load_factor, p_max_w=p_max_w)


def model_from_preset(preset: Union[BsPreset, str], load_factor: float = 1.0) -> PowerModel:
    """
    Build a PowerModel from a BS preset.

    Args:
        preset: BsPreset or preset name
        load_factor: Slope l; P_0 follows from the preset's eta_ld

    Returns:
        PowerModel whose load dependence reproduces the preset's eta_ld
    """
    if isinstance(preset, str):
        preset = get_preset(preset)
    return model_from_load_dependence(preset.eta_ld, preset.p_max_w, load_factor)


def avg_supply_power(alloc: 'Allocation', model: PowerModel) -> float:
    """
    Time-averaged supply power sum_i mu_i * (P_0 + l * P_tx,i).

    The summation is checked against the closed form P_0 * sum(mu) + l * P_sys;
    a disagreement beyond rounding is logged.

    Raises:
        CapExceededError: If a link's transmit power exceeds P_max
    """
    mu = np.asarray(alloc.mu, dtype=float)
    p_tx = np.asarray(alloc.p_tx_w, dtype=float)
    _check_cap(model, p_tx)

    summed = float(np.sum(mu * (model.p0_w + model.load_factor * p_tx)))
    simplified = model.p0_w * float(np.sum(mu)) + model.load_factor * alloc.p_sys_w
    if not math.isclose(summed, simplified, rel_tol=1e-9, abs_tol=1e-300):
        logger.warning(
            f"Supply power mismatch: summation {summed:.12g} W vs "
            f"affine form {simplified:.12g} W"
        )
    return summed


def presets_table(load_factor: float = 1.0) -> List[Dict[str, float]]:
    """Preset rows with the derived P_0, for display."""
    rows = []
    for preset in PRESETS.values():
        model = model_from_preset(preset, load_factor)
        rows.append({
            'name': preset.name,
            'p_max_dbm': preset.p_max_dbm,
            'p_max_w': model.p_max_w,
            'eta_ld': preset.eta_ld,
            'load_factor': model.load_factor,
            'p0_w': model.p0_w,
        })
    return rows


def _check_cap(model: PowerModel, p: np.ndarray) -> None:
    if p.size and float(np.max(p)) > model.p_max_w * (1.0 + CAP_TOLERANCE):
        raise CapExceededError(
            f"Transmit power {float(np.max(p)):.6g} W exceeds P_max {model.p_max_w:.6g} W"
        )
