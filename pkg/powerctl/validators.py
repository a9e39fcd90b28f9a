"""
Input validation utilities for scenarios, CLI flags and API payloads.

This module provides validation functions for common input types:
- Positive / non-negative physical quantities
- Fractions and tolerances
- dB ranges given as ``lo:hi``
- Comma-separated number and name lists
"""

import math
from typing import Iterable, List, Optional, Sequence, Tuple


class ValidationError(Exception):
    """Exception raised for validation errors."""
    pass


class InvalidConfigError(ValidationError):
    """A physical-layer configuration value is out of range."""
    pass


class DegenerateTimeShareError(ValidationError):
    """A time share mu was zero or negative where a positive one is required."""
    pass


class ZeroDemandError(ValidationError):
    """No link demands a positive rate."""
    pass


class DimensionError(ValidationError):
    """The problem has more links than the exhaustive grid can handle."""
    pass


class CapExceededError(ValidationError):
    """A transmit power exceeds the power model's P_max."""
    pass


def validate_positive(value, name: str, allow_inf: bool = False) -> float:
    """
    Validate a strictly positive number.

    Args:
        value: Number (or numeric string) to check
        name: Parameter name used in the error message
        allow_inf: Whether +inf is acceptable

    Returns:
        The value as float

    Raises:
        ValidationError: If value is not a finite positive number
    """
    number = _as_float(value, name)
    if math.isnan(number) or number <= 0:
        raise ValidationError(f"{name} must be > 0, got {value}")
    if math.isinf(number) and not allow_inf:
        raise ValidationError(f"{name} must be finite, got {value}")
    return number


def validate_non_negative(value, name: str) -> float:
    """Validate a finite number >= 0."""
    number = _as_float(value, name)
    if math.isnan(number) or math.isinf(number) or number < 0:
        raise ValidationError(f"{name} must be >= 0, got {value}")
    return number


def validate_fraction(value, name: str, closed_low: bool = False,
                      closed_high: bool = False) -> float:
    """
    Validate a number inside the unit interval.

    Args:
        value: Number to check
        name: Parameter name used in the error message
        closed_low: Accept 0
        closed_high: Accept 1

    Returns:
        The value as float

    Raises:
        ValidationError: If value falls outside the interval
    """
    number = _as_float(value, name)
    low_ok = number >= 0 if closed_low else number > 0
    high_ok = number <= 1 if closed_high else number < 1
    if math.isnan(number) or not (low_ok and high_ok):
        left = '[' if closed_low else '('
        right = ']' if closed_high else ')'
        raise ValidationError(f"{name} must lie in {left}0, 1{right}, got {value}")
    return number


def validate_int_range(value, name: str, minimum: int = 1,
                      maximum: Optional[int] = None) -> int:
    """Validate an integer with inclusive bounds."""
    try:
        number = int(value)
    except (TypeError, ValueError):
        raise ValidationError(f"Invalid {name}: {value}")
    if isinstance(value, float) and not value.is_integer():
        raise ValidationError(f"Invalid {name}: {value}")
    if number < minimum:
        raise ValidationError(f"{name} must be >= {minimum}")
    if maximum is not None and number > maximum:
        raise ValidationError(f"{name} must be <= {maximum}")
    return number


def parse_range_db(text: str) -> Tuple[float, float]:
    """
    Parse an inclusive dB range written as ``lo:hi``.

    Args:
        text: Range string, e.g. ``0:40``

    Returns:
        Tuple of (lo, hi)

    Raises:
        ValidationError: If the format is wrong or lo > hi
    """
    if not text:
        raise ValidationError("Range is required (format lo:hi)")

    parts = text.split(':')
    if len(parts) != 2:
        raise ValidationError(f"Invalid range format: {text}. Use lo:hi")

    lo = _as_float(parts[0], 'range lower bound')
    hi = _as_float(parts[1], 'range upper bound')
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValidationError(f"Range bounds must be finite: {text}")
    if lo > hi:
        raise ValidationError(f"Range lower bound must not exceed upper bound: {text}")

    return lo, hi


def parse_float_list(text: str, name: str, max_items: int = 1000) -> List[float]:
    """
    Parse a comma-separated list of numbers.

    Raises:
        ValidationError: If the list is empty, too long or holds a non-number
    """
    items = [t.strip() for t in (text or '').split(',') if t.strip()]
    if not items:
        raise ValidationError(f"{name} list is empty")
    if len(items) > max_items:
        raise ValidationError(f"Too many {name} values (max {max_items})")
    return [_as_float(item, name) for item in items]


def validate_names(names: Iterable[str], allowed: Sequence[str], kind: str) -> List[str]:
    """
    Validate names against an allow-list, normalising to lowercase.

    Raises:
        ValidationError: If a name is unknown
    """
    result = []
    for name in names:
        name_lower = name.strip().lower()
        if name_lower not in allowed:
            raise ValidationError(
                f"Invalid {kind}: {name}. "
                f"Allowed: {', '.join(allowed)}"
            )
        result.append(name_lower)
    if not result:
        raise ValidationError(f"At least one {kind} is required")
    return result


def parse_optional_number(text: Optional[str], name: str) -> Optional[float]:
    """Parse a number where ``none``/``null``/empty means "not set"."""
    if text is None or text.strip().lower() in ('', 'none', 'null'):
        return None
    return _as_float(text, name)


def _as_float(value, name: str) -> float:
    if isinstance(value, bool):
        raise ValidationError(f"Invalid {name}: {value}")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"Invalid {name}: {value}")
