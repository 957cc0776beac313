# -*- coding: utf-8 -*-
"""Standard (float64) and compensated (mpmath) arithmetic modes."""

import logging
import math
from typing import Iterable, Union

import mpmath

from src.errors import ConfigError

logger = logging.getLogger(__name__)

STANDARD = "standard"
COMPENSATED = "compensated"

# 32 significant digits: comfortably above double-double.
COMPENSATED_DPS = 32


def resolve(precision: Union[str, None]) -> str:
    mode = (precision or STANDARD).lower()
    if mode not in (STANDARD, COMPENSATED):
        raise ConfigError(f"unknown precision mode '{precision}'")
    return mode


def critical_orbit_value(a: float, n_iter: int, precision: str = STANDARD) -> float:
    """Return f_a^{n_iter}(0) for f_a(x) = x^2 + a."""
    if resolve(precision) == COMPENSATED:
        with mpmath.workdps(COMPENSATED_DPS):
            x = mpmath.mpf(0)
            a_mp = mpmath.mpf(a)
            for _ in range(n_iter):
                x = x * x + a_mp
            return float(x)
    x = 0.0
    for _ in range(n_iter):
        x = x * x + a
    return x


def log_sum(values: Iterable[float], precision: str = STANDARD) -> float:
    """Sum of logarithms with correct rounding (math.fsum) or in mpmath."""
    vals = [float(v) for v in values]
    if any(v == -math.inf for v in vals):
        return -math.inf
    if resolve(precision) == COMPENSATED:
        with mpmath.workdps(COMPENSATED_DPS):
            return float(mpmath.fsum(vals))
    return math.fsum(vals)


def representable_log(value: float) -> bool:
    """Whether exp(value) is a normal float64 (not underflowed to 0 or subnormal)."""
    return value > math.log(2.2250738585072014e-308)
