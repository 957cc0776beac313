# -*- coding: utf-8 -*-
"""Exception hierarchy shared by every lab module."""

from typing import Any, Dict, Optional


class LabError(Exception):
    """Base class for all numerical and configuration errors of the lab."""

    code = "lab_error"
    exit_code = 1

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details: Dict[str, Any] = details

    def to_payload(self) -> Dict[str, Any]:
        """Machine-readable form written by the CLI."""
        return {
            "error": self.code,
            "message": self.message,
            "details": {k: _jsonable(v) for k, v in self.details.items()},
        }


def _jsonable(value: Any) -> Any:
    if isinstance(value, float) and value != value:
        return "nan"
    if isinstance(value, float) and value in (float("inf"), float("-inf")):
        return "inf" if value > 0 else "-inf"
    if isinstance(value, (int, float, str, bool)) or value is None:
        return value
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return str(value)


# dynamics-core

class DomainError(LabError):
    """Point outside the declared domain of a map, or an invalid domain."""
    code = "domain_error"
    exit_code = 10


class SingularError(LabError):
    """An Inverse element is not locally invertible."""
    code = "singular_error"
    exit_code = 11


class EscapeError(LabError):
    """Orbit left the declared domain."""
    code = "escape_error"
    exit_code = 12

    def __init__(self, message: str, index: Optional[int] = None, **details: Any):
        super().__init__(message, index=index, **details)
        self.index = index


# renorm-1d

class BracketError(LabError):
    code = "bracket_error"
    exit_code = 20


class ToleranceError(LabError):
    code = "tolerance_error"
    exit_code = 21


class DivisionError(LabError):
    code = "division_error"
    exit_code = 22


class NotRenormalizableError(LabError):
    code = "not_renormalizable"
    exit_code = 23


class SampleError(LabError):
    """Too few admissible sample points for a statistic."""
    code = "sample_error"
    exit_code = 24


# renorm-2d

class ContinuationError(LabError):
    """Cycle tracking lost its branch during parameter continuation."""
    code = "continuation_error"
    exit_code = 30


class SingularStraightenError(LabError):
    code = "singular_straighten"
    exit_code = 31


class NoCriticalPointError(LabError):
    code = "no_critical_point"
    exit_code = 32


class DepthError(LabError):
    """Precision mode cannot represent the requested thinness."""
    code = "depth_error"
    exit_code = 33


class FitError(LabError):
    code = "fit_error"
    exit_code = 34


# pesin-toolkit

class DegenerateError(LabError):
    code = "degenerate_error"
    exit_code = 40


class HypothesisError(LabError):
    code = "hypothesis_error"
    exit_code = 41


# critical-structure

class NoTangencyError(LabError):
    code = "no_tangency"
    exit_code = 50


class FieldError(LabError):
    """Direction-field Cauchy check failed."""
    code = "field_error"
    exit_code = 51


class ShrinkHint(LabError):
    """Chart residual too large; retry at a smaller radius."""
    code = "shrink_hint"
    exit_code = 52

    def __init__(self, message: str, suggested_radius: float, residual: float = float("nan"), **details: Any):
        super().__init__(message, suggested_radius=suggested_radius, residual=residual, **details)
        self.suggested_radius = suggested_radius
        self.residual = residual


class ChartRangeError(LabError):
    code = "chart_range"
    exit_code = 53


# odometer-order

class MembershipError(LabError):
    code = "membership_error"
    exit_code = 60


class OrderOracleError(LabError):
    code = "order_oracle_error"
    exit_code = 61


# lab-cli

class ConfigError(LabError):
    code = "config_error"
    exit_code = 2
