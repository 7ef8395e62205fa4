"""Hasse-Weil L-functions of elliptic curves, their smooth-index approximations,
and the zero polygons those approximations produce around the central point."""

from llens.curve import (
    BadPrime,
    CoefficientTable,
    CurveSpec,
    ReductionType,
    classify_reduction,
    coefficient_ap,
    count_points_mod_p,
    extend_coefficients,
    sato_tate_density,
)
from llens.precision import DEFAULT_PRECISION, PrecisionConfig

__all__ = [
    "BadPrime",
    "CoefficientTable",
    "CurveSpec",
    "DEFAULT_PRECISION",
    "PrecisionConfig",
    "ReductionType",
    "classify_reduction",
    "coefficient_ap",
    "count_points_mod_p",
    "extend_coefficients",
    "sato_tate_density",
]

__version__ = "0.1.0"
