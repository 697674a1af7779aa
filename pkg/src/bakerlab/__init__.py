"""Simulation and exact-measure toolkit for a dissipative baker-like map of the unit square."""
from .mapcore import (
    BakerLabError,
    OrbitUnavailable,
    ParameterError,
    Params,
    Point,
    Region,
    apply_l,
    apply_m,
    apply_r,
    classify_region,
    jacobian,
    lambda_time_average,
    local_contraction,
    orbit,
)

__version__ = "0.1.0"
