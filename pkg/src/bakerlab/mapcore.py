"""Piecewise-affine baker-like map of the unit square.

The map ``M`` acts on four vertical columns ``A = [0, ell)``, ``B = [ell, 1/2)``,
``C = [1/2, 3/4)`` and ``D = [3/4, 1]``; ``R`` is the quarter turn
``(x, y) -> (1 - y, x)`` and ``L = R o M`` is the dynamics studied throughout
the package.  Everything here is a pure function of its arguments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np


class BakerLabError(Exception):
    """Base class for errors raised by bakerlab."""


class ParameterError(BakerLabError, ValueError):
    """An argument lies outside the domain of an operation."""


class OrbitUnavailable(BakerLabError):
    """The requested invariant set does not exist at this parameter value."""


class Region(str, Enum):
    A = "A"
    B = "B"
    C = "C"
    D = "D"

    @property
    def code(self) -> int:
        return _REGION_CODE[self]


_REGION_CODE = {Region.A: 0, Region.B: 1, Region.C: 2, Region.D: 3}
REGIONS = (Region.A, Region.B, Region.C, Region.D)


@dataclass(frozen=True)
class Params:
    """Control parameter ``ell`` in (0, 1/4] and the derived contraction ``phi``."""

    ell: float
    phi: float = field(init=False)

    def __post_init__(self):
        ell = float(self.ell)
        if not (0.0 < ell <= 0.25) or math.isnan(ell):
            raise ParameterError(f"ell must lie in (0, 1/4], got {self.ell!r}")
        object.__setattr__(self, "ell", ell)
        object.__setattr__(self, "phi", -math.log(4.0 * ell))

    @property
    def equilibrium(self) -> bool:
        return self.ell == 0.25


class Point(NamedTuple):
    x: float
    y: float


def as_params(params) -> Params:
    return params if isinstance(params, Params) else Params(params)


def classify_region(p, params) -> Region:
    x = p[0]
    ell = as_params(params).ell
    if x < ell:
        return Region.A
    if x < 0.5:
        return Region.B
    if x < 0.75:
        return Region.C
    return Region.D


def apply_m(p, params) -> Point:
    x, y = p
    ell = as_params(params).ell
    if x < ell:
        return Point(x / (2.0 * ell) + 0.5, 0.5 * y + 0.5)
    if x < 0.5:
        w = 1.0 - 2.0 * ell
        return Point((x - ell) / w, w * y + 2.0 * ell)
    if x < 0.75:
        return Point(2.0 * x - 0.5, 0.5 * y)
    return Point(2.0 * x - 1.5, 2.0 * ell * y)


def apply_r(p) -> Point:
    return Point(1.0 - p[1], p[0])


def apply_l(p, params) -> Point:
    return apply_r(apply_m(p, params))


class Jacobian(NamedTuple):
    matrix: np.ndarray
    det: float


def jacobian(region: Region, params) -> Jacobian:
    """Constant derivative of ``L`` on one column.

    Every branch is antidiagonal, ``[[0, -a], [b, 0]]``, with ``a`` the
    y-stretch of ``M`` and ``b`` its x-stretch.
    """
    a, b = _branch_stretch(Region(region), as_params(params).ell)
    mat = np.array([[0.0, -a], [b, 0.0]])
    return Jacobian(mat, a * b)


def _branch_stretch(region: Region, ell: float) -> tuple[float, float]:
    # (y-stretch, x-stretch) of M on each column
    if region is Region.A:
        return 0.5, 1.0 / (2.0 * ell)
    if region is Region.B:
        w = 1.0 - 2.0 * ell
        return w, 1.0 / w
    if region is Region.C:
        return 0.5, 2.0
    return 2.0 * ell, 2.0


def local_contraction(region: Region, params) -> float:
    params = as_params(params)
    region = Region(region)
    if region is Region.A:
        return -params.phi
    if region is Region.D:
        return params.phi
    return 0.0


class MapKind(str, Enum):
    M = "M"
    L = "L"


@dataclass(frozen=True)
class Orbit:
    points: tuple[Point, ...]
    itinerary: tuple[Region, ...]
    map_kind: MapKind

    @property
    def itinerary_string(self) -> str:
        return "".join(r.value for r in self.itinerary)


def orbit(p, n: int, params, map_kind="L") -> Orbit:
    if n < 0:
        raise ParameterError(f"step count must be >= 0, got {n}")
    params = as_params(params)
    kind = MapKind(map_kind)
    step = apply_l if kind is MapKind.L else apply_m
    pt = Point(float(p[0]), float(p[1]))
    points = [pt]
    itinerary = []
    for _ in range(n):
        itinerary.append(classify_region(pt, params))
        pt = step(pt, params)
        points.append(pt)
    return Orbit(tuple(points), tuple(itinerary), kind)


def net_count(itinerary, params=None) -> int:
    """Number of D visits minus number of A visits.

    At equilibrium (``ell == 1/4``) no step contracts or expands area, so the
    count is 0 whatever the itinerary.
    """
    if params is not None and as_params(params).equilibrium:
        return 0
    k = 0
    for r in itinerary:
        r = Region(r)
        if r is Region.D:
            k += 1
        elif r is Region.A:
            k -= 1
    return k


def lambda_time_average(p, n: int, params, map_kind="L") -> tuple[float, int]:
    """Time average of the contraction rate over ``n`` steps.

    Returns ``(k * phi / n, k)`` where ``k`` is the net D-minus-A count; the
    value is formed from the integer count, never by summing logarithms.
    """
    if n < 1:
        raise ParameterError(f"step count must be >= 1, got {n}")
    params = as_params(params)
    k = net_count(orbit(p, n, params, map_kind).itinerary, params)
    return k * params.phi / n, k
