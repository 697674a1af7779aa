"""Closed-form invariant sets of ``L`` and their Lyapunov exponents."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from .mapcore import (
    OrbitUnavailable,
    ParameterError,
    Point,
    Region,
    _branch_stretch,
    apply_l,
    as_params,
    classify_region,
)

CDCD_THRESHOLD = 0.125


class InvariantSetId(str, Enum):
    P_A = "P_A"
    P_D = "P_D"
    AB = "AB"
    CDCD = "CDCD"
    B_inv = "B_inv"
    C_inv = "C_inv"

    @classmethod
    def parse(cls, text: str) -> "InvariantSetId":
        key = text.replace("_", "").upper()
        for member in cls:
            if member.value.replace("_", "").upper() == key:
                return member
        raise ParameterError(f"unknown invariant set {text!r}")


class LyapunovPair(NamedTuple):
    lambda_x: float
    lambda_y: float


@dataclass(frozen=True)
class Rectangle:
    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float

    def __post_init__(self):
        if self.x_lo > self.x_hi or self.y_lo > self.y_hi:
            raise ParameterError(f"inverted rectangle {self}")

    @property
    def area(self) -> float:
        return (self.x_hi - self.x_lo) * (self.y_hi - self.y_lo)

    @property
    def center(self) -> Point:
        return Point(0.5 * (self.x_lo + self.x_hi), 0.5 * (self.y_lo + self.y_hi))

    def contains(self, p) -> bool:
        return self.x_lo <= p[0] <= self.x_hi and self.y_lo <= p[1] <= self.y_hi

    def interior_grid(self, m: int) -> np.ndarray:
        """``m * m`` cell-center points strictly inside the rectangle."""
        t = (np.arange(m) + 0.5) / m
        xs = self.x_lo + t * (self.x_hi - self.x_lo)
        ys = self.y_lo + t * (self.y_hi - self.y_lo)
        gx, gy = np.meshgrid(xs, ys)
        return np.column_stack([gx.ravel(), gy.ravel()])


def has_cdcd(params) -> bool:
    return as_params(params).ell >= CDCD_THRESHOLD


def _require_cdcd(params, what: str):
    if not has_cdcd(params):
        raise OrbitUnavailable(f"{what} requires ell >= 1/8, got ell={as_params(params).ell}")


def fixed_points(params) -> tuple[Point, Point]:
    """Return ``(P_A, P_D)``: the repelling fixed point in A and the attracting one in D."""
    ell = as_params(params).ell
    s = 1.0 + 4.0 * ell
    p_a = Point(ell / s, (1.0 + 2.0 * ell) / s)
    p_d = Point((1.0 + 3.0 * ell) / s, 1.0 / (2.0 * s))
    return p_a, p_d


def ab_orbit(params) -> tuple[Point, Point]:
    """The period-2 cycle alternating between columns A and B.

    The two points are returned as ``(point_in_A, point_in_B)``.
    """
    ell = as_params(params).ell
    w = 1.0 - 2.0 * ell
    q = 3.0 - 4.0 * ell
    return Point(ell * w, w / q), Point((1.0 - ell) / q, 1.0 - ell)


def cdcd_lines(params) -> tuple[float, float]:
    """Raw line coordinates ``(x_C, y_D)``, without checking that the cycle exists."""
    ell = as_params(params).ell
    s = 1.0 + 4.0 * ell
    return (1.0 + ell) / s, 3.0 / (2.0 * s)


@dataclass(frozen=True)
class CdcdAttractor:
    x_line: float
    y_line: float
    segments: tuple[Rectangle, Rectangle]

    def distance(self, p) -> float:
        """Sup-norm distance from ``p`` to the union of the two segments."""
        x, y = p
        dv = max(abs(x - self.x_line), max(0.0, y - 0.5, -y))
        dh = max(abs(y - self.y_line), max(0.0, 0.75 - x, x - 1.0))
        return min(dv, dh)


def cdcd_attractor(params) -> CdcdAttractor:
    _require_cdcd(params, "the CDCD cycle")
    xc, yd = cdcd_lines(params)
    vertical = Rectangle(xc, xc, 0.0, 0.5)
    horizontal = Rectangle(0.75, 1.0, yd, yd)
    return CdcdAttractor(xc, yd, (vertical, horizontal))


def invariant_rectangles(params) -> tuple[Rectangle, Rectangle]:
    """Return ``(B_inv, C_inv)``.

    B_inv's x lower bound is ``(1 - 2 ell)/2``; it is the largest rectangle in
    column B mapped onto itself by the branch-B map.
    """
    ell = as_params(params).ell
    w = 1.0 - 2.0 * ell
    b_inv = Rectangle(w / 2.0, 0.5, (1.0 - 4.0 * ell) / (2.0 * w), 0.5)
    c_inv = Rectangle(0.5, 0.75, 0.5, 1.0)
    return b_inv, c_inv


def capture_geometry(params) -> tuple:
    """Flat tuple consumed by the classification kernels."""
    params = as_params(params)
    b_inv, _ = invariant_rectangles(params)
    _, p_d = fixed_points(params)
    xc, yd = cdcd_lines(params)
    return (b_inv.x_lo, b_inv.x_hi, b_inv.y_lo, b_inv.y_hi,
            p_d.x, p_d.y, xc, yd, int(has_cdcd(params)))


def lyapunov_analytic(which, params) -> LyapunovPair:
    params = as_params(params)
    which = InvariantSetId(which)
    half_phi = 0.5 * params.phi
    if which is InvariantSetId.P_A:
        return LyapunovPair(half_phi, half_phi)
    if which is InvariantSetId.P_D:
        return LyapunovPair(-half_phi, -half_phi)
    if which in (InvariantSetId.B_inv, InvariantSetId.C_inv):
        return LyapunovPair(0.0, 0.0)
    _require_cdcd(params, f"the {which.value} orbit")
    if which is InvariantSetId.CDCD:
        # point on the vertical (C) line; on the D line the axes swap
        return LyapunovPair(-half_phi, 0.0)
    ell = params.ell
    w = 1.0 - 2.0 * ell
    return LyapunovPair(0.5 * math.log(w / (2.0 * ell)), 0.5 * math.log(1.0 / (2.0 * w)))


def _periodic_itinerary(p, params, max_period: int, tol: float):
    pt = Point(float(p[0]), float(p[1]))
    regions = []
    q = pt
    for _ in range(max_period):
        regions.append(classify_region(q, params))
        q = apply_l(q, params)
        if max(abs(q[0] - pt[0]), abs(q[1] - pt[1])) <= tol:
            return regions
    return None


def lyapunov_finite_time(p, n: int, params, *, max_period: int = 4,
                         period_tol: float = 1e-12, renorm_every: int = 64) -> LyapunovPair:
    """Axis-wise exponents of the ``n``-step derivative product along the orbit of ``p``.

    ``n`` must be even: one step of ``L`` swaps the axes, so only products of an
    even number of steps are diagonal.  If ``p`` returns to itself within
    ``period_tol`` after at most ``max_period`` steps, that cycle's itinerary is
    repeated; otherwise the rounding error of unstable cycles (P_A, AB) would
    push the numerical orbit off them within ~100 steps.  Pass
    ``max_period=0`` to follow the raw floating-point orbit.
    """
    if n < 2 or n % 2:
        raise ParameterError(f"finite-time exponents need an even step count >= 2, got {n}")
    params = as_params(params)
    cycle = _periodic_itinerary(p, params, max_period, period_tol) if max_period > 0 else None

    def regions():
        if cycle is not None:
            for s in range(n):
                yield cycle[s % len(cycle)]
            return
        q = Point(float(p[0]), float(p[1]))
        for _ in range(n):
            yield classify_region(q, params)
            q = apply_l(q, params)

    prod = np.eye(2)
    log_scale = np.zeros(2)
    for s, r in enumerate(regions(), start=1):
        a, b = _branch_stretch(r, params.ell)
        prod = np.array([[0.0, -a], [b, 0.0]]) @ prod
        norms = np.abs(prod).max(axis=0)
        if s % renorm_every == 0 or norms.max() > 1e150 or norms.min() < 1e-150:
            # column rescaling (Benettin style): P_total = prod @ diag(exp(log_scale))
            prod /= norms
            log_scale += np.log(norms)
    lx = (math.log(abs(prod[0, 0])) + log_scale[0]) / n
    ly = (math.log(abs(prod[1, 1])) + log_scale[1]) / n
    return LyapunovPair(lx, ly)


def conjugacy_defect(params) -> float:
    """``(lx + ly)`` on AB plus ``(lx + ly)`` on CDCD; zero for conjugate orbits."""
    ab = lyapunov_analytic(InvariantSetId.AB, params)
    cd = lyapunov_analytic(InvariantSetId.CDCD, params)
    return (ab.lambda_x + ab.lambda_y) + (cd.lambda_x + cd.lambda_y)


def steady_state_lambda_table(params) -> list[tuple[InvariantSetId, float]]:
    params = as_params(params)
    phi = params.phi
    if has_cdcd(params):
        return [
            (InvariantSetId.P_D, phi),
            (InvariantSetId.CDCD, phi / 2.0),
            (InvariantSetId.B_inv, 0.0),
            (InvariantSetId.C_inv, 0.0),
            (InvariantSetId.AB, -phi / 2.0),
            (InvariantSetId.P_A, -phi),
        ]
    return [
        (InvariantSetId.P_D, phi),
        (InvariantSetId.B_inv, 0.0),
        (InvariantSetId.C_inv, 0.0),
        (InvariantSetId.P_A, -phi),
    ]


def representative_point(which, params) -> Point:
    """A point on the given invariant set, used for numerical exponent checks."""
    which = InvariantSetId(which)
    if which is InvariantSetId.P_A:
        return fixed_points(params)[0]
    if which is InvariantSetId.P_D:
        return fixed_points(params)[1]
    if which is InvariantSetId.AB:
        _require_cdcd(params, "the AB orbit")
        return ab_orbit(params)[0]
    if which is InvariantSetId.CDCD:
        return Point(cdcd_attractor(params).x_line, 0.25)
    b_inv, c_inv = invariant_rectangles(params)
    return (b_inv if which is InvariantSetId.B_inv else c_inv).center
