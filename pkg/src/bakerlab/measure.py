"""Exact Lebesgue measures of itinerary cylinders.

Every branch of ``L`` is a diagonal affine map followed by a quarter turn, so
the forward image of an axis-aligned rectangle is again an axis-aligned
rectangle.  A cylinder's image is propagated one symbol at a time: intersect
with the next column, then push through that column's branch.  The initial
measure is the final image area divided by the product of the branch
determinants.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .mapcore import (
    REGIONS,
    BakerLabError,
    ParameterError,
    Point,
    Region,
    _branch_stretch,
    as_params,
    orbit,
)

N_MAX = 14
MAX_LIVE = 50_000_000
MIN_SIDE = 1e-15
MIN_MEASURE = 1e-18


class ResourceGuardError(BakerLabError):
    """Enumeration would exceed the live-cylinder budget."""


class DegenerateError(BakerLabError):
    """The requested quantity does not exist at equilibrium."""


@dataclass(frozen=True)
class CylinderSet:
    itinerary: str
    image: tuple[float, float, float, float]
    measure: float

    @property
    def net_count(self) -> int:
        return self.itinerary.count("D") - self.itinerary.count("A")


@dataclass
class CylinderTable:
    """All non-empty cylinders of length ``n``, sorted by itinerary.

    ``codes`` holds each itinerary in base 4 (A=0 .. D=3, first symbol most
    significant), so numeric order is lexicographic order.
    """

    n: int
    ell: float
    codes: np.ndarray
    images: np.ndarray  # (m, 4): x_lo, x_hi, y_lo, y_hi
    measures: np.ndarray
    net_counts: np.ndarray

    def __len__(self) -> int:
        return len(self.codes)

    def itinerary(self, i: int) -> str:
        return decode_itinerary(int(self.codes[i]), self.n)

    def __iter__(self) -> Iterator[CylinderSet]:
        for i in range(len(self)):
            yield CylinderSet(self.itinerary(i), tuple(self.images[i].tolist()), float(self.measures[i]))


def decode_itinerary(code: int, n: int) -> str:
    out = []
    for _ in range(n):
        out.append(REGIONS[code & 3].value)
        code >>= 2
    return "".join(reversed(out))


def _push(region: Region, ell: float, x0, wx, y0, wy):
    """Forward image of the rectangle with corner ``(x0, y0)`` and sides ``(wx, wy)``.

    Corners use the same expressions as ``mapcore.apply_m``; sides are scaled
    by the branch stretches directly so thin images keep full relative precision.
    """
    a, b = _branch_stretch(region, ell)
    y1 = y0 + wy
    if region is Region.A:
        mx0 = x0 / (2.0 * ell) + 0.5
        my1 = 0.5 * y1 + 0.5
    elif region is Region.B:
        w = 1.0 - 2.0 * ell
        mx0 = (x0 - ell) / w
        my1 = w * y1 + 2.0 * ell
    elif region is Region.C:
        mx0 = 2.0 * x0 - 0.5
        my1 = 0.5 * y1
    else:
        mx0 = 2.0 * x0 - 1.5
        my1 = 2.0 * ell * y1
    return 1.0 - my1, a * wy, mx0, b * wx


def _pull(region: Region, ell: float, x: float, y: float) -> Point:
    """Inverse of the branch of ``L`` on ``region``."""
    my, mx = 1.0 - x, y
    if region is Region.A:
        return Point((mx - 0.5) * (2.0 * ell), (my - 0.5) / 0.5)
    if region is Region.B:
        w = 1.0 - 2.0 * ell
        return Point(mx * w + ell, (my - 2.0 * ell) / w)
    if region is Region.C:
        return Point((mx + 0.5) / 2.0, my / 0.5)
    return Point((mx + 1.5) / 2.0, my / (2.0 * ell))


def _check_steps(n: int, n_max: int):
    if not (1 <= n <= n_max):
        raise ParameterError(f"step count must lie in [1, {n_max}], got {n}")


def enumerate_cylinders(params, n: int, *, n_max: int = N_MAX, max_live: int = MAX_LIVE) -> CylinderTable:
    """Every cylinder of length ``n`` with positive measure, in itinerary order."""
    params = as_params(params)
    _check_steps(n, n_max)
    ell = params.ell
    bounds = np.array([ell, 0.5, 0.75])
    dets = [a * b for a, b in (_branch_stretch(r, ell) for r in REGIONS)]
    sign = np.array([-1, 0, 0, 1], dtype=np.int64)
    if params.equilibrium:
        sign[:] = 0

    codes = np.zeros(1, dtype=np.int64)
    x0, wx, y0, wy = np.zeros(1), np.ones(1), np.zeros(1), np.ones(1)
    det = np.ones(1)
    k = np.zeros(1, dtype=np.int64)
    for depth in range(1, n + 1):
        # offsets of the column boundaries inside each rectangle, clipped to [0, wx];
        # consecutive differences telescope, so the pieces sum to wx
        cut = np.clip(bounds[None, :] - x0[:, None], 0.0, wx[:, None])
        edges = np.column_stack([np.zeros_like(wx), cut, wx])
        parts = []
        for r in REGIONS:
            j = r.code
            piece = edges[:, j + 1] - edges[:, j]
            whole = (edges[:, j] == 0.0) & (edges[:, j + 1] == wx)
            # a piece cut by a column boundary narrower than MIN_SIDE is a rounding sliver
            keep = (piece > 0.0) & (whole | (piece > MIN_SIDE))
            if not keep.any():
                continue
            img = _push(r, ell, x0[keep] + edges[keep, j], piece[keep], y0[keep], wy[keep])
            parts.append((codes[keep] * 4 + j, *img, det[keep] * dets[j], k[keep] + sign[j]))
        if not parts:
            codes = codes[:0]
            x0, wx, y0, wy, det, k = (v[:0] for v in (x0, wx, y0, wy, det, k))
            break
        codes, x0, wx, y0, wy, det, k = (np.concatenate(c) for c in zip(*parts))
        if len(codes) > max_live:
            raise ResourceGuardError(
                f"{len(codes)} live cylinders at depth {depth} exceed the limit {max_live}")

    measures = wx * wy / det
    keep = measures >= MIN_MEASURE
    order = np.argsort(codes[keep], kind="stable")
    images = np.column_stack([x0, x0 + wx, y0, y0 + wy])[keep][order]
    return CylinderTable(n, ell, codes[keep][order], images, measures[keep][order], k[keep][order])


@dataclass
class LambdaHistogram:
    """Distribution of the time-averaged contraction rate, binned by net count ``k``.

    The bin ``k`` corresponds to the value ``k * phi / n``.
    """

    n: int
    phi: float
    kind: str  # "exact" | "empirical"
    masses: dict[int, float]
    counts: dict[int, int] = field(default_factory=dict)
    total: int = 0

    def mass(self, k: int) -> float:
        return self.masses.get(k, 0.0)

    def count(self, k: int) -> int:
        return self.counts.get(k, 0)

    def value(self, k: int) -> float:
        return k * self.phi / self.n

    @property
    def support(self) -> list[int]:
        return sorted(self.masses)


def histogram_from_table(table: CylinderTable, phi: float) -> LambdaHistogram:
    n = table.n
    sums = np.bincount(table.net_counts + n, weights=table.measures, minlength=2 * n + 1)
    masses = {int(i - n): float(m) for i, m in enumerate(sums) if m > 0.0}
    return LambdaHistogram(n, phi, "exact", masses)


def exact_lambda_distribution(params, n: int, **kw) -> LambdaHistogram:
    params = as_params(params)
    return histogram_from_table(enumerate_cylinders(params, n, **kw), params.phi)


def total_variation(p: LambdaHistogram, q: LambdaHistogram) -> float:
    keys = set(p.masses) | set(q.masses)
    return 0.5 * sum(abs(p.mass(k) - q.mass(k)) for k in keys)


@dataclass(frozen=True)
class FrRow:
    k: int
    A: float
    p_plus: float
    p_minus: float
    lhs: float
    deviation: float


@dataclass
class FrCurve:
    n: int
    rows: list[FrRow]  # both k and -k populated
    unpaired: list[FrRow]  # exactly one side populated; lhs is +/-inf

    @property
    def all_rows(self) -> list[FrRow]:
        return sorted(self.rows + self.unpaired, key=lambda r: r.k)


def fr_curve(hist: LambdaHistogram) -> FrCurve:
    """Compare ``(1/n) ln(P(k)/P(-k))`` with ``A = k phi / n`` for every ``k > 0``."""
    if hist.phi == 0.0:
        raise DegenerateError("no fluctuations at equilibrium: only the k=0 bin exists")
    n = hist.n
    rows, unpaired = [], []
    top = max((abs(k) for k in hist.masses), default=0)
    for k in range(1, top + 1):
        pp, pm = hist.mass(k), hist.mass(-k)
        if pp == 0.0 and pm == 0.0:
            continue
        a = hist.value(k)
        if pp > 0.0 and pm > 0.0:
            lhs = math.log(pp / pm) / n
            rows.append(FrRow(k, a, pp, pm, lhs, lhs - a))
        else:
            lhs = math.inf if pm == 0.0 else -math.inf
            unpaired.append(FrRow(k, a, pp, pm, lhs, lhs))
    return FrCurve(n, rows, unpaired)


def exact_fr_curve(params, n: int, **kw) -> FrCurve:
    params = as_params(params)
    if params.equilibrium:
        raise DegenerateError("no fluctuations at equilibrium: only the k=0 bin exists")
    return fr_curve(exact_lambda_distribution(params, n, **kw))


def cylinder_witness(table: CylinderTable, i: int) -> Point:
    """Center of cylinder ``i``'s initial rectangle, pulled back from its image."""
    x_lo, x_hi, y_lo, y_hi = table.images[i]
    p = Point(0.5 * (x_lo + x_hi), 0.5 * (y_lo + y_hi))
    for ch in reversed(table.itinerary(i)):
        p = _pull(Region(ch), table.ell, *p)
    return p


def conjugate_cylinder_exists(params, n: int, k: int, *, table: CylinderTable | None = None,
                              **kw) -> tuple[bool, Point | None]:
    """Is there a cylinder of length ``n`` with net count ``-k``?

    Returns ``(exists, witness)``.  Candidates are tried in order of decreasing
    measure; the witness is the first pulled-back center whose forward
    itinerary reproduces its cylinder.
    """
    params = as_params(params)
    if table is None:
        table = enumerate_cylinders(params, n, **kw)
    idx = np.flatnonzero(table.net_counts == -k)
    if idx.size == 0:
        return False, None
    for i in idx[np.argsort(-table.measures[idx], kind="stable")]:
        w = cylinder_witness(table, int(i))
        if 0.0 <= w.x <= 1.0 and 0.0 <= w.y <= 1.0:
            if orbit(w, n, params).itinerary_string == table.itinerary(int(i)):
                return True, w
    # the cylinder exists even if rounding spoils every pulled-back center
    return True, None


def steady_state_mean_contraction(params, basin_measures: dict) -> float:
    """``phi * (mu(P_D basin) + mu(CDCD basin) / 2)``."""
    params = as_params(params)
    vals = {str(getattr(k, "value", k)): float(v) for k, v in basin_measures.items()}
    if any(v < 0.0 for v in vals.values()):
        raise ParameterError("basin measures must be nonnegative")
    if sum(vals.values()) > 1.0 + 1e-12:
        raise ParameterError("basin measures sum to more than 1")
    return params.phi * (vals.get("P_D", 0.0) + 0.5 * vals.get("CDCD", 0.0))
