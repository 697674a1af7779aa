"""Monte Carlo ensembles: sampling, evolution, FR fits and basin classification.

Work is split into fixed-size chunks of points, so results never depend on the
number of worker threads (``BAKERLAB_THREADS``, 0 or unset = all cores).
Per-point work is pure and the only reductions are integer bin counts.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import kernels
from .analysis import capture_geometry
from .mapcore import BakerLabError, ParameterError, as_params
from .measure import LambdaHistogram, steady_state_mean_contraction

CHUNK = 1 << 16
DEFAULT_MAX_ITER = 100_000
DEFAULT_TOL = 1e-9
DEFAULT_MIN_COUNT = 10


class AttractorId(str, Enum):
    nonconvergent = "nonconvergent"
    P_D = "P_D"
    CDCD = "CDCD"
    B_inv = "B_inv"
    C_inv = "C_inv"


# kernel capture codes
ATTRACTOR_CODES = {
    0: AttractorId.nonconvergent,
    1: AttractorId.P_D,
    2: AttractorId.CDCD,
    3: AttractorId.B_inv,
    4: AttractorId.C_inv,
}


class ConvergenceError(BakerLabError):
    """Too many sample orbits were not captured within the iteration budget."""


def threads() -> int:
    raw = os.environ.get("BAKERLAB_THREADS", "").strip()
    n = int(raw) if raw else 0
    if n < 0:
        raise ParameterError(f"BAKERLAB_THREADS must be >= 0, got {raw!r}")
    return n or (os.cpu_count() or 1)


def _chunked(fn, xs, ys, *args, workers=None):
    """Apply a kernel over fixed chunks and concatenate the results in order."""
    workers = threads() if workers is None else workers
    spans = [(i, min(i + CHUNK, len(xs))) for i in range(0, len(xs), CHUNK)]

    def run(span):
        lo, hi = span
        return fn(xs[lo:hi], ys[lo:hi], *args)

    if workers <= 1 or len(spans) <= 1:
        results = [run(s) for s in spans]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, spans))
    if results and isinstance(results[0], tuple):
        return tuple(np.concatenate(parts) for parts in zip(*results))
    return np.concatenate(results) if results else np.zeros(0, dtype=np.int32)


@dataclass(frozen=True)
class DistributionSpec:
    """Initial distribution on the unit square.

    ``uniform``; ``power`` with density proportional to ``x**a * y**b``;
    ``gaussian_clipped`` centred at ``(cx, cy)`` with standard deviation ``s``,
    redrawn until inside the square.
    """

    kind: str = "uniform"
    params: tuple[float, ...] = ()

    def __post_init__(self):
        kind, p = self.kind, tuple(float(v) for v in self.params)
        object.__setattr__(self, "params", p)
        if kind == "uniform":
            if p:
                raise ParameterError("uniform distribution takes no parameters")
        elif kind == "power":
            if len(p) != 2 or min(p) < 0 or not all(map(math.isfinite, p)):
                raise ParameterError(f"power distribution needs exponents a, b >= 0, got {p}")
        elif kind == "gaussian_clipped":
            if len(p) != 3 or not all(map(math.isfinite, p)) or p[2] <= 0:
                raise ParameterError(f"gaussian_clipped needs cx, cy and s > 0, got {p}")
            if not (0.0 <= p[0] <= 1.0 and 0.0 <= p[1] <= 1.0):
                raise ParameterError("gaussian_clipped center must lie in the unit square")
        else:
            raise ParameterError(f"unknown distribution kind {kind!r}")

    @classmethod
    def parse(cls, text: str) -> "DistributionSpec":
        """Parse ``uniform``, ``power:a,b`` or ``gaussian:cx,cy,s``."""
        name, _, rest = text.partition(":")
        name = {"gaussian": "gaussian_clipped"}.get(name.strip(), name.strip())
        try:
            values = tuple(float(v) for v in rest.split(",")) if rest.strip() else ()
        except ValueError:
            raise ParameterError(f"bad distribution parameters in {text!r}") from None
        return cls(name, values)

    def __str__(self):
        if not self.params:
            return self.kind
        return f"{self.kind}:{','.join(repr(v) for v in self.params)}"


UNIFORM = DistributionSpec()


def _sample_block(dist: DistributionSpec, size: int, rng: np.random.Generator) -> np.ndarray:
    if dist.kind == "uniform":
        return rng.random((size, 2))
    if dist.kind == "power":
        u = rng.random((size, 2))
        return u ** (1.0 / (np.array(dist.params) + 1.0))
    cx, cy, s = dist.params
    out = rng.normal((cx, cy), s, (size, 2))
    bad = ((out < 0.0) | (out > 1.0)).any(axis=1)
    while bad.any():
        out[bad] = rng.normal((cx, cy), s, (int(bad.sum()), 2))
        bad = ((out < 0.0) | (out > 1.0)).any(axis=1)
    return out


def sample_points(dist: DistributionSpec, count: int, seed: int) -> np.ndarray:
    """``count`` points as a ``(count, 2)`` array.

    Block ``b`` of ``CHUNK`` points draws from its own Philox stream keyed by
    ``(seed, b)``, so any prefix or chunk can be regenerated independently.
    """
    if count < 1:
        raise ParameterError(f"count must be >= 1, got {count}")
    if not (0 <= seed < 2**64):
        raise ParameterError(f"seed must be a 64-bit unsigned integer, got {seed}")
    blocks = []
    for b, lo in enumerate(range(0, count, CHUNK)):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, b])))
        blocks.append(_sample_block(dist, min(CHUNK, count - lo), rng))
    return np.concatenate(blocks)


def _columns(points):
    pts = np.asarray(points, dtype=np.float64)
    return np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1])


def net_counts(points, params, steps: int, skip: int = 0, backend=None) -> np.ndarray:
    """D-minus-A counts over ``steps`` steps after discarding ``skip`` steps."""
    params = as_params(params)
    xs, ys = _columns(points)
    if params.equilibrium:
        return np.zeros(len(xs), dtype=np.int32)
    return _chunked(kernels.get(backend).net_counts, xs, ys, params.ell, skip, steps)


def histogram_from_counts(k: np.ndarray, n: int, phi: float) -> LambdaHistogram:
    bins = np.bincount(k + n, minlength=2 * n + 1)
    total = int(bins.sum())
    counts = {int(i - n): int(c) for i, c in enumerate(bins) if c}
    masses = {key: c / total for key, c in counts.items()}
    return LambdaHistogram(n, phi, "empirical", masses, counts, total)


def ensemble_lambda_histogram(dist: DistributionSpec, count: int, seed: int, n: int,
                              params, backend=None) -> LambdaHistogram:
    if n < 1:
        raise ParameterError(f"step count must be >= 1, got {n}")
    params = as_params(params)
    k = net_counts(sample_points(dist, count, seed), params, n, backend=backend)
    return histogram_from_counts(k, n, params.phi)


@dataclass
class FrFit:
    n: int
    points: list[tuple[float, float, int, int]]  # (A, lhs, count_plus, count_minus)
    slope: float
    underdetermined: bool


def empirical_fr_fit(hist: LambdaHistogram, min_count: int = DEFAULT_MIN_COUNT) -> FrFit:
    """Least-squares slope through the origin of ``(1/n) ln(N(k)/N(-k))`` against ``k phi / n``.

    Only bins ``k > 0`` where both ``N(k)`` and ``N(-k)`` reach ``min_count``
    qualify.  With fewer than two qualifying bins the fit is flagged
    ``underdetermined`` (the slope of a single point is still reported).
    """
    if hist.phi <= 0.0:
        raise ParameterError("FR fit needs phi > 0 (ell < 1/4)")
    if hist.kind != "empirical":
        raise ParameterError("FR fit expects an empirical histogram")
    pts = []
    for k in sorted(key for key in hist.counts if key > 0):
        cp, cm = hist.count(k), hist.count(-k)
        if cp >= min_count and cm >= min_count:
            pts.append((hist.value(k), math.log(cp / cm) / hist.n, cp, cm))
    if pts:
        slope = sum(a * lhs for a, lhs, _, _ in pts) / sum(a * a for a, _, _, _ in pts)
    else:
        slope = math.nan
    return FrFit(hist.n, pts, slope, len(pts) < 2)


def classify_points(points, params, max_iter: int = DEFAULT_MAX_ITER, tol: float = DEFAULT_TOL,
                    backend=None) -> tuple[np.ndarray, np.ndarray]:
    """Capture codes (see ``ATTRACTOR_CODES``) and steps-to-capture for many points.

    At equilibrium nothing attracts, so every point is reported nonconvergent.
    """
    if max_iter < 1 or not tol > 0:
        raise ParameterError("max_iter must be >= 1 and tol > 0")
    params = as_params(params)
    xs, ys = _columns(points)
    if params.equilibrium:
        return np.zeros(len(xs), dtype=np.int8), np.full(len(xs), max_iter, dtype=np.int64)
    return _chunked(kernels.get(backend).classify, xs, ys, params.ell, int(max_iter), float(tol),
                    capture_geometry(params))


def classify_attractor(p, params, max_iter: int = DEFAULT_MAX_ITER,
                       tol: float = DEFAULT_TOL) -> tuple[AttractorId, int]:
    codes, steps = classify_points([[p[0], p[1]]], params, max_iter, tol)
    return ATTRACTOR_CODES[int(codes[0])], int(steps[0])


@dataclass
class BasinRaster:
    """Capture codes on the cell-center grid; ``codes[j, i]`` is the cell at
    ``x = (i + 1/2)/res``, ``y = (j + 1/2)/res`` (row ``j`` grows with ``y``)."""

    ell: float
    resolution: int
    codes: np.ndarray
    steps: np.ndarray

    def count(self, which: AttractorId) -> int:
        code = next(c for c, a in ATTRACTOR_CODES.items() if a is AttractorId(which))
        return int((self.codes == code).sum())


def cell_centers(resolution: int) -> np.ndarray:
    t = (np.arange(resolution) + 0.5) / resolution
    gx, gy = np.meshgrid(t, t)
    return np.column_stack([gx.ravel(), gy.ravel()])


def basin_raster(params, resolution: int, max_iter: int = DEFAULT_MAX_ITER,
                 tol: float = DEFAULT_TOL, backend=None) -> BasinRaster:
    if resolution < 2:
        raise ParameterError(f"resolution must be >= 2, got {resolution}")
    params = as_params(params)
    codes, steps = classify_points(cell_centers(resolution), params, max_iter, tol, backend)
    shape = (resolution, resolution)
    return BasinRaster(params.ell, resolution, codes.reshape(shape), steps.reshape(shape))


def basin_measures(classified) -> dict[AttractorId, float]:
    """Fraction of cells or samples per attractor, ``nonconvergent`` included.

    Accepts a :class:`BasinRaster` or an array of capture codes.
    """
    codes = classified.codes if isinstance(classified, BasinRaster) else np.asarray(classified)
    codes = codes.ravel()
    if codes.size == 0:
        raise ParameterError("need at least one classified point")
    hits = np.bincount(codes.astype(np.int64), minlength=len(ATTRACTOR_CODES))
    return {ATTRACTOR_CODES[c]: hits[c] / codes.size for c in sorted(ATTRACTOR_CODES)}


@dataclass
class SteadyState:
    lhs: float
    rhs: float
    rel_error: float
    nonconvergent: float
    measures: dict = field(default_factory=dict)


def steady_state_consistency(params, count: int, seed: int, n_long: int,
                             dist: DistributionSpec = UNIFORM, max_iter: int = DEFAULT_MAX_ITER,
                             tol: float = DEFAULT_TOL, max_nonconvergent: float = 1e-3,
                             eps: float = 1e-12, backend=None) -> SteadyState:
    """Compare the late-time ensemble average of the contraction rate with the
    basin-weighted prediction ``phi * (mu(P_D) + mu(CDCD)/2)``.

    The left side averages over the last ``n_long // 2`` of ``n_long`` steps.
    """
    params = as_params(params)
    if n_long < 2:
        raise ParameterError(f"n_long must be >= 2, got {n_long}")
    if params.equilibrium:
        return SteadyState(0.0, 0.0, 0.0, 0.0)
    pts = sample_points(dist, count, seed)
    window = n_long // 2
    k = net_counts(pts, params, window, skip=n_long - window, backend=backend)
    lhs = float(k.sum(dtype=np.int64)) * params.phi / (window * len(k))
    codes, _ = classify_points(pts, params, max_iter, tol, backend)
    measures = basin_measures(codes)
    lost = measures[AttractorId.nonconvergent]
    if lost >= max_nonconvergent:
        raise ConvergenceError(
            f"{lost:.3%} of samples not captured within {max_iter} steps; raise max_iter")
    rhs = steady_state_mean_contraction(
        params, {a.value: m for a, m in measures.items() if a is not AttractorId.nonconvergent})
    rel = abs(lhs - rhs) / max(abs(rhs), eps)
    return SteadyState(lhs, rhs, rel, lost, measures)

