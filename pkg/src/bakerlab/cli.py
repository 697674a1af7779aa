"""Command-line experiments with stable, byte-reproducible outputs.

Exit status: 0 success, 1 invalid arguments, 2 I/O failure, 3 resource guard
(enumeration budget or capture budget exceeded).
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis, ensemble, measure
from .analysis import InvariantSetId
from .mapcore import (
    BakerLabError,
    OrbitUnavailable,
    ParameterError,
    Params,
    classify_region,
    net_count,
    orbit,
)

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_RESOURCE = 0, 1, 2, 3

GRAY = {0: 0, 1: 64, 2: 128, 3: 192, 4: 255}  # capture code -> PGM level
SET_NAMES = {"PA": InvariantSetId.P_A, "PD": InvariantSetId.P_D, "AB": InvariantSetId.AB,
             "CDCD": InvariantSetId.CDCD, "BINV": InvariantSetId.B_inv, "CINV": InvariantSetId.C_inv}


class ValidationError(BakerLabError):
    pass


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


def to_json(obj, indent: int = 0) -> str:
    """JSON with insertion-ordered keys and reals at 17 significant digits.

    Non-finite reals become the strings ``"inf"``, ``"-inf"``, ``"nan"``.
    """
    pad, inner = "  " * indent, "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (bool, np.bool_, int, np.integer)):
        return fmt(obj)
    if isinstance(obj, (float, np.floating)):
        text = fmt(obj)
        return text if math.isfinite(obj) else json.dumps(text)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {to_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if all(isinstance(v, (int, float, np.integer, np.floating)) for v in obj):
            return "[" + ", ".join(to_json(v) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + to_json(v, indent + 1) for v in obj) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(v if isinstance(v, str) else fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def write_output(path, data) -> None:
    """Write ``data`` to ``path`` atomically (temp file + rename); ``None`` or ``-`` is stdout."""
    if isinstance(data, str):
        data = data.encode()
    if path in (None, "-"):
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
        return
    path = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    except OSError as exc:
        raise OSError(exc.errno, exc.strerror, str(path)) from None
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def pgm_bytes(raster: ensemble.BasinRaster) -> bytes:
    lut = np.zeros(256, dtype=np.uint8)
    for code, level in GRAY.items():
        lut[code] = level
    img = lut[raster.codes.astype(np.uint8)][::-1]  # row 0 at y = 1
    header = f"P5\n{raster.resolution} {raster.resolution}\n255\n".encode()
    return header + np.ascontiguousarray(img).tobytes()


def point(p) -> list:
    return [float(p[0]), float(p[1])]


def rect(r: analysis.Rectangle) -> dict:
    return {"x_lo": r.x_lo, "x_hi": r.x_hi, "y_lo": r.y_lo, "y_hi": r.y_hi}


@dataclass
class RunConfig:
    command: str
    ell: float
    steps: int | None = None
    samples: int = 1_000_000
    seed: int = 0
    dist: ensemble.DistributionSpec = field(default_factory=ensemble.DistributionSpec)
    resolution: int = 512
    max_iter: int = ensemble.DEFAULT_MAX_ITER
    tol: float = ensemble.DEFAULT_TOL
    min_count: int = ensemble.DEFAULT_MIN_COUNT
    n_max: int = measure.N_MAX
    x0: float | None = None
    y0: float | None = None
    map_kind: str = "L"
    invariant_set: str | None = None
    numeric: bool = False
    out: str | None = None
    summary: str | None = None
    params: Params = field(init=False)

    def validate(self) -> "RunConfig":
        try:
            self.params = Params(self.ell)
        except ParameterError as exc:
            raise ValidationError(str(exc)) from None
        c = self.command
        need_steps = {"orbit": 0, "cylinders": 1, "fr-exact": 1, "fr-mc": 1, "steady-state": 2}
        if c in need_steps and (self.steps is None or self.steps < need_steps[c]):
            raise ValidationError(f"{c}: --steps must be >= {need_steps[c]}")
        if c in ("cylinders", "fr-exact") and self.steps > self.n_max:
            raise ValidationError(f"{c}: --steps {self.steps} exceeds --n-max {self.n_max}")
        if c == "orbit":
            for name, v in (("x0", self.x0), ("y0", self.y0)):
                if v is None or not 0.0 <= v <= 1.0:
                    raise ValidationError(f"orbit: --{name} must lie in [0, 1]")
        if c in ("fr-mc", "steady-state"):
            if self.samples < 1:
                raise ValidationError("--samples must be >= 1")
            if not 0 <= self.seed < 2**64:
                raise ValidationError("--seed must be a 64-bit unsigned integer")
        if c == "fr-mc" and self.params.equilibrium:
            raise ValidationError("fr-mc: no fluctuations at ell = 1/4")
        if c == "fr-exact" and self.params.equilibrium:
            raise ValidationError("fr-exact: no fluctuations at ell = 1/4 (only the k=0 bin exists)")
        if c in ("basins", "steady-state"):
            if self.max_iter < 1 or not self.tol > 0:
                raise ValidationError("--max-iter must be >= 1 and --tol > 0")
        if c == "basins":
            if self.resolution < 2:
                raise ValidationError("basins: --resolution must be >= 2")
            if self.out in (None, "-"):
                raise ValidationError("basins: --out PATH is required for the PGM raster")
        if c == "lyapunov":
            if self.invariant_set not in SET_NAMES:
                raise ValidationError(f"lyapunov: --set must be one of {'|'.join(SET_NAMES)}")
            if self.numeric and (self.steps is None or self.steps < 2 or self.steps % 2):
                raise ValidationError("lyapunov --numeric: --steps must be even and >= 2")
        return self

    def summary_path(self):
        if self.summary:
            return self.summary
        if self.out not in (None, "-"):
            return str(Path(self.out).with_suffix(".json"))
        return None


def cmd_orbit(cfg: RunConfig):
    orb = orbit((cfg.x0, cfg.y0), cfg.steps, cfg.params, cfg.map_kind)
    rows = []
    k = 0
    for s, p in enumerate(orb.points):
        # running average over the steps already taken; 0 before the first step
        if s:
            k += net_count(orb.itinerary[s - 1:s], cfg.params)
        region = classify_region(p, cfg.params).value
        rows.append((s, p.x, p.y, region, k * cfg.params.phi / s if s else 0.0))
    write_output(cfg.out, csv_text(["step", "x", "y", "region", "lambda_cumavg"], rows))


def cmd_cylinders(cfg: RunConfig):
    table = measure.enumerate_cylinders(cfg.params, cfg.steps, n_max=cfg.n_max)
    rows = [(c.itinerary, c.measure, *c.image) for c in table]
    write_output(cfg.out, csv_text(["itinerary", "measure", "x_lo", "x_hi", "y_lo", "y_hi"], rows))


def cmd_invariants(cfg: RunConfig):
    p = cfg.params
    p_a, p_d = analysis.fixed_points(p)
    b_inv, c_inv = analysis.invariant_rectangles(p)
    table = analysis.steady_state_lambda_table(p)
    doc = {
        "ell": p.ell,
        "phi": p.phi,
        "N_ell": len(table),
        "fixed_points": {"P_A": point(p_a), "P_D": point(p_d)},
        "ab_orbit": None,
        "cdcd": None,
        "B_inv": rect(b_inv),
        "C_inv": rect(c_inv),
        "lambda_table": {sid.value: v for sid, v in table},
    }
    if analysis.has_cdcd(p):
        a_pt, b_pt = analysis.ab_orbit(p)
        cd = analysis.cdcd_attractor(p)
        doc["ab_orbit"] = {"point_in_A": point(a_pt), "point_in_B": point(b_pt)}
        doc["cdcd"] = {"x_line": cd.x_line, "y_line": cd.y_line,
                       "vertical": rect(cd.segments[0]), "horizontal": rect(cd.segments[1])}
    write_output(cfg.out, to_json(doc) + "\n")


def cmd_lyapunov(cfg: RunConfig):
    which = SET_NAMES[cfg.invariant_set]
    pair = analysis.lyapunov_analytic(which, cfg.params)
    doc = {"ell": cfg.params.ell, "set": which.value,
           "analytic": {"lambda_x": pair.lambda_x, "lambda_y": pair.lambda_y}}
    if cfg.numeric:
        p = analysis.representative_point(which, cfg.params)
        num = analysis.lyapunov_finite_time(p, cfg.steps, cfg.params)
        doc["numeric"] = {"point": point(p), "steps": cfg.steps,
                          "lambda_x": num.lambda_x, "lambda_y": num.lambda_y}
    write_output(cfg.out, to_json(doc) + "\n")


def cmd_fr_exact(cfg: RunConfig):
    curve = measure.exact_fr_curve(cfg.params, cfg.steps, n_max=cfg.n_max)
    rows = [(r.k, r.A, r.p_plus, r.p_minus, r.lhs, r.deviation) for r in curve.all_rows]
    write_output(cfg.out, csv_text(["k", "A", "P_plus", "P_minus", "lhs", "deviation"], rows))


def cmd_fr_mc(cfg: RunConfig):
    hist = ensemble.ensemble_lambda_histogram(cfg.dist, cfg.samples, cfg.seed, cfg.steps, cfg.params)
    fit = ensemble.empirical_fr_fit(hist, cfg.min_count)
    rows = []
    for k in range(1, cfg.steps + 1):
        cp, cm = hist.count(k), hist.count(-k)
        if cp or cm:
            lhs = math.log(cp / cm) / cfg.steps if cp and cm else (math.inf if cp else -math.inf)
            rows.append((k, hist.value(k), cp, cm, lhs))
    write_output(cfg.out, csv_text(["k", "A", "count_plus", "count_minus", "lhs"], rows))
    doc = {"ell": cfg.params.ell, "steps": cfg.steps, "samples": cfg.samples, "seed": cfg.seed,
           "dist": str(cfg.dist), "min_count": cfg.min_count, "slope": fit.slope,
           "qualifying_bins": len(fit.points), "underdetermined": fit.underdetermined}
    _write_summary(cfg, doc)


def cmd_basins(cfg: RunConfig):
    raster = ensemble.basin_raster(cfg.params, cfg.resolution, cfg.max_iter, cfg.tol)
    write_output(cfg.out, pgm_bytes(raster))
    measures = ensemble.basin_measures(raster)
    doc = {"ell": cfg.params.ell, "resolution": cfg.resolution, "max_iter": cfg.max_iter,
           "tol": cfg.tol, "measures": {a.value: float(m) for a, m in measures.items()},
           "gray_levels": {ensemble.ATTRACTOR_CODES[c].value: g for c, g in GRAY.items()}}
    _write_summary(cfg, doc)


def cmd_steady_state(cfg: RunConfig):
    res = ensemble.steady_state_consistency(cfg.params, cfg.samples, cfg.seed, cfg.steps,
                                            cfg.dist, cfg.max_iter, cfg.tol)
    doc = {"ell": cfg.params.ell, "samples": cfg.samples, "seed": cfg.seed, "steps": cfg.steps,
           "lhs": res.lhs, "rhs": res.rhs, "rel_error": res.rel_error,
           "nonconvergent": float(res.nonconvergent),
           "measures": {a.value: float(m) for a, m in res.measures.items()}}
    write_output(cfg.out, to_json(doc) + "\n")


def _write_summary(cfg: RunConfig, doc: dict):
    text = to_json(doc) + "\n"
    path = cfg.summary_path()
    if path is None:
        sys.stderr.write(text)
    else:
        write_output(path, text)


COMMANDS = {
    "orbit": cmd_orbit,
    "cylinders": cmd_cylinders,
    "invariants": cmd_invariants,
    "lyapunov": cmd_lyapunov,
    "fr-exact": cmd_fr_exact,
    "fr-mc": cmd_fr_mc,
    "basins": cmd_basins,
    "steady-state": cmd_steady_state,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bakerlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_, *opts):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--ell", type=float, required=True)
        p.add_argument("--out", help="output file (default: stdout)")
        for opt in opts:
            opt(p)
        return p

    def steps(p, required=True):
        p.add_argument("--steps", type=int, required=required)

    def mc(p):
        p.add_argument("--samples", type=int, default=1_000_000)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--dist", type=ensemble.DistributionSpec.parse, default=ensemble.UNIFORM,
                       help="uniform | power:a,b | gaussian:cx,cy,s")

    def capture(p):
        p.add_argument("--max-iter", type=int, default=ensemble.DEFAULT_MAX_ITER)
        p.add_argument("--tol", type=float, default=ensemble.DEFAULT_TOL)

    def nmax(p):
        p.add_argument("--n-max", type=int, default=measure.N_MAX)

    def summary(p):
        p.add_argument("--summary", help="JSON summary path (default: OUT with .json suffix)")

    def orbit_opts(p):
        p.add_argument("--x0", type=float, required=True)
        p.add_argument("--y0", type=float, required=True)
        p.add_argument("--map", dest="map_kind", choices=["M", "L"], default="L")

    def lyap_opts(p):
        p.add_argument("--set", dest="invariant_set", required=True, choices=list(SET_NAMES))
        p.add_argument("--numeric", action="store_true")

    add("orbit", "trajectory as CSV", orbit_opts, steps)
    add("cylinders", "exact itinerary cylinders as CSV", steps, nmax)
    add("invariants", "closed-form invariant sets as JSON")
    add("lyapunov", "Lyapunov exponents as JSON", lyap_opts, lambda p: steps(p, False))
    add("fr-exact", "exact fluctuation-relation curve as CSV", steps, nmax)
    add("fr-mc", "Monte Carlo fluctuation-relation bins (CSV) and slope (JSON)", steps, mc, summary,
        lambda p: p.add_argument("--min-count", type=int, default=ensemble.DEFAULT_MIN_COUNT))
    add("basins", "basin raster (PGM) and basin measures (JSON)", capture, summary,
        lambda p: p.add_argument("--resolution", type=int, default=512))
    add("steady-state", "steady-state contraction consistency as JSON", steps, mc, capture)
    return parser


def parse_config(argv) -> RunConfig:
    try:
        ns = build_parser().parse_args(argv)
    except ParameterError as exc:
        raise ValidationError(str(exc)) from None
    fields = {k: v for k, v in vars(ns).items() if v is not None}
    return RunConfig(**fields).validate()


def run(cfg: RunConfig) -> int:
    COMMANDS[cfg.command](cfg)
    return EXIT_OK


def main(argv=None) -> int:
    try:
        return run(parse_config(sys.argv[1:] if argv is None else argv))
    except (measure.ResourceGuardError, ensemble.ConvergenceError) as exc:
        code, msg = EXIT_RESOURCE, str(exc)
    except (ValidationError, ParameterError, OrbitUnavailable, measure.DegenerateError) as exc:
        code, msg = EXIT_VALIDATION, str(exc)
    except OSError as exc:
        code, msg = EXIT_IO, f"{exc.strerror or exc}: {exc.filename or ''}".rstrip(": ")
    sys.stderr.write(f"bakerlab: error: {msg}\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
