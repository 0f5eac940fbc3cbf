"""Parameter sweeps, verification grids and flat-file table I/O."""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import __version__
from .core import ToaDistribution
from .moments import (
    BOUND_SLACK,
    DEFAULT_TOL,
    K_NEAR,
    delta_toa_far_quantum,
    delta_toa_nearfield,
    delta_toa_semiclassical,
    energy_moments,
    mean_toa_far_quantum,
    mean_toa_nearfield,
    product_bound,
    toa_moments,
    uncertainty_product,
)
from .params import HBAR, PhysicalParams, Regime, ValidationError, classify_regime
from .quadrature import QuadratureError

__all__ = [
    "HYDROGEN_MASS",
    "EARTH_G",
    "DEFAULT_HEIGHT",
    "SweepSpec",
    "SweepRow",
    "evaluate_point",
    "scan",
    "VerifySpec",
    "VerifyReport",
    "verify_grid",
    "pdf_table",
    "format_table",
    "read_table",
]

HYDROGEN_MASS = 1.67e-27
EARTH_G = 9.8
DEFAULT_HEIGHT = 1e-5


@dataclass(frozen=True)
class SweepSpec:
    m: float = HYDROGEN_MASS
    g: float = EARTH_G
    x: float = DEFAULT_HEIGHT
    hbar: float = HBAR
    sigma_min: float = 1e-2 * DEFAULT_HEIGHT
    sigma_max: float = 1e1 * DEFAULT_HEIGHT
    n_points: int = 200
    log_spacing: bool = True
    t_eval: float = 0.0
    tol: float = DEFAULT_TOL
    outputs: tuple[str, ...] = ()

    def __post_init__(self):
        PhysicalParams(self.m, self.g, self.x, self.sigma_min, self.hbar)
        PhysicalParams(self.m, self.g, self.x, self.sigma_max, self.hbar)
        if self.n_points == 1:
            if self.sigma_min != self.sigma_max:
                raise ValidationError("sigma_max", self.sigma_max,
                                      "must equal sigma_min for a single point")
        else:
            if not self.sigma_min < self.sigma_max:
                raise ValidationError("sigma_max", self.sigma_max, "must exceed sigma_min")
            if self.n_points < 2:
                raise ValidationError("n_points", self.n_points, "must be >= 1")
        if not self.t_eval >= 0.0:
            raise ValidationError("t_eval", self.t_eval, "must be >= 0")
        unknown = set(self.outputs) - {f.name for f in fields(SweepRow)}
        if unknown:
            raise ValidationError("outputs", sorted(unknown), "unknown column")

    def sigmas(self) -> np.ndarray:
        if self.n_points == 1:
            return np.array([self.sigma_min])
        if self.log_spacing:
            return np.geomspace(self.sigma_min, self.sigma_max, self.n_points)
        return np.linspace(self.sigma_min, self.sigma_max, self.n_points)

    def params(self, sigma: float) -> PhysicalParams:
        return PhysicalParams(self.m, self.g, self.x, float(sigma), self.hbar)


@dataclass(frozen=True)
class SweepRow:
    sigma: float
    sigma_over_x: float
    q: float
    t_c: float
    tau: float
    delta_t: float
    delta_x: float
    product: float
    bound: float
    ratio: float
    mean_toa: float
    delay: float
    delta_e: float
    te_ratio: float
    regime: str
    margin: float
    product_far_semiclassical: float
    product_far_quantum: float
    product_nearfield: float
    mean_far_quantum: float
    mean_nearfield: float
    quad_error: float
    error: str = ""

    @property
    def failed(self) -> bool:
        return bool(self.error)


def evaluate_point(params: PhysicalParams, t_eval: float = 0.0,
                   tol: float = DEFAULT_TOL) -> SweepRow:
    """Every sweep column for one parameter set.

    A quadrature failure is captured in ``error`` with NaN numeric columns,
    so that a sweep can carry on past it.
    """
    dist = ToaDistribution(params)
    sc = dist.scales
    regime = classify_regime(sc)
    dx = dist.position_sigma(t_eval)
    asym = dict(
        product_far_semiclassical=delta_toa_semiclassical(params) * dx,
        product_far_quantum=delta_toa_far_quantum(params) * dx,
        product_nearfield=delta_toa_nearfield(params) * dx,
        mean_far_quantum=mean_toa_far_quantum(params),
        mean_nearfield=mean_toa_nearfield(params),
    )
    common = dict(sigma=params.sigma, sigma_over_x=sc.sigma_over_x, q=sc.q,
                  t_c=sc.t_c, tau=sc.tau, delta_x=dx, bound=product_bound(params),
                  delta_e=energy_moments(params).delta_e,
                  regime=regime.label.value, margin=regime.margin, **asym)
    nan = float("nan")
    try:
        mom = toa_moments(dist, tol)
    except QuadratureError as exc:
        return SweepRow(delta_t=nan, product=nan, ratio=nan, mean_toa=nan, delay=nan,
                        te_ratio=nan, quad_error=nan, error=str(exc), **common)
    unc = uncertainty_product(dist, t_eval, moments=mom)
    return SweepRow(
        delta_t=unc.delta_t,
        product=unc.product,
        ratio=unc.ratio,
        mean_toa=mom.mean_toa,
        delay=mom.delay,
        te_ratio=common["delta_e"] * unc.delta_t / (0.5 * params.hbar),
        quad_error=mom.abs_error_estimate,
        **common,
    )


def _eval_star(args):
    return evaluate_point(*args)


def _map(fn, items, jobs: int):
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))
    return [fn(it) for it in items]


def scan(spec: SweepSpec, jobs: int = 1) -> list[SweepRow]:
    """One row per sigma, in input order regardless of ``jobs``."""
    items = [(spec.params(s), spec.t_eval, spec.tol) for s in spec.sigmas()]
    return _map(_eval_star, items, jobs)


# verification grid ---------------------------------------------------------

@dataclass(frozen=True)
class VerifySpec:
    m: float = HYDROGEN_MASS
    g: float = EARTH_G
    hbar: float = HBAR
    q_min: float = 1e-3
    q_max: float = 1e3
    q_steps: int = 40
    ratio_min: float = 1e-3
    ratio_max: float = 1e2
    ratio_steps: int = 25
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        for name in ("m", "g", "hbar", "q_min", "q_max", "ratio_min", "ratio_max"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValidationError(name, v)
        for lo, hi, n, label in ((self.q_min, self.q_max, self.q_steps, "q"),
                                 (self.ratio_min, self.ratio_max, self.ratio_steps, "ratio")):
            if n < 1:
                raise ValidationError(f"{label}_steps", n, "must be >= 1")
            if n == 1 and lo != hi:
                raise ValidationError(f"{label}_max", hi, "must equal the minimum for one step")
            if n > 1 and not lo < hi:
                raise ValidationError(f"{label}_max", hi, "must exceed the minimum")

    def points(self) -> list[PhysicalParams]:
        qs = np.geomspace(self.q_min, self.q_max, self.q_steps)
        rs = np.geomspace(self.ratio_min, self.ratio_max, self.ratio_steps)
        return [PhysicalParams.from_dimensionless(q, r, self.m, self.g, self.hbar)
                for q in qs for r in rs]


@dataclass
class VerifyReport:
    n_points: int
    n_failed: int
    min_ratio: float
    min_te_ratio: float
    min_delay_over_tc: float
    max_conjecture_rel_err: float
    min_nearfield_ratio: float
    slack: float
    rows: list[SweepRow]

    @property
    def bound_ok(self) -> bool:
        """Position/arrival bound and time-energy bound both hold within slack."""
        return bool(self.min_ratio >= 1.0 - self.slack
                    and self.min_te_ratio >= 1.0 - self.slack)

    @property
    def delay_ok(self) -> bool:
        return bool(self.min_delay_over_tc >= -self.slack)

    @property
    def conjecture_ok(self) -> bool:
        return bool(self.max_conjecture_rel_err <= 5e-7)

    def summary(self) -> dict:
        d = {k: float(v) if isinstance(v, float) else v
             for k, v in asdict(self).items() if k != "rows"}
        d.update(bound_ok=self.bound_ok, delay_ok=self.delay_ok,
                 conjecture_ok=self.conjecture_ok)
        return d


def verify_grid(spec: VerifySpec, jobs: int = 1, slack: float = BOUND_SLACK) -> VerifyReport:
    """Check the position/arrival bound, time-energy bound and mean delay on a grid."""
    pts = spec.points()
    rows = _map(_eval_star, [(p, 0.0, spec.tol) for p in pts], jobs)
    ok = [r for r in rows if not r.failed]

    def lo(vals):
        vals = list(vals)
        return min(vals) if vals else float("nan")

    conj = max(abs(r.q * r.t_c * r.sigma / r.bound - 1.0) for r in rows)
    near = [r.product / (K_NEAR * math.sqrt(2.0 * r.sigma ** 3 / spec.g))
            for r in ok if r.regime == Regime.NEAR_FIELD.value]
    return VerifyReport(
        n_points=len(rows),
        n_failed=len(rows) - len(ok),
        min_ratio=lo(r.ratio for r in ok),
        min_te_ratio=lo(r.te_ratio for r in ok),
        min_delay_over_tc=lo(r.delay / r.t_c for r in ok),
        max_conjecture_rel_err=conj,
        min_nearfield_ratio=lo(near),
        slack=slack,
        rows=rows,
    )


# arrival-time density table -------------------------------------------------

def pdf_table(params: PhysicalParams, n_points: int = 4001,
              t_min: float | None = None, t_max: float | None = None,
              spacing: str = "log", tail: float = 1e-8) -> dict[str, np.ndarray]:
    """Density and CDF of the arrival time on a grid.

    Missing grid ends default to the ``tail`` and ``1 - tail`` quantiles. A
    geometric grid is the default because in the strongly quantum regime the
    density has structure on both the ``t_c/q`` and ``q t_c`` scales.
    """
    if n_points < 2:
        raise ValidationError("points", n_points, "must be >= 2")
    dist = ToaDistribution(params)
    if t_min is None:
        t_min = float(dist.toa_quantile(tail))
    if t_max is None:
        t_max = float(dist.toa_quantile(1.0 - tail))
    if not (t_min >= 0.0 and t_max > t_min):
        raise ValidationError("t_max", t_max, f"must exceed t_min={t_min}")
    if spacing == "log" and t_min > 0.0:
        t = np.geomspace(t_min, t_max, n_points)
    elif spacing in ("log", "linear"):
        t = np.linspace(t_min, t_max, n_points)
    else:
        raise ValidationError("spacing", spacing, "must be 'log' or 'linear'")
    return {"t": t, "pdf": np.asarray(dist.toa_pdf(t)), "cdf": np.asarray(dist.toa_cdf(t))}


# table I/O -----------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def format_table(rows: list[dict], columns: list[str] | None = None,
                 fmt: str = "csv", metadata: dict | None = None) -> str:
    """Render rows as CSV (``#`` metadata lines, one header line) or JSON."""
    meta = {"tool": f"freefall-toa {__version__}", **(metadata or {})}
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    if fmt == "json":
        return json.dumps({
            "metadata": {k: _jsonable(v) for k, v in meta.items()},
            "columns": columns,
            "rows": [{c: _jsonable(r[c]) for c in columns} for r in rows],
        }, indent=2) + "\n"
    if fmt != "csv":
        raise ValidationError("format", fmt, "must be 'csv' or 'json'")
    buf = io.StringIO()
    for k, v in meta.items():
        buf.write(f"# {k}={_fmt(v)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def read_table(text: str) -> tuple[dict, list[dict]]:
    """Parse :func:`format_table` CSV output back into metadata and rows."""
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            meta[k] = v
        elif line.strip():
            body.append(line)
    rows = []
    for rec in csv.DictReader(body):
        out = {}
        for k, v in rec.items():
            try:
                out[k] = float(v)
            except ValueError:
                out[k] = v
        rows.append(out)
    return meta, rows
