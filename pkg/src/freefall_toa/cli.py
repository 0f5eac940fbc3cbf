"""Command-line front end: ``freefall-toa {scan,pdf,verify,simulate}``.

Exit codes: 0 success, 2 validation error, 3 bound violation,
4 quadrature failure, 5 goodness-of-fit failure (simulate).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from scipy.integrate import trapezoid

from . import __version__
from .core import ToaDistribution
from .moments import BOUND_SLACK, DEFAULT_TOL
from .params import HBAR, PhysicalParams, ValidationError
from .protocols import SimConfig, default_bins_a, default_bins_b, run_protocol_a, run_protocol_b
from .quadrature import QuadratureError
from .sweep import (
    EARTH_G,
    DEFAULT_HEIGHT,
    HYDROGEN_MASS,
    SweepRow,
    SweepSpec,
    VerifySpec,
    format_table,
    pdf_table,
    scan,
    verify_grid,
)

log = logging.getLogger("freefall_toa")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_BOUND = 3
EXIT_QUADRATURE = 4
EXIT_FIT = 5


def _common(p: argparse.ArgumentParser, sigma_default: float | None = 1e-6):
    p.add_argument("--config", help="flat key=value file; explicit flags win")
    p.add_argument("--mass", type=float, default=HYDROGEN_MASS, help="particle mass [kg]")
    p.add_argument("--gravity", type=float, default=EARTH_G, help="g [m/s^2]")
    p.add_argument("--height", type=float, default=DEFAULT_HEIGHT, help="detector depth x [m]")
    p.add_argument("--hbar", type=float, default=HBAR, help="reduced Planck constant [J s]")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL, help="relative quadrature tolerance")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    if sigma_default is not None:
        p.add_argument("--sigma", type=float, default=sigma_default,
                       help="initial position spread [m]")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="freefall-toa",
        description="Arrival-time statistics of a free-falling Gaussian wave packet.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", help="sweep sigma and emit the product, mean and asymptote curves")
    _common(p, sigma_default=None)
    p.add_argument("--sigma", type=float, help="single sigma (overrides the range)")
    p.add_argument("--sigma-min", type=float, help="default 1e-2 * height")
    p.add_argument("--sigma-max", type=float, help="default 1e1 * height")
    p.add_argument("--sigma-steps", type=int, default=200)
    p.add_argument("--linear", action="store_true", help="linear instead of log spacing")
    p.add_argument("--t-eval", type=float, default=0.0, help="time at which Delta X_t is taken")
    p.add_argument("--columns", help="comma-separated subset of output columns")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("pdf", help="tabulate the arrival-time density and CDF")
    _common(p)
    p.add_argument("--points", type=int, default=4001)
    p.add_argument("--t-min", type=float)
    p.add_argument("--t-max", type=float)
    p.add_argument("--spacing", choices=("log", "linear"), default="log")
    p.set_defaults(func=cmd_pdf)

    p = sub.add_parser("verify", help="check the uncertainty bounds over a (q, sigma/x) grid")
    _common(p, sigma_default=None)
    p.add_argument("--q-min", type=float, default=1e-3)
    p.add_argument("--q-max", type=float, default=1e3)
    p.add_argument("--q-steps", type=int, default=40)
    p.add_argument("--ratio-min", type=float, default=1e-3, help="smallest sigma/x")
    p.add_argument("--ratio-max", type=float, default=1e2, help="largest sigma/x")
    p.add_argument("--ratio-steps", type=int, default=25)
    p.add_argument("--slack", type=float, default=BOUND_SLACK)
    p.add_argument("--skip-delay", action="store_true",
                   help="report but do not fail on negative mean delay")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="Monte Carlo run of protocol A or B")
    _common(p)
    p.add_argument("--protocol", choices=("A", "B"), default="B")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--bin-min", type=float, help="left edge of the first bin")
    p.add_argument("--bin-width", type=float)
    p.add_argument("--t-eval", type=float, default=0.0, help="measurement time for protocol A")
    p.add_argument("--method", choices=("rejection", "inverse"), default="rejection")
    p.add_argument("--p-threshold", type=float, default=1e-4)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_simulate)
    return parser


def _load_config(path: str) -> dict[str, str]:
    out = {}
    for n, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ":" if ":" in line else None
        if sep is None:
            raise ValidationError("config", f"{path}:{n}", "expected key = value")
        k, v = (s.strip() for s in line.split(sep, 1))
        out[k.lstrip("-").replace("-", "_")] = v
    return out


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]):
    """Re-parse ``argv`` with config-file values installed as defaults."""
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    cfg = _load_config(args.config)
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    subparser = sub.choices[args.command]
    known = {a.dest: a for a in subparser._actions}
    for k in cfg:
        if k not in known or k in ("help", "config"):
            raise ValidationError("config", k, f"unknown key for '{args.command}'")
    converted = {}
    for k, v in cfg.items():
        act = known[k]
        if isinstance(act, argparse._StoreTrueAction):
            converted[k] = v.lower() in ("1", "true", "yes", "on")
        elif act.type is not None:
            converted[k] = act.type(v)
        else:
            converted[k] = v
        if act.choices is not None and converted[k] not in act.choices:
            raise ValidationError(k, v, f"must be one of {sorted(act.choices)}")
    subparser.set_defaults(**converted)
    return parser.parse_args(argv)


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _params(args) -> PhysicalParams:
    return PhysicalParams(m=args.mass, g=args.gravity, x=args.height,
                          sigma=args.sigma, hbar=args.hbar)


def _base_meta(args) -> dict:
    return {"m": args.mass, "g": args.gravity, "x": args.height, "hbar": args.hbar,
            "tol": args.tol}


def cmd_scan(args) -> int:
    if args.sigma is not None:
        lo = hi = args.sigma
        n = 1
    else:
        lo = args.sigma_min if args.sigma_min is not None else 1e-2 * args.height
        hi = args.sigma_max if args.sigma_max is not None else 1e1 * args.height
        n = args.sigma_steps
    spec = SweepSpec(m=args.mass, g=args.gravity, x=args.height, hbar=args.hbar,
                     sigma_min=lo, sigma_max=hi, n_points=n,
                     log_spacing=not args.linear, t_eval=args.t_eval, tol=args.tol,
                     outputs=tuple(c for c in (args.columns or "").split(",") if c))
    rows = scan(spec, jobs=args.jobs)
    columns = list(spec.outputs) or [f for f in SweepRow.__dataclass_fields__]
    meta = {**_base_meta(args), "sigma_min": lo, "sigma_max": hi, "sigma_steps": n,
            "spacing": "linear" if args.linear else "log", "t_eval": args.t_eval}
    _emit(format_table([asdict(r) for r in rows], columns, args.format, meta), args.out)

    failed = [r for r in rows if r.failed]
    if failed:
        log.error("%d row(s) failed quadrature", len(failed))
        return EXIT_QUADRATURE
    worst = min(r.ratio for r in rows)
    if worst < 1.0 - BOUND_SLACK:
        log.error("bound violated: min ratio %.9g", worst)
        return EXIT_BOUND
    return EXIT_OK


def cmd_pdf(args) -> int:
    params = _params(args)
    tab = pdf_table(params, n_points=args.points, t_min=args.t_min, t_max=args.t_max,
                    spacing=args.spacing)
    rows = [{"t": t, "pdf": p, "cdf": c} for t, p, c in zip(tab["t"], tab["pdf"], tab["cdf"])]
    meta = {**_base_meta(args), "sigma": args.sigma, "spacing": args.spacing,
            "trapezoid_mass": float(trapezoid(tab["pdf"], tab["t"]))}
    _emit(format_table(rows, ["t", "pdf", "cdf"], args.format, meta), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    spec = VerifySpec(m=args.mass, g=args.gravity, hbar=args.hbar,
                      q_min=args.q_min, q_max=args.q_max, q_steps=args.q_steps,
                      ratio_min=args.ratio_min, ratio_max=args.ratio_max,
                      ratio_steps=args.ratio_steps, tol=args.tol)
    report = verify_grid(spec, jobs=args.jobs, slack=args.slack)
    summary = report.summary()
    if args.out:
        meta = {**_base_meta(args), **{k: v for k, v in summary.items()}}
        Path(args.out).write_text(format_table([asdict(r) for r in report.rows],
                                               None, args.format, meta))
    sys.stdout.write(json.dumps(summary, indent=2) + "\n")
    if report.n_failed:
        return EXIT_QUADRATURE
    if not (report.bound_ok and report.conjecture_ok):
        return EXIT_BOUND
    if not (report.delay_ok or args.skip_delay):
        log.warning("mean arrival time below t_c: min delay/t_c = %.6g",
                    report.min_delay_over_tc)
        return EXIT_BOUND
    return EXIT_OK


def cmd_simulate(args) -> int:
    params = _params(args)
    dist = ToaDistribution(params)
    if args.protocol == "A":
        lo, width, n = default_bins_a(dist, args.t_eval, args.bins)
    else:
        lo, width, n = default_bins_b(dist, args.bins)
    if args.bin_min is not None:
        lo = args.bin_min
    if args.bin_width is not None:
        width = args.bin_width
    cfg = SimConfig(n_trials=args.trials, seed=args.seed, bin_spec=(lo, width, n),
                    protocol=args.protocol, workers=args.workers)
    if args.protocol == "A":
        res = run_protocol_a(dist, args.t_eval, cfg)
    else:
        res = run_protocol_b(dist, cfg, method=args.method)
    meta = {**_base_meta(args), "sigma": args.sigma, "protocol": args.protocol,
            "seed": args.seed, "trials": args.trials, "tool": f"freefall-toa {__version__}"}
    hist = res.histogram
    text = hist.to_json(meta) + "\n" if args.format == "json" else hist.to_csv(meta)
    _emit(text, args.out)
    summary = {**res.summary(), "seed": args.seed, "p_threshold": args.p_threshold}
    if args.out:
        Path(args.out).with_suffix(".summary.json").write_text(
            json.dumps(summary, indent=2) + "\n")
    sys.stderr.write(json.dumps(summary, indent=2) + "\n")
    return EXIT_OK if res.p_value >= args.p_threshold else EXIT_FIT


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        return args.func(args)
    except (ValidationError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION
    except QuadratureError as exc:
        sys.stderr.write(f"quadrature failure: {exc}\n")
        return EXIT_QUADRATURE


if __name__ == "__main__":
    sys.exit(main())
