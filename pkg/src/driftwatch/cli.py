"""``driftwatch`` command line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 estimation failure.
Results go to stdout (JSON or CSV) or ``--out``; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import replace

import numpy as np

from .changepoint import Trim, TrimSpec, binary_segmentation, run_test, segment_estimates
from .estimate import MdpdeConfig, fit
from .exceptions import DataError, DomainError, EstimationError, ParameterShapeError
from .experiments import PRESETS, emit_curves, emit_table, preset, run_mc, spec_from_dict
from .forecast import ForecastFitError, rolling_evaluate
from .model import MODEL_NAMES, get_model
from .simulate import (
    ContaminationSpec,
    SamplePath,
    SimConfig,
    contaminate,
    derive_seed,
    simulate_path,
    simulate_path_with_change,
)

log = logging.getLogger("driftwatch")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ESTIMATION = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def read_series(path_or_file, h: float | None = None) -> SamplePath:
    """Read a ``t,x`` or single-column ``x`` CSV into a SamplePath.

    With a ``t`` column the spacing must be constant (relative tolerance
    1e-9) and defines ``h``; otherwise ``h`` must be given.
    """
    if hasattr(path_or_file, "read"):
        text = path_or_file.read()
        name = "<stdin>"
    else:
        name = str(path_or_file)
        try:
            with open(path_or_file, newline="") as fh:
                text = fh.read()
        except OSError as exc:
            raise DataError(f"cannot read {name}: {exc}") from exc
    rows = [r for r in csv.reader(text.splitlines())]
    rows = [(i + 1, r) for i, r in enumerate(rows) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{name}: empty file")
    header = [c.strip().lower() for c in rows[0][1]]
    if header == ["t", "x"]:
        has_t = True
    elif header == ["x"]:
        has_t = False
    else:
        raise DataError(f"{name}: line {rows[0][0]}: expected header 't,x' or 'x', got {rows[0][1]}")
    ncol = 2 if has_t else 1
    t_vals, x_vals = [], []
    for lineno, r in rows[1:]:
        if len(r) != ncol:
            raise DataError(f"{name}: line {lineno}: expected {ncol} column(s), got {len(r)}")
        try:
            nums = [float(c) for c in r]
        except ValueError:
            raise DataError(f"{name}: line {lineno}: non-numeric value in {r}") from None
        if not all(math.isfinite(v) for v in nums):
            raise DataError(f"{name}: line {lineno}: non-finite value in {r}")
        if has_t:
            t_vals.append(nums[0])
        x_vals.append(nums[-1])
    if len(x_vals) < 3:
        raise DataError(f"{name}: need at least 3 observations, got {len(x_vals)}")
    if has_t:
        dt = np.diff(np.array(t_vals))
        step = float(np.mean(dt))
        if not step > 0 or np.max(np.abs(dt - step)) > 1e-9 * abs(step):
            raise DataError(f"{name}: observation times are not equally spaced")
        if h is not None and not math.isclose(h, step, rel_tol=1e-9):
            raise DataError(f"{name}: --h {h} disagrees with the t column spacing {step}")
        h = step
    elif h is None:
        raise UsageError(f"{name} has no t column; pass --h")
    return SamplePath(float(h), np.array(x_vals))


def _write_path(path: SamplePath, out):
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["t", "x"])
    for t, x in zip(path.times, path.values):
        w.writerow([repr(float(t)), repr(float(x))])


def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"{what}: expected comma-separated numbers, got {text!r}") from None


def _trim(args) -> TrimSpec:
    return TrimSpec(Trim(args.trim), args.M)


def _emit(text: str, out_path: str | None):
    if out_path:
        with open(out_path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(obj):
    sys.stdout.write(json.dumps(obj, indent=2) + "\n")


def cmd_simulate(args):
    model = get_model(args.model)
    if args.h is not None:
        cfg = SimConfig(n=args.n, h=args.h, gamma=None, substeps=args.substeps, x0=args.x0, seed=args.seed)
    else:
        cfg = SimConfig(n=args.n, gamma=args.gamma, substeps=args.substeps, x0=args.x0, seed=args.seed)
    if args.change:
        parts = _floats(args.change, "--change")
        if len(parts) != model.dim_theta + 2:
            raise UsageError(f"--change needs frac,{'theta,' * model.dim_theta}sigma1")
        frac, theta1, sigma1 = parts[0], parts[1:-1], parts[-1]
        path = simulate_path_with_change(model, args.theta, args.sigma, theta1, sigma1, frac, cfg)
    else:
        path = simulate_path(model, args.theta, args.sigma, cfg)
    if args.contaminate:
        parts = _floats(args.contaminate, "--contaminate")
        if len(parts) != 2:
            raise UsageError("--contaminate needs p,varv")
        path = contaminate(path, ContaminationSpec(*parts), derive_seed(args.seed, 1))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            _write_path(path, fh)
    else:
        _write_path(path, sys.stdout)


def cmd_estimate(args):
    path = read_series(args.input, args.h)
    est = fit(args.model, path, MdpdeConfig(alpha=args.alpha, multistart_count=args.starts))
    d = est.to_dict()
    _json({k: d[k] for k in ("theta_hat", "sigma_hat", "alpha", "objective", "converged")})


def cmd_test(args):
    path = read_series(args.input, args.h)
    out = run_test(args.model, path, args.alpha, _trim(args),
                   MdpdeConfig(alpha=args.alpha, multistart_count=args.starts))
    d = out.to_dict()
    d["level"] = args.level
    d["reject"] = bool(out.p_value < args.level)
    _json(d)


def cmd_segment(args):
    path = read_series(args.input, args.h)
    cfg = MdpdeConfig(alpha=args.alpha, multistart_count=args.starts)
    res = binary_segmentation(args.model, path, args.alpha, _trim(args), args.level,
                              args.min_segment, cfg)
    alphas = _floats(args.alphas, "--alphas") if args.alphas else [args.alpha]
    rows = segment_estimates(args.model, path, res.change_points, alphas, cfg)
    segments = []
    for s, e, _ in res.segments:
        segments.append({
            "start": s,
            "end": e,
            "estimates": [{"alpha": r["alpha"], **(r["estimate"] or {})}
                          for r in rows if r["start"] == s],
        })
    _json({
        "change_points": res.change_points,
        "level": res.level,
        "alpha": args.alpha,
        "trim": args.trim,
        "M": args.M,
        "tests": [{"start": s, "end": e, **o.to_dict()} for s, e, o in res.tests],
        "segments": segments,
    })


def cmd_forecast(args):
    path = read_series(args.input, args.h)
    score, records = rolling_evaluate(args.model, path, args.eval_start, args.alpha,
                                      args.refit_every, args.from_index,
                                      MdpdeConfig(alpha=args.alpha, multistart_count=args.starts))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "actual", "predicted", "pi_lo", "pi_hi"])
            for r in records:
                w.writerow([repr(r.index * path.step), repr(r.actual), repr(r.predicted),
                            repr(r.pi_lo), repr(r.pi_hi)])
    _json(score.to_dict())


def cmd_mc(args):
    if bool(args.config) == bool(args.preset):
        raise UsageError("give exactly one of --config or --preset")
    curve = None
    if args.config:
        try:
            with open(args.config) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read config {args.config}: {exc}") from exc
        try:
            specs = [spec_from_dict(raw)]
        except (TypeError, ValueError, KeyError) as exc:
            raise DataError(f"invalid McSpec in {args.config}: {exc}") from exc
        if args.reps is not None:
            specs = [replace(s, reps=args.reps) for s in specs]
        if args.seed is not None:
            specs = [replace(s, base_seed=args.seed) for s in specs]
    else:
        if args.seed is None:
            raise UsageError("--preset requires --seed")
        specs, curve = preset(args.preset, reps=args.reps or 1000, seed=args.seed)
    if curve is not None:
        grid, values = curve
        chunks = [emit_curves(s, grid, values, args.jobs) for s in specs]
        text = chunks[0] + "".join(c.split("\n", 1)[1] for c in chunks[1:])
    else:
        tables = [run_mc(s, args.jobs) for s in specs]
        merged = tables[0]
        for t in tables[1:]:
            merged.cells.update(t.cells)
        text = emit_table(merged, args.format)
    _emit(text, args.out)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="driftwatch", description="Robust CUSUM tests for dispersion changes in diffusions.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging to stderr")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def common(sp, data=True):
        sp.add_argument("--model", required=True, choices=MODEL_NAMES)
        if data:
            sp.add_argument("--in", dest="input", required=True, help="CSV with header 't,x' or 'x'")
            sp.add_argument("--h", type=float, help="observation step (required without a t column)")
            sp.add_argument("--starts", type=int, default=5, help="optimizer multistart count")

    def test_flags(sp):
        sp.add_argument("--alpha", type=float, default=0.2)
        sp.add_argument("--trim", choices=[t.value for t in Trim], default="tent")
        sp.add_argument("--M", type=float, default=6.63)
        sp.add_argument("--level", type=float, default=0.05)

    sp = sub.add_parser("simulate", help="simulate an Euler-scheme path")
    common(sp, data=False)
    sp.add_argument("--theta", type=float, nargs="+", required=True)
    sp.add_argument("--sigma", type=float, required=True)
    sp.add_argument("--n", type=int, required=True)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--gamma", type=float, default=0.75, help="h = n**-gamma")
    g.add_argument("--h", type=float, help="explicit observation step")
    sp.add_argument("--substeps", type=int, default=20)
    sp.add_argument("--x0", type=float, default=0.0)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--contaminate", metavar="P,VARV")
    sp.add_argument("--change", metavar="FRAC,THETA1,SIGMA1")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("estimate", help="fit (theta, sigma) by minimum density power divergence")
    common(sp)
    sp.add_argument("--alpha", type=float, default=0.0)
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("test", help="CUSUM test for a dispersion change")
    common(sp)
    test_flags(sp)
    sp.set_defaults(func=cmd_test)

    sp = sub.add_parser("segment", help="binary segmentation with per-segment estimates")
    common(sp)
    test_flags(sp)
    sp.add_argument("--min-segment", type=int, default=30)
    sp.add_argument("--alphas", help="comma-separated alphas for per-segment estimates")
    sp.set_defaults(func=cmd_segment)

    sp = sub.add_parser("forecast", help="rolling one-step-ahead forecast evaluation")
    common(sp)
    sp.add_argument("--alpha", type=float, default=0.0)
    sp.add_argument("--eval-start", type=int, required=True)
    sp.add_argument("--from", dest="from_index", type=int, default=0)
    sp.add_argument("--refit-every", type=int, default=1)
    sp.add_argument("--out", help="CSV of forecast records")
    sp.set_defaults(func=cmd_forecast)

    sp = sub.add_parser("mc", help="Monte Carlo size/power tables")
    sp.add_argument("--config", help="JSON McSpec")
    sp.add_argument("--preset", choices=PRESETS)
    sp.add_argument("--reps", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--jobs", type=int, help="worker count (default $DRIFTWATCH_THREADS or 1)")
    sp.add_argument("--format", choices=["csv", "text"], default="csv")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_mc)
    return p


def parse_and_dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ForecastFitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA if isinstance(exc.cause, DataError) else EXIT_ESTIMATION
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except EstimationError as exc:
        print(f"estimation failure: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except (DomainError, ParameterShapeError, ValueError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def main():
    sys.exit(parse_and_dispatch())


if __name__ == "__main__":
    main()
