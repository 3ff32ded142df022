"""Command-line surface.

Subcommands: check (admissibility of a response), density (ratio or
transformed density curves), simulate (ratio-driven or GBM price paths),
tails (tail classification of a sample), fit (family recovery from a
price series) and replay (re-run a saved manifest).

Exit codes: 0 success (for check: all conditions hold), 1 condition
failure or numerical failure, 2 malformed input or domain violation,
3 non-identifiable family tie.  Commands that write artifacts also write
a ``<output>.manifest`` sidecar and never leave partial files behind.

Environment: RATIOTAILS_SEED and RATIOTAILS_THREADS provide defaults for
--seed and --threads.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .density import (CurveMethod, DensityCurve, OrderFlowParams, PowerMap,
                      TransformedDensity, ratio_density,
                      ratio_density_anticorr)
from .errors import (DegenerateTailError, DomainError, GridError,
                     InputFormatError, InsufficientTailError,
                     NonIdentifiableError, NonpositiveRatioError,
                     NonpositiveSampleError, QuadratureError, RangeError,
                     RatioTailsError, RejectionRateError, RootFindError,
                     TimestampError, WindowError)
from .fileio import (RunManifest, format_key_values, key_values_csv,
                     load_price_series, load_response_table, load_samples,
                     save_density_curve, save_price_series, sha256_file,
                     write_atomic)
from .fitting import WindowSpec, exponent_report, fit_price_series
from .response import (Family, ResponseSpec, check_admissibility,
                       reciprocal_log_grid)
from .simulate import (RejectionPolicy, SimConfig, simulate_gbm,
                       simulate_path)
from .tails import TailKind, classify_tail, threshold_sweep

_INPUT_ERRORS = (InputFormatError, DomainError, WindowError, TimestampError,
                 GridError, InsufficientTailError, NonpositiveSampleError,
                 RangeError)
_RUNTIME_ERRORS = (QuadratureError, RootFindError, RejectionRateError,
                   NonpositiveRatioError, DegenerateTailError)

_CANDIDATE_KINDS = {"power": TailKind.POWER_LAW,
                    "exp": TailKind.EXPONENTIAL,
                    "stretched": TailKind.STRETCHED_EXPONENTIAL}


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        raise InputFormatError(f"environment variable {name}={raw!r} "
                               "is not an integer")


def _build_response(family: str, q) -> ResponseSpec:
    fam = Family(family)
    if fam in (Family.SYM, Family.LOG):
        return ResponseSpec(fam)
    if q is None:
        raise InputFormatError(f"--family {family} requires --q")
    return ResponseSpec(fam, float(q))


def _manifest_for(command: str, params: dict, seed=None, inputs=()) -> RunManifest:
    hashes = {}
    for path in inputs:
        hashes[os.path.basename(path)] = sha256_file(path)
    return RunManifest(command=command,
                       params={k: str(v) for k, v in params.items()},
                       seed=seed, version=__version__,
                       input_hashes=hashes, started=RunManifest.now())


def _finish(manifest: RunManifest, out_path: str | None):
    manifest.finished = RunManifest.now()
    if out_path:
        manifest.save(out_path + ".manifest")


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------

def _run_check(args) -> int:
    if args.table:
        response = load_response_table(args.table)
        inputs = [args.table]
    elif args.family:
        response = _build_response(args.family, args.q)
        if args.normalize:
            response = response.normalized()
        inputs = []
    else:
        raise InputFormatError("provide --family or --table")

    grid = reciprocal_log_grid(args.grid_max_log, args.grid_points)
    report = check_admissibility(response, grid)
    text = report.summary()
    print(text)
    params = {"family": args.family or "", "q": "" if args.q is None else args.q,
              "table": args.table or "", "normalize": str(args.normalize).lower(),
              "grid-max-log": args.grid_max_log,
              "grid-points": args.grid_points, "out": args.out or ""}
    manifest = _manifest_for("check", params, inputs=inputs)
    if args.out:
        write_atomic(args.out, text + "\n")
    _finish(manifest, args.out)
    return 0 if report.satisfies_all else 1


# ---------------------------------------------------------------------------
# density
# ---------------------------------------------------------------------------

def _density_grid(args) -> np.ndarray:
    if args.points < 2:
        raise InputFormatError("--points must be at least 2")
    if args.log_grid:
        if args.x_min <= 0:
            raise InputFormatError("--log-grid needs a positive --x-min")
        return np.geomspace(args.x_min, args.x_max, args.points)
    return np.linspace(args.x_min, args.x_max, args.points)


def _run_density(args) -> int:
    params = OrderFlowParams(args.mu1, args.mu2, args.sigma1, args.sigma2,
                             args.rho)
    grid = _density_grid(args)
    if args.transform == "none":
        if params.is_anticorrelated:
            fn = lambda x: ratio_density_anticorr(params, x)
            method = CurveMethod.EXACT_ANTICORR
        else:
            fn = lambda x: ratio_density(params, x)
            method = CurveMethod.QUADRATURE
    else:
        if args.transform == "pow":
            if args.q is None:
                raise InputFormatError("--transform pow requires --q")
            fn = TransformedDensity(params, PowerMap(args.q))
        else:
            fn = TransformedDensity(params, _build_response(args.transform,
                                                            args.q))
        method = CurveMethod.QUADRATURE

    curve = DensityCurve.from_function(fn, grid, method)
    save_density_curve(curve, args.out)

    print(f"points={len(grid)} mass={curve.mass:.6f}")
    try:
        span = (grid[-1] / 100.0, grid[-1])
        if span[0] > 0 and span[0] < span[1]:
            slope = curve.loglog_tail_slope(*span)
            print(f"loglog_slope[{span[0]:g},{span[1]:g}]={slope:.4f}")
    except (DomainError, FloatingPointError):
        pass

    cli_params = {"mu1": args.mu1, "mu2": args.mu2, "sigma1": args.sigma1,
                  "sigma2": args.sigma2, "rho": args.rho,
                  "transform": args.transform,
                  "q": "" if args.q is None else args.q,
                  "x-min": args.x_min, "x-max": args.x_max,
                  "points": args.points,
                  "log-grid": str(args.log_grid).lower(), "out": args.out}
    manifest = _manifest_for("density", cli_params)
    _finish(manifest, args.out)
    return 0


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _run_simulate(args) -> int:
    seed = args.seed if args.seed is not None else _env_int("RATIOTAILS_SEED", 0)
    threads = args.threads if args.threads is not None else \
        _env_int("RATIOTAILS_THREADS", 1)

    if args.model == "gbm":
        series = simulate_gbm(args.mu, args.sigma, args.dt, args.steps,
                              args.p0, seed, threads=threads)
        cli_params = {"model": "gbm", "mu": args.mu, "sigma": args.sigma,
                      "dt": args.dt, "steps": args.steps, "p0": args.p0,
                      "out": args.out}
        config_digest = None
    else:
        params = OrderFlowParams(args.mu1, args.mu2, args.sigma1, args.sigma2,
                                 args.rho)
        spec = _build_response(args.family, args.q)
        cfg = SimConfig(params=params, response=spec, tau0=args.tau0,
                        dt=args.dt, n_steps=args.steps, p0=args.p0,
                        seed=seed,
                        rejection_policy=RejectionPolicy(args.policy))
        series = simulate_path(cfg, threads=threads)
        cli_params = {"model": "ratio", "mu1": args.mu1, "mu2": args.mu2,
                      "sigma1": args.sigma1, "sigma2": args.sigma2,
                      "rho": args.rho, "family": args.family,
                      "q": "" if args.q is None else args.q,
                      "tau0": args.tau0, "dt": args.dt, "steps": args.steps,
                      "p0": args.p0, "policy": args.policy, "out": args.out}
        config_digest = cfg.digest()

    save_price_series(series, args.out)
    r = series.log_returns()
    print(f"steps={args.steps} mean_log_return={np.mean(r):.6e} "
          f"var_log_return={np.var(r):.6e} "
          f"rejected={series.meta.get('rejected', 0)}")
    manifest = _manifest_for("simulate", cli_params, seed=seed)
    if config_digest is not None:
        manifest.input_hashes["config"] = config_digest
    _finish(manifest, args.out)
    return 0


# ---------------------------------------------------------------------------
# tails
# ---------------------------------------------------------------------------

def _returns_from_prices(path: str, delta_t: float) -> np.ndarray:
    series = load_price_series(path)
    h = np.median(np.diff(series.times))
    j = delta_t / h
    if abs(j - round(j)) > 1e-6 * max(j, 1.0) or round(j) < 1:
        raise TimestampError(
            f"--as-returns {delta_t:g} is not a multiple of the sampling "
            f"step {h:g}")
    j = int(round(j))
    lp = series.log_prices
    return np.expm1(lp[j:] - lp[:-j]) / (j * h)


def _parse_candidates(raw: str):
    kinds = []
    for name in raw.split(","):
        name = name.strip()
        if name not in _CANDIDATE_KINDS:
            raise InputFormatError(
                f"unknown tail candidate {name!r}; choose from "
                f"{sorted(_CANDIDATE_KINDS)}")
        kinds.append(_CANDIDATE_KINDS[name])
    return kinds


def _run_tails(args) -> int:
    if bool(args.samples) == bool(args.prices):
        raise InputFormatError("provide exactly one of --samples / --prices")
    if args.prices and args.as_returns is None:
        raise InputFormatError("--prices requires --as-returns DT")
    if args.samples:
        values = load_samples(args.samples)
        inputs = [args.samples]
    else:
        values = _returns_from_prices(args.prices, args.as_returns)
        inputs = [args.prices]

    kinds = _parse_candidates(args.candidates)
    report = classify_tail(values, kinds,
                           threshold_quantile=args.threshold_quantile,
                           side=args.side)
    lines = dict(report.key_values())
    sweep = threshold_sweep(values, kinds, side=args.side)
    for swept in sweep:
        lines[f"sweep.{swept.threshold:.6g}.class"] = swept.tail.kind.value
        lines[f"sweep.{swept.threshold:.6g}.estimate"] = swept.estimate
    text = format_key_values(lines)
    print(text, end="")
    if args.out:
        write_atomic(args.out, text)
    if args.csv:
        write_atomic(args.csv,
                     key_values_csv([r.key_values() for r in sweep]))
    cli_params = {"samples": args.samples or "", "prices": args.prices or "",
                  "as-returns": "" if args.as_returns is None else args.as_returns,
                  "candidates": args.candidates,
                  "threshold-quantile": args.threshold_quantile,
                  "side": args.side, "out": args.out or "",
                  "csv": args.csv or ""}
    manifest = _manifest_for("tails", cli_params, inputs=inputs)
    _finish(manifest, args.out or args.csv)
    return 0


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

def _run_fit(args) -> int:
    series = load_price_series(args.prices)
    w = WindowSpec(args.delta_t, args.big_delta_t, args.stride)
    fams = [Family(f.strip()) for f in args.candidates.split(",") if f.strip()]
    result = fit_price_series(series, w, fams,
                              interpolate=args.interpolate,
                              threshold_quantile=args.threshold_quantile,
                              n_boot=args.boot)
    text = exponent_report(result)
    print(text)
    if args.out:
        write_atomic(args.out, format_key_values(result.key_values()))
    if args.csv:
        write_atomic(args.csv, key_values_csv([result.key_values()]))
    if args.overlay:
        _write_overlay(series, w, result, args.overlay)
    cli_params = {"prices": args.prices, "delta-t": args.delta_t,
                  "big-delta-t": args.big_delta_t, "stride": args.stride,
                  "candidates": args.candidates,
                  "threshold-quantile": args.threshold_quantile,
                  "interpolate": str(args.interpolate).lower(),
                  "boot": "" if args.boot is None else args.boot,
                  "out": args.out or "", "overlay": args.overlay or "",
                  "csv": args.csv or ""}
    manifest = _manifest_for("fit", cli_params, inputs=[args.prices])
    _finish(manifest, args.out or args.overlay or args.csv)
    return 0


def _write_overlay(series, w, result, path: str) -> None:
    """Empirical density of the changes next to the fitted model density."""
    from .fitting import _log_slope, _make_law, relative_changes

    changes = relative_changes(series, w)
    lo, hi = np.quantile(changes, [0.001, 0.999])
    hist, edges = np.histogram(changes, bins=160, range=(lo, hi), density=True)
    centers = 0.5 * (edges[:-1] + edges[1:])
    law = _make_law(result.nuisance_spread, -1.0)
    spec = result.response
    s = result.nuisance_scale
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        r = np.asarray(spec.inverse(centers / s), dtype=float)
        model = np.exp(law.log_pdf(r) - _log_slope(spec, r)) / s / law.pos_mass
    model = np.where(np.isfinite(model), model, 0.0)
    rows = ["x,f_model,f_empirical"]
    rows.extend(f"{repr(float(x))},{repr(float(m))},{repr(float(e))}"
                for x, m, e in zip(centers, model, hist))
    write_atomic(path, "\n".join(rows) + "\n")


# ---------------------------------------------------------------------------
# replay
# ---------------------------------------------------------------------------

_FLAG_PARAMS = {"normalize", "log-grid", "interpolate"}


def _run_replay(args) -> int:
    manifest = RunManifest.load(args.manifest)
    argv = [manifest.command]
    params = dict(manifest.params)
    if args.out is not None and "out" in params:
        params["out"] = args.out
    for key, value in params.items():
        if key in _FLAG_PARAMS:
            if value == "true":
                argv.append(f"--{key}")
            continue
        if value == "":
            continue
        argv.extend([f"--{key}", value])
    if manifest.seed is not None:
        argv.extend(["--seed", str(manifest.seed)])
    if args.threads is not None:
        argv.extend(["--threads", str(args.threads)])
    return main(argv)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_seed_threads(p):
    p.add_argument("--seed", type=int, default=None,
                   help="RNG seed (default: RATIOTAILS_SEED or 0)")
    p.add_argument("--threads", type=int, default=None,
                   help="worker-thread cap; never changes results")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ratiotails",
        description="Ratio-driven price dynamics: densities, simulation, "
                    "tail estimation and family recovery")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="check response admissibility")
    p.add_argument("--family", choices=[f.value for f in Family])
    p.add_argument("--q", type=float, default=None)
    p.add_argument("--table", help="x,g CSV of a tabulated response")
    p.add_argument("--normalize", action="store_true",
                   help="rescale to unit slope at r=1 before checking")
    p.add_argument("--grid-max-log", type=float, default=6.0)
    p.add_argument("--grid-points", type=int, default=120)
    p.add_argument("--out", default=None)
    p.add_argument("--threads", type=int, default=None,
                   help="accepted for pipeline uniformity; this command "
                        "is serial")
    p.set_defaults(run=_run_check)

    p = sub.add_parser("density", help="evaluate a density curve to CSV")
    p.add_argument("--mu1", type=float, default=1.0)
    p.add_argument("--mu2", type=float, default=1.0)
    p.add_argument("--sigma1", type=float, default=0.5)
    p.add_argument("--sigma2", type=float, default=0.5)
    p.add_argument("--rho", type=float, default=-1.0)
    p.add_argument("--transform", default="none",
                   choices=["none", "pow"] + [f.value for f in Family])
    p.add_argument("--q", type=float, default=None)
    p.add_argument("--x-min", type=float, default=-2.0)
    p.add_argument("--x-max", type=float, default=6.0)
    p.add_argument("--points", type=int, default=401)
    p.add_argument("--log-grid", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=None,
                   help="accepted for pipeline uniformity; this command "
                        "is serial")
    p.set_defaults(run=_run_density)

    p = sub.add_parser("simulate", help="simulate a price path to CSV")
    p.add_argument("--model", choices=["ratio", "gbm"], default="ratio")
    p.add_argument("--mu1", type=float, default=1.0)
    p.add_argument("--mu2", type=float, default=1.0)
    p.add_argument("--sigma1", type=float, default=0.35)
    p.add_argument("--sigma2", type=float, default=0.35)
    p.add_argument("--rho", type=float, default=-1.0)
    p.add_argument("--family", default="sym",
                   choices=[f.value for f in Family])
    p.add_argument("--q", type=float, default=None)
    p.add_argument("--tau0", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--steps", type=int, default=10000)
    p.add_argument("--p0", type=float, default=1.0)
    p.add_argument("--policy", choices=[x.value for x in RejectionPolicy],
                   default="resample")
    p.add_argument("--mu", type=float, default=0.05, help="gbm drift")
    p.add_argument("--sigma", type=float, default=0.2, help="gbm volatility")
    p.add_argument("--out", required=True)
    _add_seed_threads(p)
    p.set_defaults(run=_run_simulate)

    p = sub.add_parser("tails", help="classify the tail of a sample")
    p.add_argument("--samples", help="single-column value CSV")
    p.add_argument("--prices", help="t,price CSV to convert to returns")
    p.add_argument("--as-returns", type=float, default=None,
                   help="return sampling scale for --prices")
    p.add_argument("--candidates", default="power,exp")
    p.add_argument("--threshold-quantile", type=float, default=0.99)
    p.add_argument("--side", choices=["abs", "right", "left"], default="abs")
    p.add_argument("--out", default=None)
    p.add_argument("--csv", default=None,
                   help="write the threshold sweep as CSV rows")
    p.add_argument("--threads", type=int, default=None,
                   help="accepted for pipeline uniformity; this command "
                        "is serial")
    p.set_defaults(run=_run_tails)

    p = sub.add_parser("fit", help="recover the response family from prices")
    p.add_argument("--prices", required=True)
    p.add_argument("--delta-t", type=float, required=True)
    p.add_argument("--big-delta-t", type=float, required=True)
    p.add_argument("--stride", type=float, required=True)
    p.add_argument("--candidates", default="power,log")
    p.add_argument("--threshold-quantile", type=float, default=0.998)
    p.add_argument("--interpolate", action="store_true")
    p.add_argument("--boot", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--overlay", default=None)
    p.add_argument("--csv", default=None, help="write the result as a CSV row")
    p.add_argument("--threads", type=int, default=None,
                   help="accepted for pipeline uniformity; this command "
                        "is serial")
    p.set_defaults(run=_run_fit)

    p = sub.add_parser("replay", help="re-run a saved manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=None, help="override the output path")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(run=_run_replay)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.run(args)
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NonIdentifiableError as exc:
        print(f"non-identifiable: {exc}", file=sys.stderr)
        for name, score in sorted(exc.scores.items()):
            print(f"  score {name} = {score:.6f}", file=sys.stderr)
        return 3
    except _RUNTIME_ERRORS as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return 1
    except RatioTailsError as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
