"""
bubblescope command line.

Subcommands read a price series from file, run one analysis and write JSON
(plus CSV/TSV where relevant). Output files are written atomically and every
JSON output echoes the fully resolved configuration under ``"config"``.

Exit status: 0 on success, 1 on a domain error (error JSON on stderr),
2 on a usage error.
"""
import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from . import __version__
from .crashes import detect_crashes, extract_drawdowns, fit_bulk, flag_kings
from .crashes.export import to_csv as drawdowns_to_csv
from .crashes.export import to_records
from .diagnose import ScanConfig, scan, write_plot_data
from .fitting import FitConfig, compare_to_null, fit_exponential, fit_fts, fit_lppl
from .fitting.functions import annualized_growth
from .fitting.params import FeedbackODEParams, LPPLParams, PowerLawFTSParams
from .series import log_prices, read_series, window, write_series
from .series.csv_io import to_json as series_to_json
from .synth import GBMParams, IsingMarketParams, append_crash, gen_feedback, gen_fts, gen_gbm, gen_ising_market
from .utils.config import AppConfig
from .utils.errors import BubbleScopeError, InvalidParameter
from .utils.files import dumps, write_json_atomic, write_text_atomic

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
SIM_KINDS = ["gbm", "fts", "lppl", "feedback", "ising"]


# --- output --------------------------------------------------------------------------

def _resolved_config(args: argparse.Namespace, config: AppConfig) -> Dict[str, Any]:
    resolved = config.to_dict()
    for key, value in vars(args).items():
        if key == "handler":
            continue
        resolved[key] = str(value) if isinstance(value, Path) else value
    return resolved


def _emit(payload: Dict[str, Any], out: Optional[Path]) -> None:
    """Write JSON to ``out`` or print it"""
    if out is None:
        sys.stdout.write(dumps(payload))
    else:
        write_json_atomic(out, payload)
        logger.info("Wrote %s", out)


def _series_window(args: argparse.Namespace):
    series = read_series(args.input)
    if args.t_start is None and args.t_end is None:
        return series
    t_start = series.t_start if args.t_start is None else args.t_start
    t_end = series.t_end if args.t_end is None else args.t_end
    return window(series, t_start, t_end)


# --- subcommands ---------------------------------------------------------------------

def cmd_ingest(args: argparse.Namespace, config: AppConfig) -> None:
    series = read_series(args.input)
    if args.out is not None and args.out.suffix.lower() == ".csv":
        write_series(series, args.out)
        return
    payload = {
        "config": _resolved_config(args, config),
        "n_obs": len(series),
        "t_start": series.t_start,
        "t_end": series.t_end,
        "series": json.loads(series_to_json(series)),
    }
    _emit(payload, args.out)


def _simulate(args: argparse.Namespace):
    """Build the requested generator; returns (series, params record, extras)"""
    n = args.n
    if n < 2:
        raise InvalidParameter(f"--n must be at least 2, got {n}")
    t_grid = np.arange(n, dtype=float)
    t_c = args.tc if args.tc is not None else (n - 1) + 20.0
    extras: Dict[str, Any] = {}

    if args.kind == "gbm":
        params = GBMParams(p0=args.p0, mu=args.mu, sigma=args.sigma, n=n)
        series = gen_gbm(params, args.seed)
    elif args.kind == "fts":
        params = PowerLawFTSParams(A=args.A, B=args.B, t_c=t_c, m=args.m)
        series = gen_fts(params, args.noise, args.seed, t_grid)
    elif args.kind == "lppl":
        params = LPPLParams(
            A=args.A, B=args.B, t_c=t_c, m=args.m, C1=args.C1, C2=args.C2, omega=args.omega,
        )
        series = gen_fts(params, args.noise, args.seed, t_grid, label="lppl")
    elif args.kind == "feedback":
        params = FeedbackODEParams(p0=args.p0, c=1.0 / (args.p0 * t_c))
        series = gen_feedback(params, args.noise, args.seed, t_grid)
    else:
        schedule = None
        if args.k_start is not None or args.k_end is not None:
            schedule = (
                args.K if args.k_start is None else args.k_start,
                args.K if args.k_end is None else args.k_end,
            )
        params = IsingMarketParams(
            n_agents=args.agents, K=args.K, sigma_noise=args.sigma_noise,
            lambda_liquidity=args.liquidity, n_steps=n - 1, K_schedule=schedule, p0=args.p0,
        )
        series, trace = gen_ising_market(params, args.seed)
        extras["magnetization"] = trace.tolist()

    if args.crash_drop is not None:
        series = append_crash(series, args.crash_drop, args.crash_days)
    return series, params.model_dump(), extras


def cmd_simulate(args: argparse.Namespace, config: AppConfig) -> None:
    series, params, extras = _simulate(args)
    write_series(series, args.out)
    meta = {
        "config": _resolved_config(args, config),
        "kind": args.kind,
        "params": params,
        "n_obs": len(series),
        **extras,
    }
    write_json_atomic(Path(f"{args.out}.meta.json"), meta)
    logger.info("Simulated %s series with %d points into %s", args.kind, len(series), args.out)


def cmd_fit(args: argparse.Namespace, config: AppConfig) -> None:
    series = _series_window(args)
    log_series = log_prices(series)
    fit_config = FitConfig(seed=config.seed)

    null_params, null_sse = fit_exponential(log_series)
    fits = []
    fts = fit_fts(log_series, fit_config)
    if config.model in ("fts", "both"):
        fits.append(fts)
    if config.model in ("lppl", "both"):
        fits.append(fit_lppl(log_series, fit_config, fts_seed=fts))

    records = []
    for fit in fits:
        comparison = compare_to_null(fit)
        record = fit.to_record()
        record.update({
            "relative_improvement": comparison.relative_improvement,
            "bubble_shape_ok": comparison.bubble_shape_ok,
            "tc_spread": fit.tc_spread(),
        })
        records.append(record)

    payload = {
        "config": _resolved_config(args, config),
        "label": series.label,
        "window": {"t_start": series.t_start, "t_end": series.t_end, "n_obs": len(series)},
        "null": {
            "a": null_params.a,
            "b": null_params.b,
            "sse": null_sse,
            "annualized_growth": annualized_growth(null_params),
        },
        "fits": records,
    }
    _emit(payload, args.out)


def cmd_drawdowns(args: argparse.Namespace, config: AppConfig) -> None:
    series = read_series(args.input)
    drawdowns = extract_drawdowns(series, config.epsilon)
    crashes = detect_crashes(series, config.crash_threshold, config.crash_window)

    bulk, kings, bulk_error = None, [], None
    try:
        fit = fit_bulk(drawdowns, config.bulk_quantile)
    except BubbleScopeError as e:
        # A short series still gets its drawdowns and crashes
        logger.warning("No bulk fit for %s: %s", series.label, e.message)
        bulk_error = e.code
    else:
        bulk = fit.model_dump()
        kings = flag_kings(drawdowns, fit, config.king_expected_max)

    payload = {
        "config": _resolved_config(args, config),
        "label": series.label,
        "drawdowns": to_records(drawdowns),
        "crashes": to_records(crashes),
        "bulk_fit": bulk,
        "bulk_fit_error": bulk_error,
        "kings": to_records(kings),
    }
    if args.csv_out is not None:
        write_text_atomic(args.csv_out, drawdowns_to_csv(drawdowns))
    _emit(payload, args.out)


def cmd_scan(args: argparse.Namespace, config: AppConfig) -> None:
    series = read_series(args.input)
    scan_config = ScanConfig(
        window_length=config.window_length,
        step=config.step,
        model=config.model,
        improvement_min=config.improvement_min,
        horizon_fraction=config.horizon_fraction,
        crash_threshold=config.crash_threshold,
        crash_window=config.crash_window,
        lookback=config.lookback,
        fit=FitConfig(seed=config.seed),
        n_jobs=config.n_jobs,
    )
    report = scan(series, scan_config)

    payload = {"config": _resolved_config(args, config), **report.to_dict()}
    if args.emit_plot_data is not None:
        paths = write_plot_data(report, series, args.emit_plot_data)
        payload["plot_data"] = [p.name for p in paths]
    _emit(payload, args.out)


# --- parser --------------------------------------------------------------------------

def _finite_float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"{text!r} is not a finite number")
    return value


def build_parser(config: AppConfig) -> argparse.ArgumentParser:
    """Command-line parser with defaults taken from ``config``"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, help="Output file (JSON unless stated otherwise)")
    common.add_argument("--seed", type=int, default=config.seed, help="Random seed")
    common.add_argument("--log-level", default=config.log_level.upper(), choices=LOG_LEVELS,
                        help="Logging level for diagnostics on stderr")

    source = argparse.ArgumentParser(add_help=False)
    source.add_argument("--input", type=Path, required=True, help="Price series (.csv or .json)")

    crash = argparse.ArgumentParser(add_help=False)
    crash.add_argument("--crash-threshold", type=_finite_float, default=config.crash_threshold,
                       help="Minimum drop of a crash (fraction of the peak)")
    crash.add_argument("--crash-window", type=_finite_float, default=config.crash_window,
                       help="Days after a local maximum searched for the drop")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--model", choices=["fts", "lppl", "both"], default=config.model,
                       help="Model(s) calibrated against the exponential null")

    parser = argparse.ArgumentParser(prog="bubblescope", description="Bubble and crash diagnostics")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="subcommand", required=True)

    ingest = subparsers.add_parser("ingest", parents=[common, source],
                                   help="Validate a date,close CSV and write it as JSON or canonical CSV")
    ingest.set_defaults(handler=cmd_ingest)

    simulate = subparsers.add_parser("simulate", parents=[common],
                                     help="Generate a synthetic series with known ground truth")
    simulate.set_defaults(handler=cmd_simulate)
    simulate.add_argument("--kind", choices=SIM_KINDS, required=True)
    simulate.add_argument("--n", type=int, default=250, help="Number of observations")
    simulate.add_argument("--p0", type=_finite_float, default=100.0, help="Initial price")
    simulate.add_argument("--mu", type=_finite_float, default=0.0005, help="GBM drift per step")
    simulate.add_argument("--sigma", type=_finite_float, default=0.01, help="GBM volatility per step")
    simulate.add_argument("--A", type=_finite_float, default=5.0)
    simulate.add_argument("--B", type=_finite_float, default=-0.5)
    simulate.add_argument("--m", type=_finite_float, default=0.5)
    simulate.add_argument("--tc", type=_finite_float, help="Critical time (default: 20 days past the end)")
    simulate.add_argument("--C1", type=_finite_float, default=0.0)
    simulate.add_argument("--C2", type=_finite_float, default=0.0)
    simulate.add_argument("--omega", type=_finite_float, default=6.0)
    simulate.add_argument("--noise", type=_finite_float, default=0.0, help="Log-price noise sigma")
    simulate.add_argument("--agents", type=int, default=1000, help="Ising market size")
    simulate.add_argument("--K", type=_finite_float, default=0.5, help="Ising coupling")
    simulate.add_argument("--k-start", type=_finite_float, help="Ising coupling ramp start")
    simulate.add_argument("--k-end", type=_finite_float, help="Ising coupling ramp end")
    simulate.add_argument("--sigma-noise", type=_finite_float, default=1.0)
    simulate.add_argument("--liquidity", type=_finite_float, default=100.0)
    simulate.add_argument("--crash-drop", type=_finite_float, help="Append a crash losing this fraction")
    simulate.add_argument("--crash-days", type=int, default=10)

    fit = subparsers.add_parser("fit", parents=[common, source, model],
                                help="Calibrate FTS/LPPL on one window")
    fit.set_defaults(handler=cmd_fit)
    fit.add_argument("--t-start", type=_finite_float, help="Window start time")
    fit.add_argument("--t-end", type=_finite_float, help="Window end time")

    drawdowns = subparsers.add_parser("drawdowns", parents=[common, source, crash],
                                      help="Drawdowns, crashes and outlier drawdowns")
    drawdowns.set_defaults(handler=cmd_drawdowns)
    drawdowns.add_argument("--epsilon", type=_finite_float, default=config.epsilon,
                           help="Tolerated interior rise, as a fraction of the peak")
    drawdowns.add_argument("--bulk-quantile", type=_finite_float, default=config.bulk_quantile)
    drawdowns.add_argument("--king-max", dest="king_expected_max", type=_finite_float,
                           default=config.king_expected_max,
                           help="Expected-count threshold below which a drawdown is an outlier")
    drawdowns.add_argument("--csv-out", type=Path, help="Drawdown table as CSV")

    scanner = subparsers.add_parser("scan", parents=[common, source, crash, model],
                                    help="Sliding-window bubble diagnosis with crash precedence")
    scanner.set_defaults(handler=cmd_scan)
    scanner.add_argument("--window", dest="window_length", type=_finite_float,
                         default=config.window_length, help="Window length in days")
    scanner.add_argument("--step", type=_finite_float, default=config.step, help="Days between windows")
    scanner.add_argument("--improvement-min", type=_finite_float, default=config.improvement_min)
    scanner.add_argument("--horizon-fraction", type=_finite_float, default=config.horizon_fraction)
    scanner.add_argument("--lookback", type=_finite_float, default=config.lookback)
    scanner.add_argument("--n-jobs", type=int, default=config.n_jobs)
    scanner.add_argument("--emit-plot-data", type=Path, metavar="DIR",
                         help="Write one TSV per flagged window into DIR")

    return parser


# --- entry points --------------------------------------------------------------------

def _report_error(subcommand: str, code: str, message: str) -> None:
    sys.stderr.write(json.dumps({"code": code, "message": message, "subcommand": subcommand}) + "\n")


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv``, run one subcommand and return the exit status"""
    config = AppConfig.load()
    parser = build_parser(config)
    try:
        args = parser.parse_args(argv)
        if args.subcommand == "simulate" and args.out is None:
            parser.error("simulate requires --out")
    except SystemExit as e:
        return int(e.code or 0)

    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT,
                        stream=sys.stderr, force=True)
    config.update({k: v for k, v in vars(args).items() if k != "handler"})

    handler: Callable[[argparse.Namespace, AppConfig], None] = args.handler
    try:
        handler(args, config)
    except BubbleScopeError as e:
        logger.debug("%s failed", args.subcommand, exc_info=True)
        _report_error(args.subcommand, e.code, e.message)
        return 1
    except ValidationError as e:
        _report_error(args.subcommand, InvalidParameter.__name__, _validation_message(e))
        return 1
    return 0


def _validation_message(error: ValidationError) -> str:
    parts: List[str] = []
    for item in error.errors():
        location = ".".join(str(x) for x in item.get("loc", ()))
        parts.append(f"{location}: {item.get('msg')}" if location else str(item.get("msg")))
    return "; ".join(parts)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
