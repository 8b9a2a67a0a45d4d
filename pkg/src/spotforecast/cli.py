"""Batch command-line front end.

Exit codes: 0 success, 1 usage or input error, 2 partial backtest results,
3 internal failure.

All randomness derives from ``--seed`` (default 2019): each seeded
component receives ``derive_seed(seed, component_name)``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Sequence


from . import __version__
from .ensemble import DEFAULT_HYBRID, DEFAULT_MODELS, BacktestSpec, default_spec, hybrid_average, run_backtest
from .models import REGISTRY, MrjdModel, derive_seed, make_model
from .plotting import plot_decomposition, plot_fan, plot_forecasts, plot_rmse_bars
from .sample import SAMPLE_PATH
from .seasonal import decompose, dickey_fuller, dominant_period
from .series import (
    IngestError,
    IngestOptions,
    daily_average,
    format_timestamps,
    ingest_csv,
    parse_timestamp,
    read_forecast_csv,
    write_forecast_csv,
    write_series_csv,
)

log = logging.getLogger("spotforecast")

DEFAULT_SEED = 2019
EXIT_OK, EXIT_USAGE, EXIT_PARTIAL, EXIT_INTERNAL = 0, 1, 2, 3
MAX_WIDE_PATHS = 1000


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n")


def _load_config(arg: str | None) -> dict:
    if not arg:
        return {}
    if arg.lstrip().startswith("{"):
        try:
            return json.loads(arg)
        except json.JSONDecodeError as exc:
            raise UsageError(f"inline --config is not valid JSON: {exc}") from None
    path = Path(arg)
    if not path.exists():
        raise UsageError(f"config file not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}") from None


def _model_configs(args) -> dict[str, dict]:
    cfg = _load_config(args.config).get("models", {})
    fourier = dict(cfg.get("fourier", {}))
    if getattr(args, "year_weight", None):
        weights = {}
        for item in args.year_weight:
            try:
                year, w = item.split("=")
                weights[int(year)] = float(w)
            except ValueError:
                raise UsageError(f"--year-weight expects YEAR=WEIGHT, got {item!r}") from None
        fourier["year_weights"] = weights
    if getattr(args, "combination_weights", None):
        fourier["combination_weights"] = list(args.combination_weights)
    if getattr(args, "trend_halving", None) is not None:
        fourier["trend_halving"] = args.trend_halving
    if getattr(args, "weekday_window", None) is not None:
        fourier["weekday_window_days"] = args.weekday_window
    if getattr(args, "trend_years", None):
        fourier["trend_years"] = list(args.trend_years)
    if getattr(args, "no_trend", False):
        fourier["trend_years"] = None
    if fourier:
        cfg["fourier"] = fourier
    return cfg


def _series(args):
    path = Path(args.input) if args.input else SAMPLE_PATH
    return ingest_csv(path, IngestOptions(strict=args.strict))


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _check_model(name: str) -> None:
    if name not in REGISTRY:
        raise UsageError(f"unknown model {name!r}; registered models: {', '.join(sorted(REGISTRY))}")


# ------------------------------------------------------------------ commands


def cmd_ingest(args) -> int:
    series = _series(args)
    out = _out(args)
    write_series_csv(series, out / "series.csv")
    _write_json(out / "ingest_report.json", series.report.to_dict())
    log.info("ingested %d hours (%d duplicates averaged, %d gaps filled)", len(series),
             series.report.duplicates_averaged, series.report.gaps_filled)
    return EXIT_OK


def cmd_decompose(args) -> int:
    series = _series(args)
    out = _out(args)
    daily = daily_average(series)
    dec = decompose(daily, args.window)
    dec.to_csv(out / "decomposition.csv")
    verdict = dickey_fuller(dec.residual, 0.05)
    raw = dickey_fuller(daily.prices, 0.05)
    period = dominant_period(daily.prices, range(2, max(3, min(60, len(daily) // 4) + 1)))
    _write_json(out / "decomposition_summary.json", {
        "seasonal_profile": dec.seasonal_profile.tolist(),
        "dominant_period_days": period,
        "dickey_fuller_residual": {"statistic": verdict.statistic, "critical_value": verdict.critical_value,
                                   "reject_unit_root": verdict.reject_unit_root},
        "dickey_fuller_daily_prices": {"statistic": raw.statistic, "critical_value": raw.critical_value,
                                       "reject_unit_root": raw.reject_unit_root},
    })
    plot_decomposition(daily.prices, dec.trend, dec.seasonal, dec.residual, out / "decomposition.svg")
    return EXIT_OK


def cmd_fit(args) -> int:
    _check_model(args.model)
    cfgs = _model_configs(args)
    series = _series(args)
    out = _out(args)
    model = make_model(args.model, cfgs.get(args.model), args.seed)
    model.fit(series)
    _write_json(out / f"{args.model}_params.json", {"model": args.model, "params": model.params()})
    return EXIT_OK


def cmd_forecast(args) -> int:
    _check_model(args.model)
    if args.days < 1:
        raise UsageError("--days must be positive")
    cfgs = _model_configs(args)
    series = _series(args)
    out = _out(args)
    model = make_model(args.model, cfgs.get(args.model), args.seed)
    fc = model.fit(series).forecast(args.days)
    write_forecast_csv(fc, out / f"{args.model}_forecast.csv", series.utc_offset_minutes)
    tail = series.slice(max(0, len(series) - 24 * 28))
    plot_forecasts(tail.times, tail.prices, {args.model: (fc.horizon, fc.values)},
                   out / f"{args.model}_forecast.svg", series.utc_offset_minutes,
                   title=f"{args.model} forecast")
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.paths < 1 or args.days < 1:
        raise UsageError("--paths and --days must be positive")
    if args.paths > MAX_WIDE_PATHS and not args.allow_large:
        raise UsageError(f"more than {MAX_WIDE_PATHS} paths requires --allow-large")
    series = _series(args)
    out = _out(args)
    cfg = _model_configs(args).get("mrjd", {})
    cfg = {k: v for k, v in cfg.items() if k in ("dt", "quantiles")}
    model = MrjdModel(n_paths=args.paths, seed=derive_seed(args.seed, "mrjd"), **cfg)
    model.fit(series)
    paths = model.simulate(args.days)
    stamps = format_timestamps(paths.horizon, series.utc_offset_minutes)
    with (out / "paths.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp"] + [f"path_{i + 1}" for i in range(paths.n_paths)])
        for j, ts in enumerate(stamps):
            w.writerow([ts] + [repr(float(v)) for v in paths.values[:, j]])
    _write_json(out / "mrjd_params.json", {"model": "mrjd", "params": model.params()})
    fc = model.forecast(args.days)
    write_forecast_csv(fc, out / "mrjd_forecast.csv", series.utc_offset_minutes)
    plot_fan(paths.horizon, paths.values, out / "paths.svg", series.utc_offset_minutes)
    return EXIT_OK


def cmd_backtest(args) -> int:
    series = _series(args)
    out = _out(args)
    conf = _load_config(args.config)
    bt = conf.get("backtest", {})
    models = args.models or bt.get("models") or list(DEFAULT_MODELS)
    for m in models:
        _check_model(m)
    spec = default_spec(series, args.test_days or bt.get("test_days", 90), args.seed, models,
                        _model_configs(args))
    spec = BacktestSpec(
        models=spec.models, cutoff=spec.cutoff, test_end=spec.test_end, train_start=spec.train_start,
        granularity=args.granularity or bt.get("granularity", "daily"), seed=args.seed,
        hybrid_members=tuple(args.hybrid or bt.get("hybrid_members", DEFAULT_HYBRID)),
    )
    report = run_backtest(spec, series)
    for name in sorted(report.outcomes):
        o = report.outcomes[name]
        log.info("%-8s runtime %.2fs %s", name, o.runtime_s, o.error or "")
    (out / "backtest.json").write_text(report.to_json())
    fcs = [o.forecast for o in report.outcomes.values() if o.forecast is not None]
    if report.hybrid is not None:
        fcs.append(report.hybrid.forecast)
    write_forecast_csv(fcs, out / "backtest_forecasts.csv", series.utc_offset_minutes)
    curves = {o.model_id: (o.forecast.horizon, o.forecast.values)
              for o in report.outcomes.values() if o.forecast is not None}
    if report.hybrid is not None:
        curves["hybrid"] = (report.hybrid.forecast.horizon, report.hybrid.forecast.values)
    plot_forecasts(report.actual.horizon, report.actual.values, curves, out / "backtest_forecasts.svg",
                   series.utc_offset_minutes, title=f"Backtest ({spec.granularity})")
    rmse = {k: o.errors.rmse for k, o in report.outcomes.items() if o.errors is not None}
    if report.hybrid is not None:
        rmse["hybrid"] = report.hybrid.errors.rmse
    plot_rmse_bars(rmse, out / "backtest_rmse.svg")
    if report.partial:
        log.warning("backtest finished with failed models")
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_hybrid(args) -> int:
    out = _out(args)
    forecasts = []
    for path in args.forecasts:
        if not Path(path).exists():
            raise UsageError(f"forecast file not found: {path}")
        forecasts.extend(read_forecast_csv(path))
    if args.members:
        forecasts = [f for f in forecasts if f.model_id in set(args.members)]
    if not forecasts:
        raise UsageError("no forecasts to combine")
    hybrid = hybrid_average(forecasts)
    offset = 0
    with Path(args.forecasts[0]).open() as fh:
        fh.readline()
        first = fh.readline().split(",")[0]
        if first:
            offset = parse_timestamp(first)[1]
    write_forecast_csv(hybrid, out / "hybrid_forecast.csv", offset)
    return EXIT_OK


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="price CSV (timestamp,price); defaults to the bundled sample")
    common.add_argument("--out", default="out", help="output directory (default: ./out)")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"master seed (default {DEFAULT_SEED})")
    common.add_argument("--config", help="JSON config file or inline JSON object")
    common.add_argument("--strict", action="store_true", help="fail if ingestion had to normalize anything")
    common.add_argument("--quiet", action="store_true", help="only log warnings and errors")

    fourier = argparse.ArgumentParser(add_help=False)
    fourier.add_argument("--year-weight", action="append", metavar="YEAR=W",
                         help="Fourier yearly weight (repeatable; replaces the default map)")
    fourier.add_argument("--combination-weights", type=float, nargs=3, metavar=("W1", "W2", "W3"))
    fourier.add_argument("--trend-halving", type=float)
    fourier.add_argument("--weekday-window", type=int)
    fourier.add_argument("--trend-years", type=int, nargs=2, metavar=("REF", "LATEST"))
    fourier.add_argument("--no-trend", action="store_true")

    p = _Parser(prog="spotforecast", description="Electricity spot-price forecasting toolkit.",
                parents=[common])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("ingest", parents=[common], help="normalize a price CSV")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("decompose", parents=[common], help="trend / weekday / residual decomposition")
    s.add_argument("--window", type=int, default=7)
    s.set_defaults(func=cmd_decompose)

    s = sub.add_parser("fit", parents=[common, fourier], help="fit a model and write its parameters")
    s.add_argument("model")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("forecast", parents=[common, fourier], help="fit a model and forecast whole days")
    s.add_argument("model")
    s.add_argument("--days", type=int, default=7)
    s.set_defaults(func=cmd_forecast)

    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo MRJD price paths")
    s.add_argument("--paths", type=int, default=100)
    s.add_argument("--days", type=int, default=90)
    s.add_argument("--allow-large", action="store_true", help=f"permit more than {MAX_WIDE_PATHS} paths")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("backtest", parents=[common, fourier], help="train/test comparison of models")
    s.add_argument("--models", nargs="+")
    s.add_argument("--hybrid", nargs="+", metavar="MODEL", help="hybrid members")
    s.add_argument("--test-days", type=int)
    s.add_argument("--granularity", choices=("daily", "hourly"))
    s.set_defaults(func=cmd_backtest)

    s = sub.add_parser("hybrid", parents=[common], help="average forecast CSVs")
    s.add_argument("--forecasts", nargs="+", required=True)
    s.add_argument("--members", nargs="+")
    s.set_defaults(func=cmd_hybrid)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)
    try:
        return args.func(args)
    except (UsageError, IngestError, KeyError) as exc:
        print(f"spotforecast: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"spotforecast: input error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # pragma: no cover - last resort
        log.exception("internal failure")
        print(f"spotforecast: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
