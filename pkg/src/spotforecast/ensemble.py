"""Equal-weight hybrid forecasts and the train/test backtest harness."""

from __future__ import annotations

import json
import logging
import time
import traceback
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .models import Forecaster, make_model, to_daily, to_hourly
from .series import ErrorReport, ForecastResult, HourlySeries, compute_metrics, format_timestamps

__all__ = [
    "hybrid_average",
    "BacktestSpec",
    "ModelOutcome",
    "BacktestReport",
    "default_spec",
    "run_backtest",
    "DEFAULT_MODELS",
    "DEFAULT_HYBRID",
]

log = logging.getLogger(__name__)

DEFAULT_MODELS = ("naive", "fourier", "linear", "arma", "garch", "mrjd", "ann")
DEFAULT_HYBRID = ("fourier", "garch", "mrjd")


def hybrid_average(forecasts: Sequence[ForecastResult]) -> ForecastResult:
    """Pointwise arithmetic mean of forecasts on identical horizons."""
    if not forecasts:
        raise ValueError("need at least one forecast")
    ref = forecasts[0]
    for f in forecasts[1:]:
        if len(f) != len(ref):
            raise ValueError(
                f"horizon mismatch: {f.model_id} has {len(f)} points, {ref.model_id} has {len(ref)}"
            )
        bad = np.nonzero(f.horizon != ref.horizon)[0]
        if bad.size:
            raise ValueError(f"horizon mismatch at timestamp {ref.horizon[bad[0]]} ({f.model_id})")
    values = np.mean(np.vstack([f.values for f in forecasts]), axis=0)
    ids = ",".join(f.model_id for f in forecasts)
    return ForecastResult(f"hybrid({ids})", ref.horizon, values,
                          metadata={"members": [f.model_id for f in forecasts]})


@dataclass(frozen=True)
class BacktestSpec:
    """Train on ``[train_start, cutoff)``, score on ``[cutoff, test_end)``.

    Models are given either as registry names with configs, or as ready
    :class:`Forecaster` instances (keyed by their ``model_id``).
    """

    models: Mapping[str, Any]
    cutoff: np.datetime64
    test_end: np.datetime64
    train_start: np.datetime64 | None = None
    granularity: str = "daily"
    seed: int = 0
    hybrid_members: tuple[str, ...] = DEFAULT_HYBRID

    def __post_init__(self) -> None:
        if self.granularity not in ("daily", "hourly"):
            raise ValueError("granularity must be 'daily' or 'hourly'")
        if not np.datetime64(self.test_end, "m") > np.datetime64(self.cutoff, "m"):
            raise ValueError("test window must follow the train window")
        if self.train_start is not None and not np.datetime64(self.train_start, "m") < np.datetime64(self.cutoff, "m"):
            raise ValueError("train window is empty")
        for name, cfg in self.models.items():
            if not isinstance(cfg, Forecaster):
                make_model(name, cfg or {})  # validates the name

    @property
    def n_test_days(self) -> int:
        span = np.datetime64(self.test_end, "m") - np.datetime64(self.cutoff, "m")
        return int(span // np.timedelta64(1440, "m"))


def default_spec(data: HourlySeries, test_days: int = 90, seed: int = 0,
                 models: Sequence[str] = DEFAULT_MODELS,
                 configs: Mapping[str, dict] | None = None) -> BacktestSpec:
    """Hold out the last ``test_days`` complete local days."""
    lt = data.local_times
    first_full = lt[0].astype("datetime64[D]") + (0 if lt[0] == lt[0].astype("datetime64[D]") else 1)
    last_full_end = (lt[-1] + np.timedelta64(60, "m")).astype("datetime64[D]")
    cutoff_local = last_full_end - test_days
    off = np.timedelta64(data.utc_offset_minutes, "m")
    configs = configs or {}
    return BacktestSpec(
        models={m: dict(configs.get(m, {})) for m in models},
        cutoff=cutoff_local.astype("datetime64[m]") - off,
        test_end=last_full_end.astype("datetime64[m]") - off,
        train_start=np.datetime64(first_full, "m") - off,
        seed=seed,
    )


@dataclass
class ModelOutcome:
    model_id: str
    forecast: ForecastResult | None
    errors: ErrorReport | None
    runtime_s: float
    error: str | None = None
    params: dict = field(default_factory=dict)


@dataclass
class BacktestReport:
    outcomes: dict[str, ModelOutcome]
    hybrid: ModelOutcome | None
    ranking: list[str]
    actual: ForecastResult
    spec: BacktestSpec
    offset_minutes: int = 0

    @property
    def partial(self) -> bool:
        return any(o.error for o in self.outcomes.values())

    def to_dict(self, include_runtime: bool = False) -> dict:
        stamps = format_timestamps(self.actual.horizon, self.offset_minutes)

        def entry(o: ModelOutcome) -> dict:
            d: dict[str, Any] = {"status": "failed" if o.error else "ok"}
            if o.errors is not None:
                d["errors"] = o.errors.to_dict(stamps)
            if o.error:
                d["error"] = o.error
            if include_runtime:
                d["runtime_s"] = o.runtime_s
            return d

        out = {
            "spec": {
                "models": sorted(self.outcomes),
                "cutoff": format_timestamps(np.array([self.spec.cutoff]), self.offset_minutes)[0],
                "test_end": format_timestamps(np.array([self.spec.test_end]), self.offset_minutes)[0],
                "granularity": self.spec.granularity,
                "seed": self.spec.seed,
                "hybrid_members": list(self.spec.hybrid_members),
            },
            "models": {k: entry(self.outcomes[k]) for k in sorted(self.outcomes)},
            "hybrid": entry(self.hybrid) if self.hybrid else None,
            "hybrid_members_used": (self.hybrid.forecast.metadata.get("members", [])
                                    if self.hybrid and self.hybrid.forecast else []),
            "ranking": self.ranking,
            "partial": self.partial,
        }
        return out

    def to_json(self, include_runtime: bool = False) -> str:
        return json.dumps(self.to_dict(include_runtime), indent=2, sort_keys=False) + "\n"


def _slice_window(data: HourlySeries, start, stop) -> HourlySeries:
    lo = 0 if start is None else int(np.searchsorted(data.times, np.datetime64(start, "m")))
    hi = int(np.searchsorted(data.times, np.datetime64(stop, "m")))
    return data.slice(lo, hi)


def _align(forecast: ForecastResult, granularity: str, offset: int) -> ForecastResult:
    return to_daily(forecast, offset) if granularity == "daily" else to_hourly(forecast)


def _score(model_id: str, forecast: ForecastResult, actual: ForecastResult) -> ErrorReport:
    if len(forecast) != len(actual) or np.any(forecast.horizon != actual.horizon):
        raise ValueError(f"{model_id}: forecast horizon does not match the test window")
    return compute_metrics(actual.values, forecast.values, actual.horizon.astype(str))


def run_backtest(spec: BacktestSpec, data: HourlySeries) -> BacktestReport:
    """Fit every model on the train slice only, forecast the test window and
    score it. A failing model is recorded and the others still run."""
    train = _slice_window(data, spec.train_start, spec.cutoff)
    test = _slice_window(data, spec.cutoff, spec.test_end)
    n_days = spec.n_test_days
    if len(train) == 0 or len(test) != 24 * n_days:
        raise ValueError("data does not cover the train and test windows")
    off = data.utc_offset_minutes
    actual_hourly = ForecastResult("actual", test.times, test.prices, metadata={"granularity": "hourly"})
    actual = _align(actual_hourly, spec.granularity, off)

    outcomes: dict[str, ModelOutcome] = {}
    for name in sorted(spec.models):
        cfg = spec.models[name]
        t0 = time.perf_counter()
        try:
            model = cfg if isinstance(cfg, Forecaster) else make_model(name, cfg or {}, spec.seed)
            model.fit(train)
            fc = model.forecast(n_days)
            fc = _align(fc, spec.granularity, off)
            fc = ForecastResult(name, fc.horizon, fc.values, fc.lower, fc.upper, fc.metadata)
            errors = _score(name, fc, actual)
            outcomes[name] = ModelOutcome(name, fc, errors, time.perf_counter() - t0, params=model.params())
        except Exception as exc:  # isolate per-model failures
            log.warning("model %s failed: %s", name, exc)
            log.debug("%s", traceback.format_exc())
            outcomes[name] = ModelOutcome(name, None, None, time.perf_counter() - t0,
                                          error=f"{type(exc).__name__}: {exc}")
        log.info("%s finished in %.2fs", name, outcomes[name].runtime_s)

    hybrid = None
    members = [outcomes[m].forecast for m in spec.hybrid_members
               if m in outcomes and outcomes[m].forecast is not None]
    if members:
        t0 = time.perf_counter()
        hf = hybrid_average(members)
        hybrid = ModelOutcome("hybrid", hf, _score("hybrid", hf, actual), time.perf_counter() - t0)

    scored = [(o.errors.rmse, k) for k, o in outcomes.items() if o.errors is not None]
    if hybrid is not None:
        scored.append((hybrid.errors.rmse, "hybrid"))
    ranking = [k for _, k in sorted(scored)]
    ranking += sorted(k for k, o in outcomes.items() if o.errors is None)
    return BacktestReport(outcomes, hybrid, ranking, actual, spec, off)
