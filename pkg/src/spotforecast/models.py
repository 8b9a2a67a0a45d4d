"""Uniform fit/forecast adapters over the individual forecasting methods.

Every adapter is fitted on an :class:`HourlySeries` that ends on a local
day boundary and forecasts whole days after it. Hourly models (naive,
fourier, ann) return 24 values per day; the decomposition-based and MRJD
models work on daily averages and return one value per day, stamped at
local midnight.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import ann as ann_mod
from .baseline import FourierForecastConfig, fourier_forecast, naive_forecast
from .linear import (
    arma_forecast,
    fit_arma,
    fit_garch,
    fit_linear_predictor,
    garch_forecast,
    order_select_aic,
)
from .mrjd import (
    calibrate_mrjd,
    deseasonalize_log,
    fit_seasonality,
    mrjd_forecast,
    price_shift,
    simulate_mrjd,
)
from .seasonal import decompose, reseasonalize
from .series import DailySeries, ForecastResult, HourlySeries, daily_average, day_of_week, year_fraction

__all__ = [
    "derive_seed",
    "Forecaster",
    "NaiveModel",
    "FourierModel",
    "LinearModel",
    "ArmaModel",
    "GarchModel",
    "MrjdModel",
    "AnnForecaster",
    "REGISTRY",
    "make_model",
    "daily_horizon",
    "to_daily",
    "to_hourly",
]


def derive_seed(seed: int, component: str) -> int:
    """Per-component seed: ``SeedSequence([seed, crc32(component)])`` first word."""
    ss = np.random.SeedSequence([int(seed), zlib.crc32(component.encode())])
    return int(ss.generate_state(1)[0])


def daily_horizon(history: HourlySeries, n_days: int) -> np.ndarray:
    """UTC instants of local midnight for the ``n_days`` days after the history."""
    return history.future_times(24 * n_days)[::24]


def to_daily(forecast: ForecastResult, offset_minutes: int) -> ForecastResult:
    """Average an hourly forecast over complete local days."""
    if forecast.metadata.get("granularity") == "daily":
        return forecast
    if len(forecast) % 24:
        raise ValueError("hourly forecast does not cover whole days")
    values = forecast.values.reshape(-1, 24).mean(axis=1)
    meta = dict(forecast.metadata, granularity="daily")
    lower = upper = None
    if forecast.lower is not None:
        lower = forecast.lower.reshape(-1, 24).mean(axis=1)
        upper = forecast.upper.reshape(-1, 24).mean(axis=1)
    return ForecastResult(forecast.model_id, forecast.horizon[::24], values, lower, upper, meta)


def to_hourly(forecast: ForecastResult) -> ForecastResult:
    """Spread each daily value flat over the 24 hours of its day."""
    if forecast.metadata.get("granularity") != "daily":
        return forecast
    hours = (forecast.horizon[:, None] + np.timedelta64(60, "m") * np.arange(24)).ravel()
    rep = lambda a: None if a is None else np.repeat(a, 24)  # noqa: E731
    meta = dict(forecast.metadata, granularity="hourly")
    return ForecastResult(forecast.model_id, hours, rep(forecast.values), rep(forecast.lower),
                          rep(forecast.upper), meta)


class Forecaster:
    """Base adapter. Subclasses set ``model_id`` and implement fit/forecast."""

    model_id = "base"
    granularity = "hourly"

    def fit(self, history: HourlySeries) -> "Forecaster":
        raise NotImplementedError

    def forecast(self, n_days: int) -> ForecastResult:
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def _result(self, horizon, values, lower=None, upper=None, **meta) -> ForecastResult:
        meta["granularity"] = self.granularity
        return ForecastResult(self.model_id, horizon, values, lower, upper, meta)


class NaiveModel(Forecaster):
    model_id = "naive"

    def fit(self, history: HourlySeries) -> "NaiveModel":
        self.history = history
        return self

    def forecast(self, n_days: int) -> ForecastResult:
        res = naive_forecast(self.history, n_days)
        return self._result(res.horizon, res.values, **res.metadata)


class FourierModel(Forecaster):
    model_id = "fourier"

    def __init__(self, config: FourierForecastConfig | dict | None = None):
        # a dict holds overrides on top of the weights adapted to the history
        self.overrides: dict = {}
        if isinstance(config, dict):
            self.overrides = FourierForecastConfig.coerce(config)
            FourierForecastConfig(**{"year_weights": {0: 1.0}, **self.overrides})  # validate early
            config = None
        self.config = config

    def fit(self, history: HourlySeries) -> "FourierModel":
        self.history = history
        self.fitted_config = self.config or FourierForecastConfig.for_history(history, **self.overrides)
        return self

    def forecast(self, n_days: int) -> ForecastResult:
        res = fourier_forecast(self.history, self.fitted_config, 24 * n_days)
        return self._result(res.horizon, res.values, **res.metadata)

    def params(self) -> dict:
        return {"config": self.fitted_config.to_dict()}


class _DecompositionModel(Forecaster):
    """Shared pipeline: daily means, weekday profile, differenced residual.

    Residual forecasts are integrated from the last deseasonalized level and
    the weekday profile is added back.
    """

    granularity = "daily"

    def __init__(self, window: int = 7):
        self.window = window

    def fit(self, history: HourlySeries) -> "_DecompositionModel":
        self.history = history
        self.daily: DailySeries = daily_average(history)
        self.decomposition = decompose(self.daily, self.window)
        self._fit_residual(self.decomposition.residual)
        return self

    def _fit_residual(self, residual: np.ndarray) -> None:
        raise NotImplementedError

    def _residual_forecast(self, n_days: int) -> tuple[np.ndarray, np.ndarray | None]:
        raise NotImplementedError

    def forecast(self, n_days: int) -> ForecastResult:
        res, res_var = self._residual_forecast(n_days)
        level = self.decomposition.deseasonalized[-1] + np.cumsum(res)
        horizon = daily_horizon(self.history, n_days)
        local = horizon + np.timedelta64(self.history.utc_offset_minutes, "m")
        dow = day_of_week(local)
        values = reseasonalize(level, self.decomposition.seasonal_profile, dow)
        lower = upper = None
        if res_var is not None:
            half = 1.6448536269514722 * np.sqrt(np.cumsum(res_var))
            lower, upper = values - half, values + half
        return self._result(horizon, values, lower, upper)

    def _decomposition_params(self) -> dict:
        return {"seasonal_profile": self.decomposition.seasonal_profile.tolist(), "window": self.window}


class LinearModel(_DecompositionModel):
    model_id = "linear"

    def __init__(self, n_lags: int = 7, window: int = 7):
        super().__init__(window)
        self.n_lags = n_lags

    def _fit_residual(self, residual: np.ndarray) -> None:
        self.predictor = fit_linear_predictor(residual, self.n_lags, 1)
        self.residual = residual

    def _residual_forecast(self, n_days: int):
        return self.predictor.forecast(self.residual, n_days), None

    def params(self) -> dict:
        p = self.predictor
        return {"intercept": p.intercept, "coefs": p.coefs.tolist(), "mean": p.mean,
                **self._decomposition_params()}


class ArmaModel(_DecompositionModel):
    model_id = "arma"

    def __init__(self, p: int | None = None, q: int | None = None, window: int = 7):
        super().__init__(window)
        self.order = None if p is None or q is None else (p, q)

    def _fit_residual(self, residual: np.ndarray) -> None:
        p, q = self.order or order_select_aic(residual, 3, 3)
        self.arma = fit_arma(residual, p, q)
        self.residual = residual

    def _residual_forecast(self, n_days: int):
        return arma_forecast(self.arma, self.residual, n_days), None

    def params(self) -> dict:
        return {**self.arma.to_dict(), **self._decomposition_params()}


class GarchModel(_DecompositionModel):
    model_id = "garch"

    def _fit_residual(self, residual: np.ndarray) -> None:
        self.garch = fit_garch(residual)
        self.residual = residual

    def _residual_forecast(self, n_days: int):
        return garch_forecast(self.garch.params, self.residual, n_days)

    def params(self) -> dict:
        return {**self.garch.to_dict(), **self._decomposition_params()}


class MrjdModel(Forecaster):
    model_id = "mrjd"
    granularity = "daily"

    def __init__(self, n_paths: int = 500, seed: int = 0, dt: float = 1.0 / 365.0,
                 quantiles: tuple[float, float] = (0.05, 0.95)):
        self.n_paths = n_paths
        self.seed = seed
        self.dt = dt
        self.quantiles = tuple(quantiles)

    def fit(self, history: HourlySeries) -> "MrjdModel":
        self.history = history
        daily = daily_average(history)
        self.shift = price_shift(daily.prices)
        t = daily.year_fractions
        self.coeffs = fit_seasonality(np.log(daily.prices + self.shift), t)
        self.x = deseasonalize_log(daily.prices, self.coeffs, t, self.shift)
        self.fit_result = calibrate_mrjd(self.x, self.dt)
        return self

    def simulate(self, n_days: int, n_paths: int | None = None, seed: int | None = None):
        horizon = daily_horizon(self.history, n_days)
        local = horizon + np.timedelta64(self.history.utc_offset_minutes, "m")
        return simulate_mrjd(
            self.fit_result.params, self.coeffs, float(self.x[-1]), horizon, year_fraction(local),
            n_paths or self.n_paths, self.seed if seed is None else seed, self.shift,
        )

    def forecast(self, n_days: int) -> ForecastResult:
        paths = self.simulate(n_days)
        q = self.quantiles if paths.n_paths >= 100 else None
        res = mrjd_forecast(paths, q, self.model_id)
        return self._result(res.horizon, res.values, res.lower, res.upper, **res.metadata)

    def params(self) -> dict:
        return self.fit_result.to_dict(self.coeffs, self.shift)


class AnnForecaster(Forecaster):
    model_id = "ann"

    def __init__(self, hidden=(150, 20), max_epochs: int = 300, learning_rate: float = 0.05,
                 momentum: float = 0.9, conjugate: bool = False, seed: int = 0,
                 validation_fraction: float = 0.1, patience: int = 50,
                 max_train_days: int | None = 365):
        self.hidden = tuple(hidden)
        self.max_train_days = max_train_days
        self.config = ann_mod.TrainConfig(
            max_epochs=max_epochs, learning_rate=learning_rate, momentum=momentum,
            conjugate=conjugate, seed=seed, validation_fraction=validation_fraction,
            patience=patience,
        )

    def fit(self, history: HourlySeries) -> "AnnForecaster":
        self.history = history
        self.model, self.trace = ann_mod.fit_ann(history, None, self.hidden, self.config,
                                                 self.max_train_days)
        return self

    def forecast(self, n_days: int) -> ForecastResult:
        res = ann_mod.ann_forecast(self.model, self.history, n_days)
        return self._result(res.horizon, res.values, **res.metadata)

    def params(self) -> dict:
        return {
            **self.model.to_dict(),
            "fit_diagnostics": {
                "final_train_loss": self.trace.train_loss[-1] if self.trace.train_loss else None,
                "best_epoch": self.trace.best_epoch,
                "diverged": self.trace.diverged,
            },
        }


@dataclass(frozen=True)
class _Entry:
    factory: Callable[..., Forecaster]
    seeded: bool = False
    defaults: dict = field(default_factory=dict)


REGISTRY: dict[str, _Entry] = {
    "naive": _Entry(NaiveModel),
    "fourier": _Entry(FourierModel),
    "linear": _Entry(LinearModel),
    "arma": _Entry(ArmaModel),
    "garch": _Entry(GarchModel),
    "mrjd": _Entry(MrjdModel, seeded=True),
    "ann": _Entry(AnnForecaster, seeded=True),
}


def make_model(name: str, config: dict[str, Any] | None = None, seed: int = 0) -> Forecaster:
    """Instantiate a registered model; seeded models get ``derive_seed(seed, name)``
    unless the config pins a seed."""
    if name not in REGISTRY:
        raise KeyError(f"unknown model {name!r}; registered: {', '.join(sorted(REGISTRY))}")
    entry = REGISTRY[name]
    kwargs = dict(entry.defaults)
    kwargs.update(config or {})
    if name == "fourier":
        return FourierModel(kwargs or None)
    if entry.seeded and "seed" not in kwargs:
        kwargs["seed"] = derive_seed(seed, name)
    return entry.factory(**kwargs)
