"""Calendar-rule naive forecaster and the weighted Fourier combination."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Mapping

import numpy as np

from .seasonal import HarmonicFit, fit_harmonics
from .series import ForecastResult, HourlySeries, day_of_week, year_fraction

__all__ = [
    "FourierForecastConfig",
    "naive_day",
    "naive_forecast",
    "fit_yearly_harmonics",
    "z1_yearly_component",
    "z2_weekday_reference",
    "z3_week_lag",
    "z4_trend",
    "combine",
    "fourier_forecast",
]

REFERENCE_YEAR_WEIGHTS = {2008: 1.0, 2009: 1.0, 2010: 1.0, 2011: 10.0, 2012: 1.0, 2013: 1.0, 2014: 5.0}


def _day_matrix(history: HourlySeries) -> tuple[np.ndarray, np.ndarray]:
    """Reshape a day-aligned history into ``(days, 24)`` plus the day dates."""
    lt = history.local_times
    if len(history) % 24 or (lt[0] - lt[0].astype("datetime64[D]")) != np.timedelta64(0, "m"):
        raise ValueError("history must start and end on local day boundaries")
    days = history.prices.reshape(-1, 24)
    dates = lt[::24].astype("datetime64[D]")
    return days, dates


def naive_day(dow: int, prev: np.ndarray, prev3: np.ndarray, prev7: np.ndarray) -> np.ndarray:
    """Four-branch weekday rule for one day of 24 hourly prices.

    ``prev``, ``prev3`` and ``prev7`` are the profiles 1, 3 and 7 days back.
    """
    if dow in (6, 7):
        return prev7.copy()
    if dow == 5:
        return 0.5 * (prev + prev7)
    if dow == 1:
        return 0.5 * (prev3 + prev7)
    return prev.copy()


def naive_forecast(history: HourlySeries, horizon_days: int) -> ForecastResult:
    days, dates = _day_matrix(history)
    if days.shape[0] < 8:
        raise ValueError("naive forecast needs at least 8 full days of history")
    if horizon_days < 1:
        raise ValueError("horizon_days must be positive")
    n_hist = days.shape[0]
    grid = np.vstack([days, np.empty((horizon_days, 24))])
    start_dow = int(day_of_week(dates[-1:] + 1)[0])
    for k in range(horizon_days):
        d = n_hist + k
        dow = (start_dow - 1 + k) % 7 + 1
        grid[d] = naive_day(dow, grid[d - 1], grid[d - 3], grid[d - 7])
    horizon = history.future_times(24 * horizon_days)
    return ForecastResult(
        "naive",
        horizon,
        grid[n_hist:].ravel(),
        metadata={"recursive": horizon_days > 7},
    )


@dataclass(frozen=True)
class FourierForecastConfig:
    """Weights for the yearly/weekday/lag/trend combination.

    ``trend_years`` is ``(reference_year, latest_year)``; ``None`` disables
    the trend term.
    """

    year_weights: Mapping[int, float] = field(default_factory=lambda: dict(REFERENCE_YEAR_WEIGHTS))
    combination_weights: tuple[float, float, float] = (20.0, 70.0, 10.0)
    trend_halving: float = 0.5
    weekday_window_days: int = 14
    trend_years: tuple[int, int] | None = (2011, 2014)
    harmonic_order: int = 8

    def __post_init__(self) -> None:
        if any(w < 0 for w in self.year_weights.values()):
            raise ValueError("year weights must be nonnegative")
        if any(w < 0 for w in self.combination_weights) or sum(self.combination_weights) <= 0:
            raise ValueError("combination weights must be nonnegative with a positive sum")
        if sum(self.year_weights.values()) <= 0:
            raise ValueError("year weights must have a positive sum")

    @classmethod
    def for_history(cls, history: HourlySeries, **overrides) -> "FourierForecastConfig":
        """Transfer the default weighting pattern to whichever full years exist.

        The year four before the forecast year gets weight 10, the previous
        year weight 5, any other full year weight 1. The trend compares the
        earliest available of (forecast year - 4) and the oldest full year
        against the latest full year, when there are at least two.
        """
        years = full_years(history)
        if not years:
            raise ValueError("history contains no complete calendar year")
        target = int(history.years[-1]) + (1 if int(history.years[-1]) in years else 0)
        weights = {}
        for y in years:
            weights[y] = 10.0 if y == target - 4 else 5.0 if y == target - 1 else 1.0
        trend = None
        if len(years) >= 2:
            ref = target - 4 if (target - 4) in years else years[0]
            if ref != years[-1]:
                trend = (ref, years[-1])
        kwargs = {"year_weights": weights, "trend_years": trend}
        kwargs.update(overrides)
        return cls(**kwargs)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["year_weights"] = {str(k): v for k, v in self.year_weights.items()}
        return d

    @staticmethod
    def coerce(d: Mapping) -> dict:
        """Normalize JSON-decoded field values (string years, lists)."""
        d = dict(d)
        if "year_weights" in d:
            d["year_weights"] = {int(k): float(v) for k, v in d["year_weights"].items()}
        if "combination_weights" in d:
            d["combination_weights"] = tuple(float(w) for w in d["combination_weights"])
        if d.get("trend_years") is not None:
            d["trend_years"] = tuple(int(y) for y in d["trend_years"])
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "FourierForecastConfig":
        return cls(**cls.coerce(d))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def full_years(history: HourlySeries) -> list[int]:
    years = history.years
    out = []
    for y in np.unique(years):
        n = int(np.sum(years == y))
        expected = 8784 if (y % 4 == 0 and (y % 100 != 0 or y % 400 == 0)) else 8760
        if n == expected:
            out.append(int(y))
    return out


def fit_yearly_harmonics(history: HourlySeries, years, order: int = 8) -> dict[int, HarmonicFit]:
    """One harmonic fit per calendar year, in year-fraction time with period 1."""
    yf = history.year_fractions
    yrs = history.years
    fits = {}
    for y in years:
        mask = yrs == y
        if not np.any(mask):
            raise ValueError(f"history has no data for year {y}")
        fits[int(y)] = fit_harmonics(yf[mask], history.prices[mask], order=order, period=1.0)
    return fits


def z1_yearly_component(fits: Mapping[int, HarmonicFit], config: FourierForecastConfig,
                        target_fraction: float | np.ndarray) -> float | np.ndarray:
    """Weighted mean of the yearly fits at the target's position in the year."""
    total = 0.0
    norm = 0.0
    for year, w in config.year_weights.items():
        if year not in fits:
            raise ValueError(f"no harmonic fit for configured year {year}")
        if w == 0:
            continue
        total = total + w * fits[year](target_fraction)
        norm += w
    out = total / norm
    return float(out[0]) if np.ndim(target_fraction) == 0 else out


class _WeekdayIndex:
    """Lookup of historical prices grouped by (weekday, hour)."""

    def __init__(self, history: HourlySeries):
        lt = history.local_times
        self.days = lt.astype("datetime64[D]")
        self.years = history.years
        self.prices = history.prices
        self.key = (history.days_of_week - 1) * 24 + history.hours
        order = np.argsort(self.key, kind="stable")
        self.order = order
        self.bounds = np.searchsorted(self.key[order], np.arange(169))

    def mean(self, target_local: np.datetime64, window_days: int) -> float:
        tday = np.datetime64(target_local, "D")
        dow = int(day_of_week(np.array([tday]))[0])
        hour = int((np.datetime64(target_local, "m") - np.datetime64(tday, "m")).astype(np.int64) // 60)
        key = (dow - 1) * 24 + hour
        idx = self.order[self.bounds[key] : self.bounds[key + 1]]
        if idx.size == 0:
            raise ValueError("no historical points for this weekday and hour")
        tyear = tday.astype("datetime64[Y]").astype(np.int64) + 1970
        t_doy = (tday - tday.astype("datetime64[Y]")).astype(np.int64)
        days = self.days[idx]
        selected = np.zeros(idx.size, dtype=bool)
        for year in np.unique(self.years[idx]):
            if year >= tyear:
                continue
            ystart = np.datetime64(f"{int(year)}-01-01", "D")
            yend = np.datetime64(f"{int(year) + 1}-01-01", "D")
            anchor = min(ystart + np.timedelta64(int(t_doy), "D"), yend - 1)
            selected |= np.abs((days - anchor).astype(np.int64)) <= window_days
        if not np.any(selected):
            raise ValueError(f"no same-weekday reference points within +/-{window_days} days")
        return float(np.mean(self.prices[idx[selected]]))


def z2_weekday_reference(history: HourlySeries, target_time: np.datetime64, window_days: int = 14) -> float:
    """Mean of prior-year prices at the same weekday and hour near the target's
    position in the year. ``target_time`` is a UTC instant."""
    local = np.datetime64(target_time, "m") + np.timedelta64(history.utc_offset_minutes, "m")
    return _WeekdayIndex(history).mean(local, window_days)


def z3_week_lag(values: np.ndarray, i: int) -> float:
    """Value 168 hours before index ``i`` of a history+forecast sequence."""
    j = i - 168
    if j < 0 or j >= len(values):
        raise ValueError(f"lag index {j} is outside the available values")
    v = values[j]
    if not np.isfinite(v):
        raise ValueError(f"lag index {j} has no value yet")
    return float(v)


def z4_trend(history: HourlySeries, reference_year: int, latest_year: int) -> float:
    """Mean of the reference (business-cycle) year minus mean of the latest year."""
    years = history.years
    complete = set(full_years(history))
    for y in (reference_year, latest_year):
        if y not in complete:
            raise ValueError(f"year {y} is not fully present in the history")
    return float(history.prices[years == reference_year].mean() - history.prices[years == latest_year].mean())


def combine(z1, z2, z3, z4, weights=(20.0, 70.0, 10.0), trend_halving: float = 0.5):
    """``(w1 z1 + w2 z2 + w3 z3) / (w1 + w2 + w3) - trend_halving * z4``."""
    w1, w2, w3 = weights
    return (w1 * z1 + w2 * z2 + w3 * z3) / (w1 + w2 + w3) - trend_halving * z4


def fourier_forecast(history: HourlySeries, config: FourierForecastConfig | None = None,
                     horizon_hours: int = 24) -> ForecastResult:
    """Hour-by-hour weighted combination over ``horizon_hours`` after the history."""
    config = config or FourierForecastConfig()
    if horizon_hours < 1:
        raise ValueError("horizon_hours must be positive")
    fits = fit_yearly_harmonics(
        history, [y for y, w in config.year_weights.items() if w > 0], config.harmonic_order
    )
    z4 = 0.0 if config.trend_years is None else z4_trend(history, *config.trend_years)
    horizon = history.future_times(horizon_hours)
    local = horizon + np.timedelta64(history.utc_offset_minutes, "m")
    z1 = z1_yearly_component(fits, config, year_fraction(local))
    index = _WeekdayIndex(history)
    n = len(history)
    values = np.concatenate([history.prices, np.full(horizon_hours, np.nan)])
    for k in range(horizon_hours):
        z2 = index.mean(local[k], config.weekday_window_days)
        z3 = z3_week_lag(values, n + k)
        values[n + k] = combine(z1[k], z2, z3, z4, config.combination_weights, config.trend_halving)
    return ForecastResult(
        "fourier",
        horizon,
        values[n:],
        metadata={"z4": z4, "years": sorted(int(y) for y in fits)},
    )
