"""Hourly price series, CSV ingestion, calendar helpers and error metrics.

Timestamps are stored as UTC ``datetime64[m]`` arrays. Each series also
carries a fixed UTC offset (taken from the first input row) and every
calendar field (day, weekday, hour, year fraction) is evaluated in that
fixed local offset. Weekdays are numbered Monday=1 .. Sunday=7.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

__all__ = [
    "IngestError",
    "IngestOptions",
    "IngestReport",
    "TimePoint",
    "HourlySeries",
    "DailySeries",
    "ForecastResult",
    "ErrorReport",
    "ingest_csv",
    "write_series_csv",
    "daily_average",
    "split",
    "compute_metrics",
    "write_forecast_csv",
    "read_forecast_csv",
    "day_of_week",
    "year_fraction",
]

HOUR = np.timedelta64(60, "m")
MAX_GAP_HOURS = 6


class IngestError(ValueError):
    """Raised when an input file cannot be normalized into an hourly series."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def _readonly(a: Any, dtype: Any) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def day_of_week(local_times: np.ndarray) -> np.ndarray:
    """Monday=1 .. Sunday=7 for an array of naive local datetime64 values."""
    days = local_times.astype("datetime64[D]").astype(np.int64)
    # 1970-01-01 was a Thursday
    return (days + 3) % 7 + 1


def year_fraction(local_times: np.ndarray) -> np.ndarray:
    """Elapsed fraction of the calendar year, hours since Jan 1 / hours in year."""
    t = np.asarray(local_times).astype("datetime64[m]")
    years = t.astype("datetime64[Y]")
    start = years.astype("datetime64[m]")
    end = (years + 1).astype("datetime64[m]")
    elapsed = (t - start).astype(np.float64)
    total = (end - start).astype(np.float64)
    return elapsed / total


@dataclass(frozen=True)
class TimePoint:
    instant: dt.datetime
    year: int
    month: int
    day_of_month: int
    day_of_week: int
    hour: int
    year_fraction: float


@dataclass(frozen=True)
class IngestOptions:
    max_gap_hours: int = MAX_GAP_HOURS
    strict: bool = False


@dataclass(frozen=True)
class IngestReport:
    rows_read: int
    duplicates_averaged: int
    gaps_filled: int

    def to_dict(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "duplicates_averaged": self.duplicates_averaged,
            "gaps_filled": self.gaps_filled,
        }


@dataclass(frozen=True, eq=False)
class HourlySeries:
    """Strictly hourly, gap-free price series.

    Parameters
    ----------
    times : array of datetime64[m]
        UTC instants, strictly increasing with exactly one hour spacing.
    prices : array of float
        Prices in EUR/MWh; negative values are allowed.
    utc_offset_minutes : int
        Fixed offset used for all calendar computations.
    """

    times: np.ndarray
    prices: np.ndarray
    utc_offset_minutes: int = 0
    report: IngestReport | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        times = _readonly(self.times, "datetime64[m]")
        prices = _readonly(self.prices, np.float64)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "prices", prices)
        if times.ndim != 1 or times.shape != prices.shape:
            raise ValueError("times and prices must be 1-d arrays of equal length")
        if not np.all(np.isfinite(prices)):
            raise ValueError("prices must be finite")
        if len(times) > 1 and not np.all(np.diff(times) == HOUR):
            raise ValueError("timestamps must be strictly increasing with 1-hour spacing")

    def __len__(self) -> int:
        return len(self.prices)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, HourlySeries):
            return NotImplemented
        return (
            self.utc_offset_minutes == other.utc_offset_minutes
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.prices, other.prices)
        )

    @property
    def local_times(self) -> np.ndarray:
        return self.times + np.timedelta64(self.utc_offset_minutes, "m")

    @property
    def hours(self) -> np.ndarray:
        lt = self.local_times
        return ((lt - lt.astype("datetime64[D]")).astype(np.int64) // 60).astype(np.int64)

    @property
    def days_of_week(self) -> np.ndarray:
        return day_of_week(self.local_times)

    @property
    def local_dates(self) -> np.ndarray:
        return self.local_times.astype("datetime64[D]")

    @property
    def year_fractions(self) -> np.ndarray:
        return year_fraction(self.local_times)

    @property
    def years(self) -> np.ndarray:
        return self.local_times.astype("datetime64[Y]").astype(np.int64) + 1970

    def point(self, i: int) -> TimePoint:
        lt = self.local_times[i].astype(dt.datetime)
        instant = self.times[i].astype(dt.datetime).replace(tzinfo=dt.timezone.utc)
        return TimePoint(
            instant=instant,
            year=lt.year,
            month=lt.month,
            day_of_month=lt.day,
            day_of_week=lt.isoweekday(),
            hour=lt.hour,
            year_fraction=float(year_fraction(self.local_times[i : i + 1])[0]),
        )

    def slice(self, start: int, stop: int | None = None) -> "HourlySeries":
        return HourlySeries(self.times[start:stop], self.prices[start:stop], self.utc_offset_minutes)

    def with_prices(self, prices: np.ndarray) -> "HourlySeries":
        return HourlySeries(self.times, prices, self.utc_offset_minutes)

    def timestamp_strings(self, times: np.ndarray | None = None) -> list[str]:
        return format_timestamps(self.times if times is None else times, self.utc_offset_minutes)

    def future_times(self, n_hours: int) -> np.ndarray:
        """The ``n_hours`` hourly UTC instants following the end of the series."""
        return self.times[-1] + HOUR * np.arange(1, n_hours + 1)

    def full_day_mask(self) -> np.ndarray:
        """Boolean mask of points that belong to complete 24-hour local days."""
        dates = self.local_dates
        uniq, inverse, counts = np.unique(dates, return_inverse=True, return_counts=True)
        return counts[inverse] == 24


@dataclass(frozen=True, eq=False)
class DailySeries:
    dates: np.ndarray
    prices: np.ndarray

    def __post_init__(self) -> None:
        dates = _readonly(self.dates, "datetime64[D]")
        prices = _readonly(self.prices, np.float64)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "prices", prices)
        if dates.shape != prices.shape:
            raise ValueError("dates and prices must have equal length")
        if len(dates) > 1 and not np.all(np.diff(dates) == np.timedelta64(1, "D")):
            raise ValueError("daily series must cover consecutive calendar days")

    def __len__(self) -> int:
        return len(self.prices)

    @property
    def days_of_week(self) -> np.ndarray:
        return day_of_week(self.dates)

    @property
    def year_fractions(self) -> np.ndarray:
        return year_fraction(self.dates)


@dataclass(frozen=True, eq=False)
class ForecastResult:
    """Model output aligned to a horizon of UTC instants (hourly or daily)."""

    model_id: str
    horizon: np.ndarray
    values: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        horizon = _readonly(self.horizon, "datetime64[m]")
        values = _readonly(self.values, np.float64)
        object.__setattr__(self, "horizon", horizon)
        object.__setattr__(self, "values", values)
        if horizon.shape != values.shape:
            raise ValueError("values must align 1:1 with horizon")
        if (self.lower is None) != (self.upper is None):
            raise ValueError("lower and upper bands must be given together")
        if self.lower is not None:
            lower = _readonly(self.lower, np.float64)
            upper = _readonly(self.upper, np.float64)
            if lower.shape != values.shape or upper.shape != values.shape:
                raise ValueError("bands must align with values")
            tol = 1e-9 * (1.0 + np.abs(values))
            if np.any(lower > values + tol) or np.any(upper < values - tol):
                raise ValueError("bands must satisfy lower <= value <= upper")
            object.__setattr__(self, "lower", lower)
            object.__setattr__(self, "upper", upper)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class ErrorReport:
    mae: float
    rmse: float
    mape: float | None
    per_point_errors: tuple = ()

    def to_dict(self, timestamps: Sequence[str] | None = None) -> dict:
        per_point = []
        for i, (ts, err) in enumerate(self.per_point_errors):
            label = timestamps[i] if timestamps is not None else ts
            per_point.append({"timestamp": label, "error": err})
        return {"mae": self.mae, "rmse": self.rmse, "mape": self.mape, "per_point": per_point}

    def to_json(self, timestamps: Sequence[str] | None = None) -> str:
        return json.dumps(self.to_dict(timestamps), indent=2)


# --------------------------------------------------------------------- parsing


def _parse_offset(ts: dt.datetime) -> int:
    off = ts.utcoffset()
    if off is None:
        raise ValueError("timestamp lacks a UTC offset")
    return int(off.total_seconds() // 60)


def format_timestamps(times: np.ndarray, offset_minutes: int) -> list[str]:
    tz = dt.timezone(dt.timedelta(minutes=offset_minutes))
    out = []
    for t in np.asarray(times, dtype="datetime64[m]"):
        d = t.astype(dt.datetime).replace(tzinfo=dt.timezone.utc).astimezone(tz)
        out.append(d.isoformat())
    return out


def parse_timestamp(text: str) -> tuple[np.datetime64, int]:
    ts = dt.datetime.fromisoformat(text.strip())
    offset = _parse_offset(ts)
    utc = ts.astimezone(dt.timezone.utc).replace(tzinfo=None)
    return np.datetime64(utc, "m"), offset


def ingest_csv(path: str | Path, options: IngestOptions | None = None) -> HourlySeries:
    """Read a ``timestamp,price`` CSV into a normalized :class:`HourlySeries`.

    Repeated hours (DST fall-back) are averaged into one record and short
    gaps (DST spring-forward) are filled by linear interpolation. The counts
    of both normalizations are attached as ``series.report``.

    Raises
    ------
    IngestError
        On a malformed row, a timestamp earlier than its predecessor, a gap
        longer than ``options.max_gap_hours`` or, in strict mode, any
        normalization at all.
    """
    options = options or IngestOptions()
    path = Path(path)
    if not path.exists():
        raise IngestError(f"no such file: {path}")

    times: list[np.datetime64] = []
    prices: list[float] = []
    offset = None
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != ["timestamp", "price"]:
            raise IngestError("expected header 'timestamp,price'", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise IngestError(f"expected 2 fields, got {len(row)}", line=lineno)
            try:
                t, off = parse_timestamp(row[0])
                p = float(row[1])
            except ValueError as exc:
                raise IngestError(f"cannot parse row: {exc}", line=lineno) from None
            if not math.isfinite(p):
                raise IngestError("price is not finite", line=lineno)
            if t.astype(np.int64) % 60:
                raise IngestError("timestamp is not on a whole hour", line=lineno)
            if times and t < times[-1]:
                raise IngestError(
                    f"timestamp {row[0].strip()} is earlier than the previous row", line=lineno
                )
            if offset is None:
                offset = off
            times.append(t)
            prices.append(p)

    if not times:
        raise IngestError("file contains no data rows")

    series, report = normalize(np.array(times), np.array(prices), offset, options)
    if options.strict and (report.duplicates_averaged or report.gaps_filled):
        raise IngestError(
            f"strict mode: {report.duplicates_averaged} duplicate hours, "
            f"{report.gaps_filled} missing hours"
        )
    return series


def normalize(
    times: np.ndarray, prices: np.ndarray, offset: int, options: IngestOptions | None = None
) -> tuple[HourlySeries, IngestReport]:
    """Average duplicate instants and interpolate short gaps."""
    options = options or IngestOptions()
    uniq, inverse, counts = np.unique(times, return_inverse=True, return_counts=True)
    sums = np.bincount(inverse, weights=prices)
    merged = sums / counts
    duplicates = int(np.sum(counts - 1))

    idx = ((uniq - uniq[0]) // HOUR).astype(np.int64)
    steps = np.diff(idx)
    big = np.nonzero(steps - 1 > options.max_gap_hours)[0]
    if big.size:
        k = big[0]
        lo, hi = format_timestamps(uniq[k : k + 2], offset)
        raise IngestError(f"gap of {steps[k] - 1} hours between {lo} and {hi} exceeds limit")
    full_idx = np.arange(idx[-1] + 1)
    filled = np.interp(full_idx, idx, merged)
    gaps = int(len(full_idx) - len(idx))
    full_times = uniq[0] + HOUR * full_idx
    report = IngestReport(rows_read=len(times), duplicates_averaged=duplicates, gaps_filled=gaps)
    return HourlySeries(full_times, filled, offset, report=report), report


def write_series_csv(series: HourlySeries, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "price"])
        for ts, p in zip(series.timestamp_strings(), series.prices):
            w.writerow([ts, repr(float(p))])


def write_forecast_csv(forecasts: ForecastResult | Iterable[ForecastResult], path: str | Path,
                       offset_minutes: int = 0) -> None:
    """Write ``timestamp,model_id,value[,lower,upper]`` rows."""
    if isinstance(forecasts, ForecastResult):
        forecasts = [forecasts]
    forecasts = list(forecasts)
    banded = any(f.lower is not None for f in forecasts)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "model_id", "value"] + (["lower", "upper"] if banded else []))
        for f in forecasts:
            stamps = format_timestamps(f.horizon, offset_minutes)
            for i, ts in enumerate(stamps):
                row = [ts, f.model_id, repr(float(f.values[i]))]
                if banded:
                    if f.lower is not None:
                        row += [repr(float(f.lower[i])), repr(float(f.upper[i]))]
                    else:
                        row += ["", ""]
                w.writerow(row)


def read_forecast_csv(path: str | Path) -> list[ForecastResult]:
    """Read a forecast CSV back into one :class:`ForecastResult` per model id."""
    rows: dict[str, dict[str, list]] = {}
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or reader.fieldnames[:3] != ["timestamp", "model_id", "value"]:
            raise IngestError("expected header 'timestamp,model_id,value[,lower,upper]'", line=1)
        for lineno, row in enumerate(reader, start=2):
            try:
                t, _ = parse_timestamp(row["timestamp"])
                v = float(row["value"])
            except (ValueError, TypeError) as exc:
                raise IngestError(f"cannot parse row: {exc}", line=lineno) from None
            bucket = rows.setdefault(row["model_id"], {"t": [], "v": [], "lo": [], "hi": []})
            bucket["t"].append(t)
            bucket["v"].append(v)
            lo, hi = row.get("lower") or "", row.get("upper") or ""
            bucket["lo"].append(float(lo) if lo else None)
            bucket["hi"].append(float(hi) if hi else None)
    out = []
    for model_id, b in rows.items():
        has_bands = all(x is not None for x in b["lo"]) and all(x is not None for x in b["hi"])
        out.append(
            ForecastResult(
                model_id,
                np.array(b["t"]),
                np.array(b["v"]),
                np.array(b["lo"], dtype=float) if has_bands else None,
                np.array(b["hi"], dtype=float) if has_bands else None,
            )
        )
    return out


# ------------------------------------------------------------------ operations


def daily_average(series: HourlySeries) -> DailySeries:
    """Mean price per complete local day; partial first/last days are dropped."""
    if len(series) == 0:
        raise ValueError("series is empty")
    dates = series.local_dates
    uniq, inverse, counts = np.unique(dates, return_inverse=True, return_counts=True)
    sums = np.bincount(inverse, weights=series.prices)
    full = counts == 24
    # interior days are always complete on a gap-free hourly grid
    return DailySeries(uniq[full], sums[full] / counts[full])


def split(series: HourlySeries, cutoff: np.datetime64 | dt.datetime | str) -> tuple[HourlySeries, HourlySeries]:
    """Half-open split: train holds points strictly before ``cutoff``."""
    if isinstance(cutoff, str):
        cutoff, _ = parse_timestamp(cutoff)
    elif isinstance(cutoff, dt.datetime):
        if cutoff.tzinfo is not None:
            cutoff = cutoff.astimezone(dt.timezone.utc).replace(tzinfo=None)
        cutoff = np.datetime64(cutoff, "m")
    cutoff = np.datetime64(cutoff, "m")
    k = int(np.searchsorted(series.times, cutoff, side="left"))
    if k <= 0 or k >= len(series):
        raise ValueError("cutoff must fall strictly inside the series span")
    return series.slice(0, k), series.slice(k)


def compute_metrics(actual: Sequence[float], forecast: Sequence[float],
                    timestamps: Sequence[Any] | None = None) -> ErrorReport:
    """MAE, RMSE and MAPE (percent); MAPE is ``None`` when any actual is zero."""
    a = np.asarray(actual, dtype=np.float64)
    f = np.asarray(forecast, dtype=np.float64)
    if a.shape != f.shape:
        raise ValueError(f"length mismatch: {a.size} actual vs {f.size} forecast values")
    if a.size == 0:
        raise ValueError("need at least one value")
    err = a - f
    mae = float(np.mean(np.abs(err)))
    rmse = float(np.sqrt(np.mean(err**2)))
    # guard against last-ulp rounding breaking rmse >= mae
    rmse = max(rmse, mae)
    mape = None
    if not np.any(a == 0):
        with np.errstate(over="ignore"):
            mape = float(100.0 * np.mean(np.abs(err) / np.abs(a)))
    if timestamps is None:
        timestamps = range(a.size)
    per_point = tuple((ts, float(e)) for ts, e in zip(timestamps, err))
    return ErrorReport(mae, rmse, mape, per_point)
