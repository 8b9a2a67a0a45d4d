"""Seasonal structure: smoothing, weekday profiles, differencing, unit-root
testing, spectral period detection and fixed-frequency harmonic fits."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .series import DailySeries

__all__ = [
    "DecompositionResult",
    "HarmonicFit",
    "StationarityVerdict",
    "DF_CRITICAL_VALUES",
    "moving_average",
    "weekday_profile",
    "deseasonalize",
    "reseasonalize",
    "difference",
    "dickey_fuller",
    "dominant_period",
    "fit_harmonics",
    "decompose",
]

# Constant-only Dickey-Fuller critical values (asymptotic, Fuller 1976 tables).
DF_CRITICAL_VALUES = {0.01: -3.43, 0.05: -2.86, 0.10: -2.57}


@dataclass(frozen=True, eq=False)
class DecompositionResult:
    trend: np.ndarray
    seasonal_profile: np.ndarray
    residual: np.ndarray
    deseasonalized: np.ndarray
    days_of_week: np.ndarray
    period: int = 7

    @property
    def seasonal(self) -> np.ndarray:
        return self.seasonal_profile[self.days_of_week - 1]

    def to_csv(self, path: str | Path) -> None:
        """Columns ``t,trend,seasonal,residual``; the first residual is blank."""
        seasonal = self.seasonal
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "trend", "seasonal", "residual"])
            for t in range(len(self.trend)):
                res = "" if t == 0 else repr(float(self.residual[t - 1]))
                w.writerow([t, repr(float(self.trend[t])), repr(float(seasonal[t])), res])


@dataclass(frozen=True, eq=False)
class HarmonicFit:
    """Truncated Fourier series ``a0 + sum_k a_k cos(2 pi k t / P) + b_k sin(2 pi k t / P)``."""

    a0: float
    a: np.ndarray
    b: np.ndarray
    period: float

    @property
    def order(self) -> int:
        return len(self.a)

    def __call__(self, t: np.ndarray | float) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        return _harmonic_design(t, self.order, self.period) @ self.coefficients

    @property
    def coefficients(self) -> np.ndarray:
        """Stacked ``[a0, a1, b1, a2, b2, ...]`` matching the design matrix columns."""
        out = np.empty(2 * self.order + 1)
        out[0] = self.a0
        out[1::2] = self.a
        out[2::2] = self.b
        return out

    @classmethod
    def from_coefficients(cls, coef: np.ndarray, period: float) -> "HarmonicFit":
        coef = np.asarray(coef, dtype=np.float64)
        return cls(float(coef[0]), coef[1::2].copy(), coef[2::2].copy(), float(period))

    def to_dict(self) -> dict:
        return {"a0": self.a0, "a": self.a.tolist(), "b": self.b.tolist(), "period": self.period}


@dataclass(frozen=True)
class StationarityVerdict:
    statistic: float
    critical_value: float
    reject_unit_root: bool


def moving_average(values: Sequence[float], window: int) -> np.ndarray:
    """Centered moving average whose window shrinks at the edges.

    >>> moving_average([1, 2, 3, 4], 3)
    array([1.5, 2. , 3. , 3.5])
    """
    x = np.asarray(values, dtype=np.float64)
    n = x.size
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be a positive odd integer")
    if window > n:
        raise ValueError(f"window {window} exceeds series length {n}")
    # "same" convolution truncates the window at the edges
    sums = np.convolve(x, np.ones(window), mode="same")
    counts = np.convolve(np.ones(n), np.ones(window), mode="same")
    return sums / counts


def weekday_profile(values: Sequence[float] | DailySeries, days_of_week: Sequence[int] | None = None) -> np.ndarray:
    """Mean value for each weekday, index 0 = Monday."""
    if isinstance(values, DailySeries):
        days_of_week = values.days_of_week
        values = values.prices
    x = np.asarray(values, dtype=np.float64)
    dow = np.asarray(days_of_week, dtype=np.int64)
    if x.size < 14:
        raise ValueError("weekday profile needs at least two full weeks")
    counts = np.bincount(dow - 1, minlength=7)
    if np.any(counts < 2):
        raise ValueError("weekday profile needs every weekday at least twice")
    return np.bincount(dow - 1, weights=x, minlength=7) / counts


def deseasonalize(values: Sequence[float], profile: Sequence[float], days_of_week: Sequence[int]) -> np.ndarray:
    profile = np.asarray(profile, dtype=np.float64)
    if profile.shape != (7,):
        raise ValueError("profile must have 7 entries")
    return np.asarray(values, dtype=np.float64) - profile[np.asarray(days_of_week) - 1]


def reseasonalize(values: Sequence[float], profile: Sequence[float], days_of_week: Sequence[int]) -> np.ndarray:
    return np.asarray(values, dtype=np.float64) + np.asarray(profile)[np.asarray(days_of_week) - 1]


def difference(values: Sequence[float]) -> np.ndarray:
    x = np.asarray(values, dtype=np.float64)
    if x.size < 2:
        raise ValueError("need at least two values to difference")
    return np.diff(x)


def dickey_fuller(values: Sequence[float], significance: float = 0.05) -> StationarityVerdict:
    """Non-augmented Dickey-Fuller test with a constant.

    Regresses ``dx_t`` on ``(1, x_{t-1})`` and compares the t-ratio of the
    lagged level against the tabulated critical value.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.size < 25:
        raise ValueError("Dickey-Fuller test needs at least 25 observations")
    if significance not in DF_CRITICAL_VALUES:
        raise ValueError(f"significance must be one of {sorted(DF_CRITICAL_VALUES)}")
    y = np.diff(x)
    lag = x[:-1]
    lag_c = lag - lag.mean()
    sxx = float(lag_c @ lag_c)
    if sxx <= 1e-12 * max(1.0, float(lag @ lag)):
        raise ValueError("lagged level has zero variance")
    slope = float(lag_c @ (y - y.mean())) / sxx
    resid = (y - y.mean()) - slope * lag_c
    dof = y.size - 2
    s2 = float(resid @ resid) / dof
    stat = slope / np.sqrt(s2 / sxx)
    crit = DF_CRITICAL_VALUES[significance]
    return StationarityVerdict(float(stat), crit, bool(stat < crit))


def dominant_period(values: Sequence[float], candidates: Sequence[int] | range,
                    threshold: float = 3.0) -> int | None:
    """Candidate period with the largest DFT amplitude, or None when no peak
    reaches ``threshold`` times the median spectral magnitude."""
    x = np.asarray(values, dtype=np.float64)
    candidates = [int(c) for c in candidates]
    if x.size < 4 * max(candidates):
        raise ValueError("series too short for the largest candidate period")
    n = x.size
    spec = np.abs(np.fft.rfft(x - x.mean()))
    median = float(np.median(spec[1:]))
    best, best_amp = None, -1.0
    for p in candidates:
        # closest Fourier bin to frequency 1/p
        k = int(round(n / p))
        if k < 1 or k >= spec.size:
            continue
        amp = spec[k]
        if amp > best_amp:
            best, best_amp = p, amp
    if best is None or best_amp < threshold * median:
        return None
    return best


def _harmonic_design(t: np.ndarray, order: int, period: float) -> np.ndarray:
    t = np.atleast_1d(t)
    cols = [np.ones_like(t)]
    for k in range(1, order + 1):
        w = 2.0 * np.pi * k * t / period
        cols.append(np.cos(w))
        cols.append(np.sin(w))
    return np.column_stack(cols)


def fit_harmonics(t: Sequence[float], values: Sequence[float], order: int = 8,
                  period: float = 1.0) -> HarmonicFit:
    """Least-squares harmonic fit with the fundamental fixed at ``2 pi / period``."""
    t = np.asarray(t, dtype=np.float64)
    y = np.asarray(values, dtype=np.float64)
    if order < 1:
        raise ValueError("order must be at least 1")
    if y.size < 2 * order + 1:
        raise ValueError(f"need at least {2 * order + 1} points for order {order}")
    A = _harmonic_design(t, order, period)
    coef, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
    if rank < A.shape[1]:
        raise ValueError("harmonic design matrix is rank deficient")
    return HarmonicFit.from_coefficients(coef, period)


def decompose(daily: DailySeries, window: int = 7) -> DecompositionResult:
    """Trend by moving average, weekday profile of the detrended series,
    deseasonalized level and its first difference."""
    x = daily.prices
    dow = daily.days_of_week
    trend = moving_average(x, window)
    profile = weekday_profile(x - trend, dow)
    dx = deseasonalize(x, profile, dow)
    return DecompositionResult(
        trend=trend,
        seasonal_profile=profile,
        residual=difference(dx),
        deseasonalized=dx,
        days_of_week=dow,
        period=7,
    )
