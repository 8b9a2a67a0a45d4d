"""Synthetic hourly spot prices used as the bundled sample dataset.

The log price is the sum of

* a yearly cycle ``0.10 sin(2 pi t) + 0.15 cos(2 pi t)`` (t = year fraction),
* a weekday level (weekends about 15-25% cheaper),
* an intraday shape with morning and evening peaks, damped on weekends,
* a daily mean-reverting component with jumps (phi 0.85, sigma 0.06,
  jump probability 0.03, jump size N(0.35, 0.15^2)),
* small independent hourly noise,

around a base level of ``log(40)`` EUR/MWh. Regenerate with::

    python -m spotforecast.sample [out.csv] [--seed 2019] [--start 2013-01-01] [--days 730]
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from .series import HourlySeries, write_series_csv, day_of_week, year_fraction

SAMPLE_PATH = Path(__file__).with_name("data") / "sample_prices.csv"
SAMPLE_SEED = 2019
SAMPLE_OFFSET_MINUTES = 60

WEEKDAY_LOG_LEVEL = np.array([0.02, 0.04, 0.04, 0.03, 0.0, -0.16, -0.27])


def intraday_shape(hours: np.ndarray, weekend: np.ndarray) -> np.ndarray:
    morning = 0.18 * np.exp(-0.5 * ((hours - 9.0) / 2.0) ** 2)
    evening = 0.22 * np.exp(-0.5 * ((hours - 19.0) / 2.0) ** 2)
    night = -0.20 * np.exp(-0.5 * ((hours - 3.5) / 2.0) ** 2)
    return np.where(weekend, 0.5, 1.0) * (morning + evening) + night


def generate(start: str = "2013-01-01", n_days: int = 730, seed: int = SAMPLE_SEED,
             offset_minutes: int = SAMPLE_OFFSET_MINUTES) -> HourlySeries:
    rng = np.random.default_rng(seed)
    local = np.datetime64(start, "m") + np.timedelta64(60, "m") * np.arange(24 * n_days)
    utc = local - np.timedelta64(offset_minutes, "m")
    dates = local.astype("datetime64[D]")
    hours = ((local - dates).astype(np.int64) // 60).astype(float)
    dow = day_of_week(local)
    t = year_fraction(local)

    x = np.empty(n_days)
    prev = 0.0
    for d in range(n_days):
        jump = rng.random() < 0.03
        prev = 0.85 * prev + 0.06 * rng.standard_normal() + (jump * rng.normal(0.35, 0.15))
        x[d] = prev
    daily_x = np.repeat(x, 24)

    log_p = (
        np.log(40.0)
        + 0.10 * np.sin(2 * np.pi * t)
        + 0.15 * np.cos(2 * np.pi * t)
        + WEEKDAY_LOG_LEVEL[dow - 1]
        + intraday_shape(hours, dow >= 6)
        + daily_x
        + 0.03 * rng.standard_normal(t.size)
    )
    prices = np.round(np.exp(log_p), 2)
    return HourlySeries(utc, prices, offset_minutes)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description="Write the synthetic sample price CSV.")
    ap.add_argument("out", nargs="?", default=str(SAMPLE_PATH))
    ap.add_argument("--seed", type=int, default=SAMPLE_SEED)
    ap.add_argument("--start", default="2013-01-01")
    ap.add_argument("--days", type=int, default=730)
    args = ap.parse_args(argv)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_series_csv(generate(args.start, args.days, args.seed), args.out)


if __name__ == "__main__":
    main()
