"""Static SVG figures for backtests, decompositions and simulations.

Output is byte-stable across runs: a fixed SVG hash salt, no date
metadata and glyphs rendered as paths.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "svg.hashsalt": "spotforecast",
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 7,
    "ytick.labelsize": 7,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.0,
}

COLORS = {
    "actual": "black",
    "naive": "tab:blue",
    "fourier": "tab:orange",
    "linear": "tab:brown",
    "arma": "tab:pink",
    "garch": "tab:green",
    "mrjd": "tab:red",
    "ann": "tab:purple",
    "hybrid": "tab:cyan",
}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _dates(times: np.ndarray, offset_minutes: int) -> np.ndarray:
    return (np.asarray(times, dtype="datetime64[m]") + np.timedelta64(offset_minutes, "m")).astype("datetime64[s]")


def plot_forecasts(actual_times, actual_values, forecasts: Mapping[str, tuple], path: str | Path,
                   offset_minutes: int = 0, title: str = "Forecasts vs actual prices") -> Path:
    """Overlay actual prices and every model's forecast.

    ``forecasts`` maps a label to ``(times, values)``.
    """
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(9, 4))
        ax.plot(_dates(actual_times, offset_minutes), actual_values, color=COLORS["actual"],
                lw=1.4, label="actual")
        for label in sorted(forecasts):
            t, v = forecasts[label]
            ax.plot(_dates(t, offset_minutes), v, color=COLORS.get(label.split("(")[0]),
                    lw=1.6 if label.startswith("hybrid") else 0.9, label=label)
        ax.set_ylabel("price [EUR/MWh]")
        ax.set_title(title)
        ax.legend(loc="upper left", ncol=4, frameon=False)
        fig.autofmt_xdate()
        fig.tight_layout()
        return _save(fig, path)


def plot_rmse_bars(rmse: Mapping[str, float], path: str | Path, title: str = "RMSE by model") -> Path:
    labels = sorted(rmse, key=lambda k: (rmse[k], k))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6, 3.5))
        ax.bar(labels, [rmse[k] for k in labels],
               color=[COLORS.get(k, "tab:gray") for k in labels])
        ax.set_ylabel("RMSE [EUR/MWh]")
        ax.set_title(title)
        ax.tick_params(axis="x", rotation=30)
        fig.tight_layout()
        return _save(fig, path)


def plot_decomposition(values, trend, seasonal, residual, path: str | Path) -> Path:
    n = len(values)
    t = np.arange(n)
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(4, 1, figsize=(8, 7), sharex=True)
        axes[0].plot(t, values, color="black")
        axes[0].set_ylabel("daily mean")
        axes[1].plot(t, trend, color="tab:blue")
        axes[1].set_ylabel("trend")
        axes[2].plot(t, seasonal, color="tab:orange")
        axes[2].set_ylabel("weekday")
        axes[3].plot(t[1:], residual, color="tab:green")
        axes[3].set_ylabel("residual")
        axes[3].set_xlabel("day")
        fig.tight_layout()
        return _save(fig, path)


def plot_fan(times, paths: np.ndarray, path: str | Path, offset_minutes: int = 0,
             quantiles=(0.05, 0.25, 0.5, 0.75, 0.95), title: str = "Simulated price paths") -> Path:
    d = _dates(times, offset_minutes)
    qs = np.quantile(paths, quantiles, axis=0)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(8, 3.5))
        for i in range(len(quantiles) // 2):
            ax.fill_between(d, qs[i], qs[-1 - i], color="tab:red", alpha=0.15 + 0.15 * i, lw=0)
        ax.plot(d, qs[len(quantiles) // 2], color="tab:red", label="median")
        ax.set_ylabel("price [EUR/MWh]")
        ax.set_title(title)
        ax.legend(loc="upper left", frameon=False)
        fig.autofmt_xdate()
        fig.tight_layout()
        return _save(fig, path)
