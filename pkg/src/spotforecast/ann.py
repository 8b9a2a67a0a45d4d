"""Feed-forward network forecaster: lag features, backpropagation and
full-batch training (momentum descent or Powell-Beale conjugate gradient)."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .series import ForecastResult, HourlySeries, day_of_week

__all__ = [
    "NetworkTopology",
    "NetworkWeights",
    "TrainConfig",
    "TrainTrace",
    "Standardizer",
    "FeatureSet",
    "AnnModel",
    "init_weights",
    "forward",
    "loss",
    "gradient",
    "loss_and_gradient",
    "train",
    "build_features",
    "fit_ann",
    "ann_forecast",
    "synthetic_load",
]

ACTIVATIONS = ("sigmoid", "linear")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True)
class NetworkTopology:
    layer_sizes: tuple[int, ...]
    activations: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "layer_sizes", tuple(int(n) for n in self.layer_sizes))
        object.__setattr__(self, "activations", tuple(self.activations))
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise ValueError("need an input and an output layer of positive size")
        if len(self.activations) != len(self.layer_sizes) - 1:
            raise ValueError("one activation per non-input layer")
        if any(a not in ACTIVATIONS for a in self.activations):
            raise ValueError(f"activations must be among {ACTIVATIONS}")
        if self.activations[-1] != "linear":
            raise ValueError("output layer must be linear")

    @classmethod
    def default(cls, n_inputs: int, hidden: Sequence[int] = (150, 20)) -> "NetworkTopology":
        sizes = (n_inputs, *hidden, 1)
        return cls(sizes, ("sigmoid",) * len(hidden) + ("linear",))

    @property
    def n_hidden(self) -> int:
        return len(self.layer_sizes) - 2


@dataclass(frozen=True, eq=False)
class NetworkWeights:
    """Per layer a weight matrix of shape ``(n_out, n_in)`` and a bias vector."""

    topology: NetworkTopology
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        sizes = self.topology.layer_sizes
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.shape != (sizes[i + 1], sizes[i]) or b.shape != (sizes[i + 1],):
                raise ValueError(f"layer {i} shapes do not match the topology")

    def flat(self) -> np.ndarray:
        return np.concatenate([np.concatenate([W.ravel(), b]) for W, b in zip(self.weights, self.biases)])

    def with_flat(self, theta: np.ndarray) -> "NetworkWeights":
        Ws, bs = [], []
        pos = 0
        for W, b in zip(self.weights, self.biases):
            Ws.append(theta[pos : pos + W.size].reshape(W.shape).copy())
            pos += W.size
            bs.append(theta[pos : pos + b.size].copy())
            pos += b.size
        return NetworkWeights(self.topology, tuple(Ws), tuple(bs))

    def equals(self, other: "NetworkWeights") -> bool:
        return self.topology == other.topology and np.array_equal(self.flat(), other.flat())

    def to_dict(self) -> dict:
        return {
            "layer_sizes": list(self.topology.layer_sizes),
            "activations": list(self.topology.activations),
            "weights": [W.tolist() for W in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkWeights":
        topo = NetworkTopology(tuple(d["layer_sizes"]), tuple(d["activations"]))
        return cls(
            topo,
            tuple(np.array(W, dtype=np.float64) for W in d["weights"]),
            tuple(np.array(b, dtype=np.float64) for b in d["biases"]),
        )


def init_weights(topology: NetworkTopology, seed: int) -> NetworkWeights:
    """Uniform initialization in ``+-1/sqrt(fan_in)``."""
    rng = np.random.default_rng(seed)
    Ws, bs = [], []
    for n_in, n_out in zip(topology.layer_sizes[:-1], topology.layer_sizes[1:]):
        r = 1.0 / np.sqrt(n_in)
        Ws.append(rng.uniform(-r, r, size=(n_out, n_in)))
        bs.append(rng.uniform(-r, r, size=n_out))
    return NetworkWeights(topology, tuple(Ws), tuple(bs))


def forward(weights: NetworkWeights, x: np.ndarray, return_cache: bool = False):
    """Propagate rows of ``x`` through the network.

    Returns outputs of shape ``(N, n_out)`` (or ``(n_out,)`` for a single
    1-d input), plus the list of layer activations when ``return_cache``.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    a = np.atleast_2d(x)
    if a.shape[1] != weights.topology.layer_sizes[0]:
        raise ValueError(f"input dimension {a.shape[1]} != {weights.topology.layer_sizes[0]}")
    cache = [a]
    for W, b, act in zip(weights.weights, weights.biases, weights.topology.activations):
        z = a @ W.T + b
        a = _sigmoid(z) if act == "sigmoid" else z
        cache.append(a)
    out = a[0] if single else a
    return (out, cache) if return_cache else out


def _as_targets(y: np.ndarray, n_rows: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    return y.reshape(n_rows, -1)


def loss(weights: NetworkWeights, x: np.ndarray, y: np.ndarray) -> float:
    """``(1 / 2N) sum_n ||f(x_n) - y_n||^2``."""
    out = forward(weights, np.atleast_2d(x))
    diff = out - _as_targets(y, out.shape[0])
    return float(0.5 * np.sum(diff**2) / out.shape[0])


def gradient(weights: NetworkWeights, x: np.ndarray, y: np.ndarray) -> NetworkWeights:
    """Reverse-mode gradient of :func:`loss`, returned in the shape of the weights."""
    return loss_and_gradient(weights, x, y)[1]


def loss_and_gradient(weights: NetworkWeights, x: np.ndarray, y: np.ndarray) -> tuple[float, NetworkWeights]:
    out, cache = forward(weights, np.atleast_2d(x), return_cache=True)
    n = out.shape[0]
    diff = out - _as_targets(y, n)
    value = float(0.5 * np.sum(diff**2) / n)
    delta = diff / n
    gWs: list[np.ndarray] = []
    gbs: list[np.ndarray] = []
    acts = weights.topology.activations
    for i in range(len(weights.weights) - 1, -1, -1):
        if acts[i] == "sigmoid":
            a = cache[i + 1]
            delta = delta * a * (1.0 - a)
        gWs.append(delta.T @ cache[i])
        gbs.append(delta.sum(axis=0))
        if i > 0:
            delta = delta @ weights.weights[i]
    return value, NetworkWeights(weights.topology, tuple(reversed(gWs)), tuple(reversed(gbs)))


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 2000
    learning_rate: float = 0.1
    momentum: float = 0.9
    conjugate: bool = False
    restart_threshold: float = 0.2
    seed: int = 0
    validation_fraction: float = 0.0
    patience: int = 200

    def __post_init__(self) -> None:
        if not self.learning_rate > 0:
            raise ValueError("learning rate must be positive")
        if not 0.0 <= self.validation_fraction <= 0.5:
            raise ValueError("validation fraction must lie in [0, 0.5]")


@dataclass
class TrainTrace:
    train_loss: list[float] = field(default_factory=list)
    validation_loss: list[float] = field(default_factory=list)
    restarts: int = 0
    best_epoch: int = 0
    stopped_early: bool = False
    diverged: bool = False


def train(x: np.ndarray, y: np.ndarray, topology: NetworkTopology,
          config: TrainConfig | None = None) -> tuple[NetworkWeights, TrainTrace]:
    """Full-batch training; returns the weights with the best monitored loss.

    The monitored loss is the validation loss when ``validation_fraction``
    is positive (the last rows are held out), otherwise the training loss.
    """
    config = config or TrainConfig()
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = _as_targets(y, x.shape[0])
    if x.shape[0] < 10 and config.validation_fraction > 0:
        raise ValueError("need at least 10 rows to hold out a validation set")
    n_val = int(round(config.validation_fraction * x.shape[0]))
    if n_val:
        xt, yt, xv, yv = x[:-n_val], y[:-n_val], x[-n_val:], y[-n_val:]
    else:
        xt, yt, xv, yv = x, y, None, None

    weights = init_weights(topology, config.seed)
    theta = weights.flat()
    trace = TrainTrace()

    # overflow is detected through non-finite values below
    def f(th: np.ndarray) -> float:
        with np.errstate(over="ignore", invalid="ignore"):
            return loss(weights.with_flat(th), xt, yt)

    def value_and_grad(th: np.ndarray) -> tuple[float, np.ndarray]:
        with np.errstate(over="ignore", invalid="ignore"):
            value, grad = loss_and_gradient(weights.with_flat(th), xt, yt)
        return value, grad.flat()

    def monitor(th: np.ndarray, train_val: float) -> float:
        if xv is None:
            return train_val
        v = loss(weights.with_flat(th), xv, yv)
        trace.validation_loss.append(v)
        return v

    best_theta, best_val, since_best = theta.copy(), np.inf, 0
    velocity = np.zeros_like(theta)
    direction = np.zeros_like(theta)
    step = config.learning_rate
    prev_grad = None
    for epoch in range(config.max_epochs + 1):
        cur, grad = value_and_grad(theta)
        if not (np.isfinite(cur) and np.all(np.isfinite(grad))):
            trace.diverged = True
            break
        trace.train_loss.append(cur)
        val = monitor(theta, cur)
        if val < best_val:
            best_theta, best_val, since_best = theta.copy(), val, 0
            trace.best_epoch = epoch
        else:
            since_best += 1
            if xv is not None and since_best >= config.patience:
                trace.stopped_early = True
                break
        if epoch == config.max_epochs:
            break

        if config.conjugate:
            gg = float(grad @ grad)
            if gg == 0.0:
                break
            if prev_grad is None or abs(float(grad @ prev_grad)) >= config.restart_threshold * gg:
                # Powell-Beale restart: successive gradients far from orthogonal
                direction = -grad
                trace.restarts += prev_grad is not None
            else:
                beta = max(0.0, float(grad @ (grad - prev_grad)) / float(prev_grad @ prev_grad))
                direction = -grad + beta * direction
            slope = float(grad @ direction)
            if slope >= 0:
                direction, slope = -grad, -gg
                trace.restarts += 1
            step = _backtrack(f, theta, cur, direction, slope, 2.0 * step)
            if step == 0.0:
                break
            theta = theta + step * direction
        else:
            velocity = config.momentum * velocity - config.learning_rate * grad
            theta = theta + velocity
        prev_grad = grad
    return weights.with_flat(best_theta), trace


def _backtrack(f, theta: np.ndarray, f0: float, direction: np.ndarray, slope: float,
               step: float, c: float = 1e-4, shrink: float = 0.5, max_iter: int = 40) -> float:
    """Armijo backtracking; returns 0 when no acceptable step is found."""
    for _ in range(max_iter):
        val = f(theta + step * direction)
        if np.isfinite(val) and val <= f0 + c * step * slope:
            return step
        step *= shrink
    return 0.0


# ------------------------------------------------------------------ features


@dataclass(frozen=True, eq=False)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "Standardizer":
        x = np.asarray(x, dtype=np.float64)
        return cls(x.mean(axis=0), x.std(axis=0))

    def _safe_std(self) -> np.ndarray:
        return np.where(self.std > 0, self.std, 1.0)

    def transform(self, x: np.ndarray) -> np.ndarray:
        z = (np.asarray(x, dtype=np.float64) - self.mean) / self._safe_std()
        return np.where(self.std > 0, z, 0.0)

    def inverse(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=np.float64) * self._safe_std() + self.mean

    def to_dict(self) -> dict:
        return {"mean": np.atleast_1d(self.mean).tolist(), "std": np.atleast_1d(self.std).tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(np.array(d["mean"], dtype=np.float64), np.array(d["std"], dtype=np.float64))


@dataclass(frozen=True, eq=False)
class FeatureSet:
    """Unstandardized feature matrix, one row per (day, hour)."""

    x: np.ndarray
    y: np.ndarray
    times: np.ndarray
    dropped: int
    names: tuple[str, ...]


def _feature_names(profile_len: int, with_load: bool) -> tuple[str, ...]:
    names = [f"{lag}_{h}" for lag in ("prev_day", "prev_week", "prev_2week") for h in range(profile_len)]
    names += [f"dow_{k}" for k in range(1, 8)] + ["hour"]
    if with_load:
        names += ["load", "load_delta"]
    return tuple(names)


def _feature_block(grid: np.ndarray, d: int, dow: int, load_day: np.ndarray | None,
                   load_prev: float | None) -> np.ndarray:
    """24 feature rows for day index ``d`` of a ``(days, 24)`` price grid."""
    lags = np.concatenate([grid[d - 1], grid[d - 7], grid[d - 14]])
    rows = np.empty((24, lags.size + 8 + (2 if load_day is not None else 0)))
    rows[:, : lags.size] = lags
    onehot = np.zeros(7)
    onehot[dow - 1] = 1.0
    rows[:, lags.size : lags.size + 7] = onehot
    rows[:, lags.size + 7] = np.arange(24) / 23.0
    if load_day is not None:
        prev = np.concatenate(([load_prev], load_day[:-1]))
        rows[:, -2] = load_day
        rows[:, -1] = load_day - prev
    return rows


def _grid(series: HourlySeries) -> tuple[np.ndarray, np.ndarray]:
    lt = series.local_times
    first = lt[0] - lt[0].astype("datetime64[D]")
    if first != np.timedelta64(0, "m") or len(series) % 24:
        raise ValueError("series must start and end on local day boundaries")
    return series.prices.reshape(-1, 24), lt[::24].astype("datetime64[D]")


def _load_grid(load: HourlySeries | None, dates: np.ndarray, n_days: int) -> np.ndarray | None:
    if load is None:
        return None
    grid, ldates = _grid(load)
    k = int((dates[0] - ldates[0]).astype(np.int64))
    if k < 0 or k + n_days > grid.shape[0]:
        raise ValueError("load series does not cover the required days")
    return grid[k : k + n_days]


def build_features(history: HourlySeries, load: HourlySeries | None = None,
                   start_day: int = 14, end_day: int | None = None) -> FeatureSet:
    """Lag features for target days ``start_day .. end_day - 1`` (day indices
    into ``history``). Days without all three lags are dropped."""
    grid, dates = _grid(history)
    n_days = grid.shape[0]
    end_day = n_days if end_day is None else end_day
    lg = _load_grid(load, dates, n_days)
    dows = day_of_week(dates)
    blocks, times = [], []
    dropped = 0
    for d in range(max(start_day, 0), end_day):
        if d < 14:
            dropped += 24
            continue
        load_prev = None if lg is None else (lg[d - 1, -1])
        blocks.append(_feature_block(grid, d, int(dows[d]), None if lg is None else lg[d], load_prev))
        times.append(history.times[d * 24 : (d + 1) * 24])
    if not blocks:
        raise ValueError("no feature rows: history too short for the 14-day lag")
    x = np.vstack(blocks)
    y = np.concatenate([grid[d] for d in range(max(start_day, 14), end_day)])
    return FeatureSet(x, y, np.concatenate(times), dropped, _feature_names(24, lg is not None))


@dataclass(frozen=True, eq=False)
class AnnModel:
    weights: NetworkWeights
    x_scaler: Standardizer
    y_scaler: Standardizer
    config: TrainConfig
    uses_load: bool

    def predict(self, x_raw: np.ndarray) -> np.ndarray:
        z = forward(self.weights, self.x_scaler.transform(np.atleast_2d(x_raw)))
        return self.y_scaler.inverse(z[:, 0])

    def to_dict(self) -> dict:
        return {
            "topology": {
                "layer_sizes": list(self.weights.topology.layer_sizes),
                "activations": list(self.weights.topology.activations),
            },
            "weights": [W.tolist() for W in self.weights.weights],
            "biases": [b.tolist() for b in self.weights.biases],
            "x_standardization": self.x_scaler.to_dict(),
            "y_standardization": self.y_scaler.to_dict(),
            "train_config": asdict(self.config),
            "uses_load": self.uses_load,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def from_dict(cls, d: dict) -> "AnnModel":
        weights = NetworkWeights.from_dict({
            "layer_sizes": d["topology"]["layer_sizes"],
            "activations": d["topology"]["activations"],
            "weights": d["weights"],
            "biases": d["biases"],
        })
        return cls(
            weights,
            Standardizer.from_dict(d["x_standardization"]),
            Standardizer.from_dict(d["y_standardization"]),
            TrainConfig(**d["train_config"]),
            bool(d["uses_load"]),
        )

    @classmethod
    def load(cls, path: str | Path) -> "AnnModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def fit_ann(history: HourlySeries, load: HourlySeries | None = None,
            hidden: Sequence[int] = (150, 20), config: TrainConfig | None = None,
            max_train_days: int | None = None) -> tuple[AnnModel, TrainTrace]:
    """Build features from ``history``, standardize on those rows and train."""
    if not hidden:
        raise ValueError("the forecaster needs at least one hidden layer")
    config = config or TrainConfig()
    n_days = len(history) // 24
    start = 14 if max_train_days is None else max(14, n_days - max_train_days)
    feats = build_features(history, load, start_day=start)
    x_scaler = Standardizer.fit(feats.x)
    y_scaler = Standardizer.fit(feats.y)
    topology = NetworkTopology.default(feats.x.shape[1], hidden)
    weights, trace = train(x_scaler.transform(feats.x), y_scaler.transform(feats.y), topology, config)
    return AnnModel(weights, x_scaler, y_scaler, config, load is not None), trace


def ann_forecast(model: AnnModel, history: HourlySeries, horizon_days: int,
                 load: HourlySeries | None = None) -> ForecastResult:
    """Day-by-day recursive forecast; forecast days feed later lag features.

    ``load`` must cover the history and the forecast days when the model
    was trained with load features.
    """
    if model.uses_load and load is None:
        raise ValueError("model was trained with load features; pass a load series")
    grid, dates = _grid(history)
    n_hist = grid.shape[0]
    if n_hist < 14:
        raise ValueError("need at least 14 days of history for the lag features")
    ext = np.vstack([grid, np.empty((horizon_days, 24))])
    lg = _load_grid(load, dates, n_hist + horizon_days) if model.uses_load else None
    all_dates = dates[0] + np.arange(n_hist + horizon_days).astype("timedelta64[D]")
    dows = day_of_week(all_dates)
    for k in range(horizon_days):
        d = n_hist + k
        rows = _feature_block(ext, d, int(dows[d]), None if lg is None else lg[d],
                              None if lg is None else lg[d - 1, -1])
        ext[d] = model.predict(rows)
    return ForecastResult(
        "ann",
        history.future_times(24 * horizon_days),
        ext[n_hist:].ravel(),
        metadata={"recursive": horizon_days > 1},
    )


def synthetic_load(series: HourlySeries, seed: int = 0, extra_hours: int = 0) -> HourlySeries:
    """Weekday-modulated daily sinusoid plus noise, on the grid of ``series``
    extended by ``extra_hours``; used only to exercise the load inputs."""
    times = np.concatenate([series.times, series.future_times(extra_hours)]) if extra_hours else series.times
    probe = HourlySeries(times, np.zeros(times.size), series.utc_offset_minutes)
    hours = probe.hours
    dow = probe.days_of_week
    rng = np.random.default_rng(seed)
    weekday_level = np.where(dow >= 6, 0.8, 1.0)
    load = weekday_level * (50.0 + 10.0 * np.sin(2 * np.pi * (hours - 6) / 24.0)) + rng.normal(0, 1.0, times.size)
    return probe.with_prices(load)
