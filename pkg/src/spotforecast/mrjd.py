"""Mean-reverting jump-diffusion model for log prices.

``log P_t = f(t) + X_t`` with the trigonometric seasonal

    f(t) = s1 sin(2 pi t) + s2 cos(2 pi t) + s3 sin(4 pi t) + s4 cos(4 pi t) + s5

(t in years) and a Bernoulli-jump AR(1) for the stochastic part:

    X_t = alpha dt + phi X_{t-1} + sigma xi                         w.p. 1 - lambda_dt
    X_t = alpha dt + phi X_{t-1} + sigma xi + mu_j + sigma_j xi_j   w.p. lambda_dt

``sigma`` is the per-step standard deviation, ``phi = 1 - kappa dt``.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter
from scipy.special import expit

from .series import ForecastResult

__all__ = [
    "SeasonalCoeffs",
    "MrjdParams",
    "MrjdFit",
    "SimulatedPaths",
    "seasonal_design",
    "fit_seasonality",
    "price_shift",
    "deseasonalize_log",
    "reseasonalize_log",
    "transition_density",
    "mrjd_loglik",
    "calibrate_mrjd",
    "simulate_mrjd",
    "mrjd_forecast",
]

_LOG_2PI = math.log(2.0 * math.pi)
MIN_PRICE = 0.01


@dataclass(frozen=True)
class SeasonalCoeffs:
    s1: float
    s2: float
    s3: float
    s4: float
    s5: float

    def as_array(self) -> np.ndarray:
        return np.array([self.s1, self.s2, self.s3, self.s4, self.s5])

    def __call__(self, t: np.ndarray | float) -> np.ndarray:
        return seasonal_design(t) @ self.as_array()


@dataclass(frozen=True)
class MrjdParams:
    alpha: float
    phi: float
    sigma: float
    mu_j: float
    sigma_j: float
    lambda_dt: float
    dt: float = 1.0 / 365.0

    def validate(self, strict: bool = True) -> None:
        """Check the constraint set; ``strict=False`` admits zero volatilities
        (degenerate, deterministic simulation)."""
        ok = self.phi < 1 and 0.0 <= self.lambda_dt <= 1.0 and self.dt > 0
        if strict:
            ok = ok and self.sigma > 0 and self.sigma_j > 0
        else:
            ok = ok and self.sigma >= 0 and self.sigma_j >= 0
        if not ok or not all(math.isfinite(v) for v in asdict(self).values()):
            raise ValueError(f"invalid MRJD parameters: {self}")

    @property
    def kappa(self) -> float:
        return (1.0 - self.phi) / self.dt

    def stationary_variance(self) -> float:
        """Variance of X for the jump-augmented AR(1) (requires |phi| < 1)."""
        lam = self.lambda_dt
        shock = self.sigma**2 + lam * (self.mu_j**2 + self.sigma_j**2) - (lam * self.mu_j) ** 2
        return shock / (1.0 - self.phi**2)


@dataclass(frozen=True)
class MrjdFit:
    params: MrjdParams
    loglik: float
    start_logliks: tuple
    degenerate: bool

    def to_dict(self, coeffs: SeasonalCoeffs | None = None, shift: float = 0.0) -> dict:
        p = self.params
        out = {}
        if coeffs is not None:
            out.update(asdict(coeffs))
        out.update(
            alpha=p.alpha, phi=p.phi, sigma=p.sigma, mu_j=p.mu_j, sigma_j=p.sigma_j,
            lambda_dt=p.lambda_dt, dt=p.dt, shift=shift, loglik=self.loglik,
            degenerate=self.degenerate,
        )
        return out


def params_to_json(fit: MrjdFit, coeffs: SeasonalCoeffs, shift: float) -> str:
    return json.dumps(fit.to_dict(coeffs, shift), indent=2)


def params_from_dict(d: dict) -> tuple[MrjdParams, SeasonalCoeffs, float]:
    coeffs = SeasonalCoeffs(*(float(d[k]) for k in ("s1", "s2", "s3", "s4", "s5")))
    params = MrjdParams(
        float(d["alpha"]), float(d["phi"]), float(d["sigma"]), float(d["mu_j"]),
        float(d["sigma_j"]), float(d["lambda_dt"]), float(d["dt"]),
    )
    return params, coeffs, float(d.get("shift", 0.0))


# ---------------------------------------------------------------- seasonality


def seasonal_design(t: np.ndarray | float) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    w = 2.0 * np.pi * t
    return np.column_stack([np.sin(w), np.cos(w), np.sin(2 * w), np.cos(2 * w), np.ones_like(t)])


def fit_seasonality(log_prices: Sequence[float], times: Sequence[float]) -> SeasonalCoeffs:
    """Least-squares fit of the five seasonal coefficients.

    ``times`` are in years (typically the fraction of the calendar year).
    """
    y = np.asarray(log_prices, dtype=np.float64)
    A = seasonal_design(times)
    if y.size < 5:
        raise ValueError("need at least 5 points")
    coef, _, rank, sv = np.linalg.lstsq(A, y, rcond=None)
    if rank < 5 or sv[-1] < 1e-10 * sv[0]:
        raise ValueError("seasonal design matrix is rank deficient")
    return SeasonalCoeffs(*map(float, coef))


def price_shift(prices: Sequence[float]) -> float:
    """Smallest additive shift that lifts every price to at least 0.01."""
    lo = float(np.min(prices))
    return max(0.0, MIN_PRICE - lo)


def deseasonalize_log(prices: Sequence[float], coeffs: SeasonalCoeffs, times: Sequence[float],
                      shift: float = 0.0) -> np.ndarray:
    p = np.asarray(prices, dtype=np.float64) + shift
    if np.any(p <= 0):
        raise ValueError("nonpositive price; configure a shift to take logarithms")
    return np.log(p) - coeffs(times)


def reseasonalize_log(x: np.ndarray, coeffs: SeasonalCoeffs, times: Sequence[float],
                      shift: float = 0.0) -> np.ndarray:
    return np.exp(np.asarray(x) + coeffs(times)) - shift


# ----------------------------------------------------------------- likelihood


def _log_normal_pdf(x: np.ndarray, mean: np.ndarray, var: float) -> np.ndarray:
    return -0.5 * (_LOG_2PI + math.log(var) + (x - mean) ** 2 / var)


def _log_terms(params: MrjdParams, x: np.ndarray) -> np.ndarray:
    cur, prev = x[1:], x[:-1]
    m = params.alpha * params.dt + params.phi * prev
    var = params.sigma**2
    lam = params.lambda_dt
    if lam <= 0.0:
        return _log_normal_pdf(cur, m, var)
    jump = _log_normal_pdf(cur, m + params.mu_j, var + params.sigma_j**2) + math.log(lam)
    if lam >= 1.0:
        return jump
    diffusion = _log_normal_pdf(cur, m, var) + math.log1p(-lam)
    return np.logaddexp(diffusion, jump)


def transition_density(params: MrjdParams, x: np.ndarray | float, x_prev: float) -> np.ndarray:
    """Mixture density f(X_t = x | X_{t-1} = x_prev)."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    stacked = np.column_stack([np.full_like(x, x_prev), x])
    return np.array([math.exp(_log_terms(params, row)[0]) for row in stacked])


def mrjd_loglik(params: MrjdParams, x: Sequence[float], per_term: bool = False) -> float | np.ndarray:
    """Sum over t of ``log f(X_t | X_{t-1})`` for the Bernoulli-jump mixture."""
    params.validate(strict=True)
    x = np.asarray(x, dtype=np.float64)
    if x.size < 2:
        raise ValueError("need at least two observations")
    terms = _log_terms(params, x)
    return terms if per_term else float(terms.sum())


# ---------------------------------------------------------------- calibration

_PHI_SCALE = 2.0


def _to_params(theta: np.ndarray, dt: float) -> MrjdParams:
    a, u_phi, u_s2, mu_j, u_sj2, u_lam = theta
    phi = _PHI_SCALE * float(expit(u_phi)) - 1.0
    return MrjdParams(
        alpha=float(a) / dt,
        phi=phi,
        sigma=math.sqrt(math.exp(u_s2)),
        mu_j=float(mu_j),
        sigma_j=math.sqrt(math.exp(u_sj2)),
        lambda_dt=float(expit(u_lam)),
        dt=dt,
    )


def _logit(p: float) -> float:
    return math.log(p / (1.0 - p))


def _to_theta(p: MrjdParams) -> np.ndarray:
    phi = min(max(p.phi, -0.999), 0.999)
    return np.array([
        p.alpha * p.dt,
        _logit((phi + 1.0) / _PHI_SCALE),
        math.log(p.sigma**2),
        p.mu_j,
        math.log(p.sigma_j**2),
        _logit(min(max(p.lambda_dt, 1e-4), 1 - 1e-4)),
    ])


def _moment_starts(x: np.ndarray, dt: float) -> list[MrjdParams]:
    """AR(1) regression for the diffusion part plus tail heuristics for jumps.

    Residuals beyond k robust standard deviations are treated as jumps for
    k in (2, 2.5, 3, 3.5, 4), giving five deterministic starting points.
    """
    prev, cur = x[:-1], x[1:]
    A = np.column_stack([np.ones_like(prev), prev])
    (c, phi), *_ = np.linalg.lstsq(A, cur, rcond=None)
    phi = float(np.clip(phi, -0.95, 0.995))
    resid = cur - c - phi * prev
    med = float(np.median(resid))
    robust_sd = 1.4826 * float(np.median(np.abs(resid - med)))
    sd = float(np.std(resid))
    if not robust_sd > 0:
        robust_sd = sd if sd > 0 else 1e-6
    starts = []
    for k in (2.0, 2.5, 3.0, 3.5, 4.0):
        tail = np.abs(resid - med) > k * robust_sd
        n_tail = int(tail.sum())
        lam = min(max(n_tail / resid.size, 0.005), 0.5)
        if n_tail >= 2:
            mu_j = float(np.mean(resid[tail]) - med)
            sigma_j = max(float(np.std(resid[tail])), 0.5 * robust_sd)
            body = resid[~tail]
            sigma = max(float(np.std(body)), 1e-6) if body.size > 2 else robust_sd
        else:
            mu_j, sigma_j, sigma = 0.0, 3.0 * robust_sd, robust_sd
        alpha_step = c - lam * mu_j
        starts.append(MrjdParams(alpha_step / dt, phi, sigma, mu_j, sigma_j, lam, dt))
    return starts


def calibrate_mrjd(x: Sequence[float], dt: float = 1.0 / 365.0, max_restarts: int = 2) -> MrjdFit:
    """Maximum-likelihood calibration of the stochastic parameters.

    The constraints ``phi < 1``, ``sigma^2 > 0``, ``sigma_j^2 > 0`` and
    ``0 <= lambda_dt <= 1`` are enforced by construction: phi through a
    shifted logistic onto (-1, 1), the variances through ``exp`` and the
    jump probability through a logistic. Nelder-Mead is run from five
    moment-based starts and the best point is returned.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.size < 100:
        raise ValueError("MRJD calibration needs at least 100 observations")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input")

    def nll(theta: np.ndarray) -> float:
        p = _to_params(theta, dt)
        if not (p.sigma > 0 and p.sigma_j > 0 and p.phi < 1):
            return np.inf
        val = -float(np.sum(_log_terms(p, x)))
        return val if np.isfinite(val) else np.inf

    span = float(np.ptp(x))
    if span == 0.0:
        # no information: report a flagged fit at a floor volatility
        p = MrjdParams(float(x[0]) * 0.0, 0.0, 1e-8, 0.0, 1e-8, 1e-4, dt)
        return MrjdFit(p, mrjd_loglik(p, x), (), True)

    starts = _moment_starts(x, dt)
    start_vals = []
    best_theta, best_val = None, np.inf
    for start in starts:
        theta = _to_theta(start)
        start_vals.append(-nll(theta))
        prev = np.inf
        for _ in range(max_restarts + 1):
            res = minimize(nll, theta, method="Nelder-Mead",
                           options={"xatol": 1e-8, "fatol": 1e-10, "maxiter": 6000, "maxfev": 12000})
            theta = res.x
            if prev - res.fun < 1e-8:
                break
            prev = res.fun
        if res.fun < best_val:
            best_theta, best_val = theta, float(res.fun)

    if best_theta is None:
        raise RuntimeError("MRJD likelihood could not be evaluated at any start")
    params = _to_params(best_theta, dt)
    loglik = -best_val
    finite_starts = [v for v in start_vals if np.isfinite(v)]
    degenerate = (not finite_starts) or loglik <= max(finite_starts) or params.sigma < 1e-6
    return MrjdFit(params, loglik, tuple(start_vals), bool(degenerate))


# ----------------------------------------------------------------- simulation


@dataclass(frozen=True, eq=False)
class SimulatedPaths:
    """Simulated prices, one row per path. ``x`` holds the stochastic part."""

    horizon: np.ndarray
    values: np.ndarray
    x: np.ndarray
    seed: int

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]


def _path_draws(seed: int, path: int, steps: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, path])))
    u = rng.random(steps)
    xi = rng.standard_normal(steps)
    xi_j = rng.standard_normal(steps)
    return u, xi, xi_j


def _simulate_block(params: MrjdParams, start_x: float, steps: int, seed: int,
                    paths: range) -> np.ndarray:
    out = np.empty((len(paths), steps))
    a = params.alpha * params.dt
    for row, path in enumerate(paths):
        u, xi, xi_j = _path_draws(seed, path, steps)
        jumps = u < params.lambda_dt
        shock = a + params.sigma * xi + jumps * (params.mu_j + params.sigma_j * xi_j)
        out[row] = lfilter([1.0], [1.0, -params.phi], shock, zi=[params.phi * start_x])[0]
    return out


def simulate_x(params: MrjdParams, start_x: float, steps: int, n_paths: int, seed: int,
               workers: int = 1) -> np.ndarray:
    """Paths of the stochastic part for ``steps`` steps after ``start_x``.

    Path ``i`` draws from its own stream seeded by ``(seed, i)``, so the
    output does not depend on ``workers``.
    """
    params.validate(strict=False)
    if n_paths < 1 or steps < 1:
        raise ValueError("need at least one path and one step")
    if workers <= 1:
        return _simulate_block(params, start_x, steps, seed, range(n_paths))
    chunks = np.array_split(np.arange(n_paths), workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        blocks = pool.map(
            lambda c: _simulate_block(params, start_x, steps, seed, range(int(c[0]), int(c[-1]) + 1))
            if c.size else np.empty((0, steps)),
            chunks,
        )
        return np.vstack(list(blocks))


def simulate_mrjd(params: MrjdParams, coeffs: SeasonalCoeffs, start_x: float, horizon: np.ndarray,
                  times: Sequence[float], n_paths: int, seed: int, shift: float = 0.0,
                  workers: int = 1) -> SimulatedPaths:
    """Monte Carlo price paths ``exp(f(t) + X_t) - shift`` over ``horizon``.

    ``times`` are the seasonal-function arguments (years) of each horizon
    step.
    """
    times = np.asarray(times, dtype=np.float64)
    x = simulate_x(params, start_x, times.size, n_paths, seed, workers)
    values = np.exp(x + coeffs(times)[None, :]) - shift
    return SimulatedPaths(np.asarray(horizon), values, x, seed)


def mrjd_forecast(paths: SimulatedPaths, quantiles: tuple[float, float] | None = (0.05, 0.95),
                  model_id: str = "mrjd") -> ForecastResult:
    """Pointwise median of the simulated paths with optional quantile bands."""
    if quantiles is not None:
        lo_q, hi_q = quantiles
        if not (0 < lo_q < 1 and 0 < hi_q < 1 and lo_q <= 0.5 <= hi_q):
            raise ValueError("quantiles must lie in (0, 1) and bracket the median")
        if paths.n_paths < 100:
            raise ValueError("quantile bands need at least 100 paths")
    median = np.median(paths.values, axis=0)
    lower = upper = None
    if quantiles is not None:
        lower, upper = np.quantile(paths.values, quantiles, axis=0)
        lower = np.minimum(lower, median)
        upper = np.maximum(upper, median)
    return ForecastResult(model_id, paths.horizon, median, lower, upper,
                          metadata={"n_paths": paths.n_paths, "seed": paths.seed})


def with_dt(params: MrjdParams, dt: float) -> MrjdParams:
    return replace(params, dt=dt)
