"""Linear time-series models for the stationary residual: best linear
predictor, ARMA via Hannan-Rissanen, and Gaussian GARCH(1,1)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import solve_toeplitz
from scipy.optimize import minimize
from scipy.signal import lfilter
from scipy.stats import chi2

__all__ = [
    "LinearPredictor",
    "ArmaParams",
    "GarchParams",
    "GarchFit",
    "autocovariance",
    "fit_linear_predictor",
    "fit_arma",
    "arma_forecast",
    "arma_innovations",
    "order_select_aic",
    "best_order",
    "garch_loglik",
    "fit_garch",
    "garch_forecast",
]


@dataclass(frozen=True, eq=False)
class LinearPredictor:
    """``x_hat[n+h] = intercept + sum_i coefs[i] * x[n-i]`` (coefs[0] is the latest lag)."""

    intercept: float
    coefs: np.ndarray
    horizon: int
    mean: float

    def predict(self, recent: Sequence[float]) -> float:
        x = np.asarray(recent, dtype=np.float64)
        n = len(self.coefs)
        if x.size < n:
            raise ValueError(f"need {n} recent values")
        if n == 0:
            return self.intercept
        return float(self.intercept + self.coefs @ x[::-1][:n])

    def forecast(self, recent: Sequence[float], steps: int) -> np.ndarray:
        """Iterate a one-step predictor ``steps`` times."""
        if self.horizon != 1:
            raise ValueError("iterated forecasts require a one-step predictor")
        buf = list(np.asarray(recent, dtype=np.float64))
        out = np.empty(steps)
        for k in range(steps):
            out[k] = self.predict(buf)
            buf.append(out[k])
        return out


@dataclass(frozen=True, eq=False)
class ArmaParams:
    ar: np.ndarray
    ma: np.ndarray
    sigma2: float
    mean: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "ar", np.asarray(self.ar, dtype=np.float64))
        object.__setattr__(self, "ma", np.asarray(self.ma, dtype=np.float64))
        if not self.sigma2 > 0:
            raise ValueError("noise variance must be positive")

    @property
    def p(self) -> int:
        return len(self.ar)

    @property
    def q(self) -> int:
        return len(self.ma)

    def is_causal(self) -> bool:
        if self.p == 0:
            return True
        roots = np.roots(np.r_[-self.ar[::-1], 1.0])
        return bool(np.all(np.abs(roots) > 1.0))

    def to_dict(self) -> dict:
        return {"ar": self.ar.tolist(), "ma": self.ma.tolist(), "sigma2": self.sigma2, "mean": self.mean}


@dataclass(frozen=True)
class GarchParams:
    omega: float
    alpha: float
    beta: float
    mean: float

    def __post_init__(self) -> None:
        if not (self.omega > 0 and self.alpha >= 0 and self.beta >= 0 and self.alpha + self.beta < 1):
            raise ValueError("GARCH parameters violate omega>0, alpha,beta>=0, alpha+beta<1")

    @property
    def long_run_variance(self) -> float:
        return self.omega / (1.0 - self.alpha - self.beta)

    def to_dict(self) -> dict:
        return {"omega": self.omega, "alpha": self.alpha, "beta": self.beta, "mean": self.mean}


@dataclass(frozen=True)
class GarchFit:
    params: GarchParams
    loglik: float
    converged: bool
    sigma2_0: float
    heteroskedastic: bool = True
    lr_statistic: float = float("nan")
    starts: tuple = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return {
            "model": "garch",
            "params": self.params.to_dict(),
            "fit_diagnostics": {
                "loglik": self.loglik,
                "converged": self.converged,
                "heteroskedastic": self.heteroskedastic,
                "lr_statistic": self.lr_statistic,
            },
        }


# ---------------------------------------------------------------- predictors


def autocovariance(values: Sequence[float], max_lag: int) -> np.ndarray:
    """Biased sample autocovariance ``gamma(0..max_lag)`` (divisor n)."""
    x = np.asarray(values, dtype=np.float64)
    n = x.size
    if max_lag < 0 or max_lag >= n / 2:
        raise ValueError("max_lag must be below half the series length")
    xc = x - x.mean()
    return np.array([xc[: n - h] @ xc[h:] / n for h in range(max_lag + 1)])


def fit_linear_predictor(values: Sequence[float], n_lags: int, horizon: int = 1) -> LinearPredictor:
    """Best linear predictor from sample autocovariances.

    Solves ``Gamma a = gamma_h`` with ``Gamma[i, j] = gamma(|i - j|)`` and
    ``gamma_h[i] = gamma(h + i)``; the intercept restores the mean.
    """
    x = np.asarray(values, dtype=np.float64)
    mu = float(x.mean())
    if n_lags == 0:
        return LinearPredictor(mu, np.zeros(0), horizon, mu)
    if x.size < 10 * n_lags:
        raise ValueError("need at least 10 observations per lag")
    gamma = autocovariance(x, n_lags + horizon - 1)
    if gamma[0] <= 1e-12 * max(1.0, mu * mu):
        raise ValueError("autocovariance matrix is singular (constant input)")
    col = gamma[:n_lags]
    rhs = gamma[horizon : horizon + n_lags]
    try:
        a = solve_toeplitz(col, rhs)
    except np.linalg.LinAlgError:
        raise ValueError("autocovariance matrix is singular") from None
    if not np.all(np.isfinite(a)):
        raise ValueError("autocovariance matrix is singular")
    return LinearPredictor(mu * (1.0 - a.sum()), a, horizon, mu)


def _yule_walker(xc: np.ndarray, order: int) -> np.ndarray:
    n = xc.size
    gamma = np.array([xc[: n - h] @ xc[h:] / n for h in range(order + 1)])
    return solve_toeplitz(gamma[:order], gamma[1 : order + 1])


def _long_ar_order(n: int) -> int:
    return max(1, math.ceil(10 * math.log10(n)))


def _reflect_roots(ar: np.ndarray) -> np.ndarray:
    """Map AR roots inside the unit circle to their reciprocals."""
    if ar.size == 0:
        return ar
    poly = np.r_[1.0, -ar]  # 1 - phi_1 z - ... in increasing powers
    roots = np.roots(poly[::-1])
    if np.all(np.abs(roots) > 1.0):
        return ar
    fixed = np.where(np.abs(roots) <= 1.0, 1.0 / np.conj(roots) * (1 + 1e-9), roots)
    # rebuild monic-in-constant polynomial 1 - phi z - ...
    coeffs = np.real(np.poly(fixed))[::-1]  # increasing powers, constant first
    coeffs = coeffs / coeffs[0]
    return -coeffs[1:]


def _hr_design(x: np.ndarray, z: np.ndarray, p: int, q: int, t0: int) -> tuple[np.ndarray, np.ndarray]:
    n = x.size
    cols = [x[t0 - i : n - i] for i in range(1, p + 1)]
    cols += [z[t0 - j : n - j] for j in range(1, q + 1)]
    X = np.column_stack(cols) if cols else np.empty((n - t0, 0))
    return X, x[t0:]


def _hannan_rissanen(x: np.ndarray, p: int, q: int, t0: int | None = None):
    """Returns (ar, ma, residuals) from the second-stage regression on the
    centered series ``x``; rows start at ``t0``."""
    n = x.size
    m = _long_ar_order(n)
    if t0 is None:
        t0 = m + max(p, q)
    if q > 0:
        a = _yule_walker(x, m)
        z = np.zeros(n)
        z[m:] = x[m:] - np.column_stack([x[m - i : n - i] for i in range(1, m + 1)]) @ a
    else:
        z = np.zeros(n)
    X, y = _hr_design(x, z, p, q, t0)
    if X.shape[1] == 0:
        return np.zeros(0), np.zeros(0), y
    beta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < X.shape[1]:
        raise ValueError("Hannan-Rissanen regression is singular")
    return beta[:p], beta[p:], y - X @ beta


def fit_arma(values: Sequence[float], p: int, q: int) -> ArmaParams:
    """Hannan-Rissanen ARMA(p, q) estimate with causality enforced."""
    x = np.asarray(values, dtype=np.float64)
    if x.size < 50 + 10 * (p + q):
        raise ValueError(f"need at least {50 + 10 * (p + q)} observations")
    mu = float(x.mean())
    xc = x - mu
    if p == 0 and q == 0:
        var = float(xc @ xc / xc.size)
        if var <= 0:
            raise ValueError("series has zero variance")
        return ArmaParams(np.zeros(0), np.zeros(0), var, mu)
    ar, ma, resid = _hannan_rissanen(xc, p, q)
    sigma2 = float(resid @ resid / resid.size)
    if sigma2 <= 0:
        raise ValueError("zero residual variance")
    return ArmaParams(_reflect_roots(ar), ma, sigma2, mu)


def arma_innovations(params: ArmaParams, recent: Sequence[float]) -> np.ndarray:
    """Innovations implied by ``recent`` with pre-sample innovations set to 0."""
    x = np.asarray(recent, dtype=np.float64) - params.mean
    # z_t = x_t - sum phi_i x_{t-i} - sum theta_j z_{t-j}, with x before the window at 0
    b = np.r_[1.0, -params.ar]
    a = np.r_[1.0, params.ma]
    return lfilter(b, a, x)


def arma_forecast(params: ArmaParams, recent: Sequence[float], h: int,
                  innovations: Sequence[float] | None = None) -> np.ndarray:
    """Conditional-mean ``h``-step forecast with future innovations at zero.

    Past innovations come from ``innovations`` when supplied (aligned with
    ``recent``), otherwise they are reconstructed from ``recent``.
    """
    x = np.asarray(recent, dtype=np.float64)
    p, q = params.p, params.q
    if x.size < max(p, q, 1):
        raise ValueError("recent window shorter than the model order")
    z = arma_innovations(params, x) if innovations is None else np.asarray(innovations, dtype=np.float64)
    xs = list(x - params.mean)
    zs = list(z)
    out = np.empty(h)
    for k in range(h):
        val = 0.0
        for i in range(p):
            val += params.ar[i] * xs[-1 - i]
        for j in range(q):
            val += params.ma[j] * zs[-1 - j]
        xs.append(val)
        zs.append(0.0)
        out[k] = val + params.mean
    return out


def order_select_aic(values: Sequence[float], p_max: int = 3, q_max: int = 3) -> tuple[int, int]:
    """Grid search minimizing ``n ln(sigma2) + 2 (p + q + 1)``.

    All candidates are scored on the same sample (rows after the longest
    lag any candidate needs), so residual variances are comparable. Ties go
    to the smaller ``p + q``, then the smaller ``p``.
    """
    if p_max > 3 or q_max > 3:
        raise ValueError("orders above 3 are not supported")
    x = np.asarray(values, dtype=np.float64)
    xc = x - x.mean()
    n = x.size
    t0 = _long_ar_order(n) + max(p_max, q_max)
    aics = {}
    for p in range(p_max + 1):
        for q in range(q_max + 1):
            try:
                _, _, resid = _hannan_rissanen(xc, p, q, t0=t0)
            except (ValueError, np.linalg.LinAlgError):
                continue
            s2 = float(resid @ resid / resid.size)
            if s2 > 0:
                aics[(p, q)] = resid.size * math.log(s2) + 2 * (p + q + 1)
    if not aics:
        raise ValueError("no ARMA order could be fitted")
    return best_order(aics)


def best_order(aics: dict[tuple[int, int], float]) -> tuple[int, int]:
    """Minimum-AIC order; ties (to 1e-9) go to the smaller ``p + q``, then ``p``."""
    return min(aics, key=lambda pq: (round(aics[pq], 9), pq[0] + pq[1], pq[0]))


# ---------------------------------------------------------------------- GARCH


def _garch_sigma2(eps: np.ndarray, omega: float, alpha: float, beta: float, sigma2_0: float) -> np.ndarray:
    """Conditional variances; ``sigma2[0] = sigma2_0`` and
    ``sigma2[t] = omega + alpha eps[t-1]^2 + beta sigma2[t-1]``."""
    e2 = eps[:-1] ** 2
    # y[k] = sigma2[k+1];  y[k] - beta y[k-1] = omega + alpha e2[k]
    rest = lfilter([1.0], [1.0, -beta], omega + alpha * e2, zi=[beta * sigma2_0])[0]
    return np.concatenate(([sigma2_0], rest))


def garch_loglik(params: GarchParams, values: Sequence[float], sigma2_0: float | None = None) -> float:
    x = np.asarray(values, dtype=np.float64)
    eps = x - params.mean
    if sigma2_0 is None:
        sigma2_0 = float(np.var(x))
    s2 = _garch_sigma2(eps, params.omega, params.alpha, params.beta, sigma2_0)
    return float(-0.5 * np.sum(np.log(2 * np.pi * s2) + eps**2 / s2))


def _unpack(theta: np.ndarray) -> tuple[float, float, float, float]:
    mu, log_omega, a, b = theta
    m = max(a, b, 0.0)
    ea, eb, e0 = math.exp(a - m), math.exp(b - m), math.exp(-m)
    den = e0 + ea + eb
    return mu, math.exp(log_omega), ea / den, eb / den


def _pack(mu: float, omega: float, alpha: float, beta: float) -> np.ndarray:
    rest = 1.0 - alpha - beta
    return np.array([mu, math.log(omega), math.log(alpha / rest), math.log(beta / rest)])


GARCH_STARTS = ((0.05, 0.90), (0.10, 0.80), (0.15, 0.70), (0.05, 0.50), (0.02, 0.02))


def fit_garch(values: Sequence[float], max_restarts: int = 3,
              significance: float | None = 0.05) -> GarchFit:
    """Gaussian GARCH(1,1) MLE by Nelder-Mead on transformed parameters.

    The series is standardized before optimizing, so alpha and beta do not
    depend on the data scale and omega scales with its square. Each of the
    deterministic starts is polished by repeated simplex restarts until the
    objective stops improving.

    With ``alpha = 0`` the likelihood is flat along ``omega / (1 - beta)``
    equal to the initial variance, so on homoskedastic data the optimizer
    can wander to ``beta -> 1``. Unless ``significance`` is None, the fit is
    compared with the constant-variance model by a likelihood-ratio test
    (2 degrees of freedom) and the constant-variance parameters
    ``(omega = var, alpha = beta = 0)`` are returned when the GARCH terms
    are not significant.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.size < 500:
        raise ValueError("GARCH fit needs at least 500 observations")
    loc = float(x.mean())
    scale = float(x.std())
    if not scale > 0:
        raise ValueError("series has zero variance")
    z = (x - loc) / scale
    s0 = 1.0  # sample variance of z

    def nll(theta: np.ndarray) -> float:
        mu, omega, alpha, beta = _unpack(theta)
        if not (omega > 0 and alpha + beta < 1):
            return np.inf
        eps = z - mu
        s2 = _garch_sigma2(eps, omega, alpha, beta, s0)
        if not np.all(s2 > 0):
            return np.inf
        val = 0.5 * np.sum(np.log(2 * np.pi * s2) + eps**2 / s2)
        return float(val) if np.isfinite(val) else np.inf

    best_theta, best_val, converged = None, np.inf, False
    start_vals = []
    for alpha0, beta0 in GARCH_STARTS:
        theta = _pack(0.0, s0 * (1 - alpha0 - beta0), alpha0, beta0)
        start_vals.append(nll(theta))
        prev = np.inf
        ok = False
        for _ in range(max_restarts + 1):
            res = minimize(nll, theta, method="Nelder-Mead",
                           options={"xatol": 1e-9, "fatol": 1e-11, "maxiter": 4000, "maxfev": 8000})
            theta = res.x
            ok = bool(res.success)
            if prev - res.fun < 1e-9:
                break
            prev = res.fun
        if res.fun < best_val:
            best_theta, best_val, converged = theta, float(res.fun), ok

    if best_theta is None or not np.isfinite(best_val):
        raise RuntimeError("GARCH likelihood could not be evaluated at any start")
    mu, omega, alpha, beta = _unpack(best_theta)
    params = GarchParams(omega * scale**2, alpha, beta, loc + scale * mu)
    sigma2_0 = float(np.var(x))
    loglik = garch_loglik(params, x, sigma2_0)
    flat = GarchParams(sigma2_0, 0.0, 0.0, loc)
    flat_loglik = garch_loglik(flat, x, sigma2_0)
    lr = max(0.0, 2.0 * (loglik - flat_loglik))
    if significance is not None and lr < chi2.ppf(1.0 - significance, 2):
        return GarchFit(flat, flat_loglik, converged, sigma2_0, False, lr, tuple(start_vals))
    return GarchFit(params, loglik, converged, sigma2_0, True, lr, tuple(start_vals))


def garch_forecast(params: GarchParams, recent: Sequence[float], h: int,
                   last_sigma2: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Mean and conditional-variance forecasts for steps 1..h.

    ``last_sigma2`` is the conditional variance of the last observation;
    when omitted it is filtered from ``recent`` starting at its sample
    variance (or the long-run variance for a single value).
    """
    x = np.asarray(recent, dtype=np.float64)
    if x.size < 1:
        raise ValueError("need at least one recent value")
    eps = x - params.mean
    if last_sigma2 is None:
        s0 = float(np.var(x)) if x.size > 1 else params.long_run_variance
        last_sigma2 = float(_garch_sigma2(eps, params.omega, params.alpha, params.beta, s0)[-1])
    var = np.empty(h)
    var[0] = params.omega + params.alpha * eps[-1] ** 2 + params.beta * last_sigma2
    persistence = params.alpha + params.beta
    for k in range(1, h):
        var[k] = params.omega + persistence * var[k - 1]
    return np.full(h, params.mean), var
