"""Residual and stationarity diagnostics: ACF, PACF, Ljung-Box, ADF, QQ data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats


class UndefinedAcfError(ValueError):
    """Raised when the autocorrelation function is undefined (zero variance)."""


@dataclass(frozen=True)
class AcfResult:
    """Sample autocorrelations at lags 1..L with the +/- 2/sqrt(n) band."""

    lags: np.ndarray
    autocorrelations: np.ndarray
    band: float
    n: int

    def to_rows(self):
        return [(int(k), float(r), self.band) for k, r in zip(self.lags, self.autocorrelations)]


@dataclass(frozen=True)
class WhiteNoiseVerdict:
    """White-noise screen; ``passes`` depends only on the largest |ACF|."""

    max_abs_acf: float
    ljung_box_stat: float
    ljung_box_pvalue: float
    passes: bool
    threshold: float
    max_lag: int


@dataclass(frozen=True)
class DiagnosticsConfig:
    max_lag: int = 28
    acf_threshold: float = 0.10
    ljung_box_lag: int = 28


@dataclass(frozen=True)
class AdfResult:
    statistic: float
    critical_values: dict
    reject: dict
    lag_order: int
    trend: str
    n_obs: int


# Asymptotic Dickey-Fuller critical values (MacKinnon) for the t-statistic.
ADF_CRITICAL_VALUES = {
    "none": {0.01: -2.566, 0.05: -1.941, 0.10: -1.617},
    "constant": {0.01: -3.430, 0.05: -2.862, 0.10: -2.567},
    "constant_and_trend": {0.01: -3.958, 0.05: -3.410, 0.10: -3.127},
}


def _as_1d(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite values")
    return x


def acf(x, max_lag: int) -> AcfResult:
    """Sample autocorrelations with the n-denominator (biased) convention.

    Examples
    --------
    >>> round(float(acf([1, -1, 1, -1, 1, -1], 1).autocorrelations[0]), 4)
    -0.8333
    """
    x = _as_1d(x)
    n = x.size
    if not 1 <= max_lag < n:
        raise ValueError(f"need 1 <= max_lag < n, got max_lag={max_lag}, n={n}")
    xc = x - x.mean()
    denom = float(xc @ xc)
    if denom <= 0.0 or denom <= 1e-300:
        raise UndefinedAcfError("autocorrelation is undefined for a constant series")
    r = np.array([xc[:n - k] @ xc[k:] for k in range(1, max_lag + 1)]) / denom
    return AcfResult(np.arange(1, max_lag + 1), r, 2.0 / np.sqrt(n), n)


def durbin_levinson(rho) -> np.ndarray:
    """Partial autocorrelations from autocorrelations ``rho[0..L-1]`` at lags 1..L."""
    rho = np.asarray(rho, dtype=np.float64)
    L = rho.size
    out = np.empty(L)
    phi = np.zeros(0)
    v = 1.0
    for k in range(L):
        a = (rho[k] - phi @ rho[:k][::-1]) / v if k else rho[0]
        phi = np.concatenate([phi - a * phi[::-1], [a]])
        v *= 1.0 - a * a
        out[k] = a
        if v <= 0:
            out[k + 1:] = np.nan
            break
    return out


def pacf(x, max_lag: int) -> np.ndarray:
    """Sample partial autocorrelations at lags 1..L via Durbin-Levinson."""
    return durbin_levinson(acf(x, max_lag).autocorrelations)


def ljung_box(residuals, max_lag: int, fitted_params: int = 0):
    """Ljung-Box portmanteau statistic and chi-square p-value.

    Returns
    -------
    (float, float)
        ``Q`` and its p-value on ``max_lag - fitted_params`` degrees of freedom.
    """
    dof = max_lag - fitted_params
    if dof <= 0:
        raise ValueError(f"degrees of freedom {dof} must be positive (max_lag > fitted_params)")
    x = _as_1d(residuals)
    n = x.size
    r = acf(x, max_lag).autocorrelations
    q = float(n * (n + 2) * np.sum(r ** 2 / (n - np.arange(1, max_lag + 1))))
    return q, float(stats.chi2.sf(q, dof))


def adf_test(x, lag_order: int = 0, trend: str = "constant") -> AdfResult:
    """Augmented Dickey-Fuller t-test for a unit root.

    Regresses ``dx_t`` on ``x_{t-1}``, ``lag_order`` lagged differences and
    the deterministic terms, and compares the t-statistic on ``x_{t-1}``
    with asymptotic critical values.
    """
    if trend not in ADF_CRITICAL_VALUES:
        raise ValueError(f"trend must be one of {sorted(ADF_CRITICAL_VALUES)}")
    x = _as_1d(x)
    if lag_order < 0 or x.size <= lag_order + 10:
        raise ValueError(f"series of length {x.size} too short for lag order {lag_order}")
    dx = np.diff(x)
    rows = dx.size - lag_order
    yv = dx[lag_order:]
    cols = [x[lag_order:-1]]
    cols += [dx[lag_order - j:dx.size - j] for j in range(1, lag_order + 1)]
    if trend != "none":
        cols.append(np.ones(rows))
    if trend == "constant_and_trend":
        cols.append(np.arange(rows, dtype=np.float64))
    X = np.column_stack(cols)
    beta, _, rank, _ = np.linalg.lstsq(X, yv, rcond=None)
    if rank < X.shape[1]:
        raise np.linalg.LinAlgError("ADF regression is collinear")
    resid = yv - X @ beta
    s2 = resid @ resid / (rows - X.shape[1])
    cov = s2 * np.linalg.inv(X.T @ X)
    stat = float(beta[0] / np.sqrt(cov[0, 0]))
    crit = ADF_CRITICAL_VALUES[trend]
    return AdfResult(stat, dict(crit), {a: stat < c for a, c in crit.items()}, lag_order, trend, rows)


def qq_data(residuals) -> np.ndarray:
    """``(theoretical, sample)`` pairs at plotting positions ``(i - 0.5)/n``."""
    x = np.sort(_as_1d(residuals))
    if x.size < 3:
        raise ValueError("QQ data needs at least 3 values")
    n = x.size
    theo = stats.norm.ppf((np.arange(1, n + 1) - 0.5) / n)
    return np.column_stack([theo, x])


def white_noise_verdict(residuals, fitted_params: int = 0,
                        config: DiagnosticsConfig | None = None) -> WhiteNoiseVerdict:
    """Screen residuals by the largest absolute autocorrelation.

    The Ljung-Box result is reported alongside but does not gate the verdict.
    """
    config = config or DiagnosticsConfig()
    a = acf(residuals, config.max_lag)
    m = float(np.max(np.abs(a.autocorrelations)))
    lb_lag = config.ljung_box_lag
    if lb_lag > fitted_params:
        q, pv = ljung_box(residuals, lb_lag, fitted_params)
    else:
        q, pv = np.nan, np.nan
    return WhiteNoiseVerdict(m, q, pv, m < config.acf_threshold, config.acf_threshold, config.max_lag)
