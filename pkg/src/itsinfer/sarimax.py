"""Seasonal ARIMA models with intervention regressors, fitted by conditional least squares.

The mean function ``m_t = omega_0 + sum_j omega_j x_jt`` is subtracted from
the response, the remainder is differenced by ``(1-B)^d (1-B^k)^D``, and the
differenced noise ``w_t`` is whitened by the ARMA recursion

    phi(B) Phi(B^k) w_t = theta(B) Theta(B^k) a_t

with pre-sample ``w`` set to the mean of ``w`` and pre-sample ``a`` set to
zero. The objective is the sum of squared conditional innovations ``a_t``.
"""

from __future__ import annotations

import datetime as dt
import logging
import re
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .series import TimeSeries, SeriesLengthError, difference_array

logger = logging.getLogger(__name__)

INTERCEPT = "const"


@dataclass(frozen=True)
class SarimaOrder:
    """ARIMA(p,d,q) x (P,D,Q)_k structure."""

    p: int = 0
    d: int = 0
    q: int = 0
    P: int = 0
    D: int = 0
    Q: int = 0
    k: int = 7
    max_order: int = field(default=3, compare=False, repr=False)

    def __post_init__(self):
        for name in ("p", "d", "q", "P", "D", "Q"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"order {name} must be a nonnegative integer, got {v}")
            if v > self.max_order:
                raise ValueError(f"order {name}={v} exceeds the maximum {self.max_order}")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError("seasonal lag k must be a positive integer")
        if (self.P or self.D or self.Q) and self.k < 2:
            raise ValueError("seasonal terms need a seasonal lag k >= 2")

    @property
    def n_arma(self) -> int:
        return self.p + self.q + self.P + self.Q

    @property
    def span(self) -> int:
        """Observations consumed by differencing."""
        return self.d + self.D * self.k

    @property
    def intercept_identified(self) -> bool:
        return self.d == 0 and self.D == 0

    def arma_names(self) -> list[str]:
        return ([f"ar.L{i}" for i in range(1, self.p + 1)]
                + [f"ma.L{i}" for i in range(1, self.q + 1)]
                + [f"ar.S.L{i * self.k}" for i in range(1, self.P + 1)]
                + [f"ma.S.L{i * self.k}" for i in range(1, self.Q + 1)])

    @property
    def label(self) -> str:
        return f"({self.p},{self.d},{self.q})x({self.P},{self.D},{self.Q})_{self.k}"

    def __str__(self):
        return self.label

    @classmethod
    def parse(cls, text: str, max_order: int = 3) -> "SarimaOrder":
        """Parse ``"(p,d,q)x(P,D,Q)_k"`` or ``"p,d,q"``."""
        m = re.fullmatch(r"\s*\(?(\d+),(\d+),(\d+)\)?\s*(?:x\s*\((\d+),(\d+),(\d+)\)_?(\d+))?\s*",
                         text.replace(" ", ""))
        if not m:
            raise ValueError(f"cannot parse model order {text!r}")
        g = [int(x) if x is not None else None for x in m.groups()]
        if g[3] is None:
            return cls(g[0], g[1], g[2], max_order=max_order)
        return cls(*g, max_order=max_order)


@dataclass(frozen=True)
class InterventionSpec:
    """A step or pulse input.

    A step is 0 before ``onset_date`` and 1 from it onward (until
    ``end_date``, exclusive, when given). A pulse is 1 at the onset only.
    ``expected_sign`` is documentation only.
    """

    name: str
    kind: str
    onset_date: dt.date
    expected_sign: int | None = None
    end_date: dt.date | None = None

    def __post_init__(self):
        if self.kind not in ("step", "pulse"):
            raise ValueError(f"intervention kind must be 'step' or 'pulse', got {self.kind!r}")
        if self.expected_sign not in (None, 1, -1):
            raise ValueError("expected_sign must be +1, -1 or None")
        if self.end_date is not None and self.kind != "step":
            raise ValueError("only steps take an end date")
        if self.end_date is not None and self.end_date <= self.onset_date:
            raise ValueError("end_date must come after onset_date")

    def encode(self, series: TimeSeries) -> np.ndarray:
        x = np.zeros(len(series))
        i = series.index_of(self.onset_date)
        if self.kind == "pulse":
            x[i] = 1.0
            return x
        x[i:] = 1.0
        if self.end_date is not None and self.end_date <= series.end_date:
            x[series.index_of(self.end_date):] = 0.0
        return x


@dataclass(frozen=True)
class CalendarCovariate:
    """Indicator equal to 1 on the given weekdays (Monday=0) or holiday dates."""

    name: str
    weekdays: tuple = (6,)
    holidays: frozenset = frozenset()

    def encode(self, series: TimeSeries) -> np.ndarray:
        start = series.start_date
        wd = (start.weekday() + np.arange(len(series))) % 7
        x = np.isin(wd, list(self.weekdays)).astype(np.float64)
        for h in self.holidays:
            i = (h - start).days
            if 0 <= i < len(series):
                x[i] = 1.0
        return x


@dataclass(frozen=True)
class RegressorMatrix:
    """Named regressor columns aligned with a series; ``values`` is (n, J)."""

    names: tuple
    values: np.ndarray

    def __post_init__(self):
        names = tuple(self.names)
        v = np.array(self.values, dtype=np.float64)
        if v.ndim == 1:
            v = v[:, None]
        if v.size == 0:
            v = v.reshape(v.shape[0] if v.ndim == 2 else 0, 0)
        if v.shape[1] != len(names):
            raise ValueError("one name per regressor column is required")
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate regressor names in {names}")
        if INTERCEPT in names:
            raise ValueError(f"{INTERCEPT!r} is reserved for the intercept")
        v.setflags(write=False)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "values", v)

    @classmethod
    def empty(cls, n: int) -> "RegressorMatrix":
        return cls((), np.zeros((n, 0)))

    def __len__(self):
        return self.values.shape[0]

    @property
    def n_columns(self) -> int:
        return len(self.names)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]

    def reorder(self, names: Sequence[str]) -> "RegressorMatrix":
        idx = [self.names.index(n) for n in names]
        return RegressorMatrix(tuple(names), self.values[:, idx])


def build_regressors(series: TimeSeries, interventions: Iterable[InterventionSpec] = (),
                     covariates: Iterable = ()) -> RegressorMatrix:
    """Encode interventions and covariates as named columns.

    Covariates are :class:`CalendarCovariate` instances or ``(name, values)``
    pairs. Raises ``IndexError`` for dates outside the series span and
    ``ValueError`` for duplicate names.
    """
    names, cols = [], []
    for spec in interventions:
        names.append(spec.name)
        cols.append(spec.encode(series))
    for cov in covariates:
        if isinstance(cov, CalendarCovariate):
            names.append(cov.name)
            cols.append(cov.encode(series))
        else:
            name, vals = cov
            vals = np.asarray(vals, dtype=np.float64)
            if vals.shape != (len(series),):
                raise ValueError(f"covariate {name!r} has length {vals.size}, expected {len(series)}")
            names.append(name)
            cols.append(vals)
    if len(set(names)) != len(names):
        dup = sorted({n for n in names if names.count(n) > 1})
        raise ValueError(f"duplicate regressor names: {dup}")
    for name, col in zip(names, cols):
        if np.ptp(col) == 0:
            warnings.warn(f"regressor {name!r} is constant and is absorbed by the "
                          "intercept or annihilated by differencing", stacklevel=2)
    values = np.column_stack(cols) if cols else np.zeros((len(series), 0))
    return RegressorMatrix(tuple(names), values)


@dataclass(frozen=True)
class SarimaParams:
    """Coefficient values; ``omega[0]`` is the intercept."""

    omega: np.ndarray
    phi: tuple = ()
    theta: tuple = ()
    seasonal_phi: tuple = ()
    seasonal_theta: tuple = ()
    sigma2: float = 1.0

    def __post_init__(self):
        omega = np.atleast_1d(np.array(self.omega, dtype=np.float64))
        omega.setflags(write=False)
        object.__setattr__(self, "omega", omega)
        for name in ("phi", "theta", "seasonal_phi", "seasonal_theta"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))

    def arma_vector(self) -> np.ndarray:
        return np.array(self.phi + self.theta + self.seasonal_phi + self.seasonal_theta,
                        dtype=np.float64)

    @property
    def stationary(self) -> bool:
        return (kernels.is_stable(np.array(self.phi))
                and kernels.is_stable(np.array(self.seasonal_phi)))

    @property
    def invertible(self) -> bool:
        return (kernels.is_stable(np.array(self.theta))
                and kernels.is_stable(np.array(self.seasonal_theta)))

    @classmethod
    def from_vector(cls, order: SarimaOrder, arma, omega, sigma2=1.0) -> "SarimaParams":
        arma = np.asarray(arma, dtype=np.float64)
        p, q, P = order.p, order.q, order.P
        return cls(omega, arma[:p], arma[p:p + q], arma[p + q:p + q + P],
                   arma[p + q + P:], sigma2)


@dataclass(frozen=True)
class FitConfig:
    """Optimizer and standard-error settings."""

    max_iterations: int = 500
    tolerance: float = 1e-10
    finite_difference_step: float = 1e-5
    parameter_max_order: int = 3
    min_obs_per_param: int = 10
    simplex_step: float = 0.1
    hessian_step: float = 1e-4
    gradient_tolerance: float = 1e-3


@dataclass(frozen=True)
class FitResult:
    """Estimates and by-products of one conditional least-squares fit.

    ``names``, ``estimates``, ``std_errors`` and ``t_stats`` are aligned:
    the intercept (``"const"``), the regressors in their input order, then
    the ARMA coefficients. When differencing annihilates the intercept its
    estimate is the mean level of ``y - X omega`` and its standard error is NaN.
    """

    order: SarimaOrder
    params: SarimaParams
    names: tuple
    estimates: np.ndarray
    std_errors: np.ndarray
    t_stats: np.ndarray
    cov: np.ndarray | None
    residuals: np.ndarray
    fitted: np.ndarray
    css: float
    converged: bool
    n_effective: int
    se_method: str
    gradient_norm: float
    n_evaluations: int
    presample_mean: float
    message: str = ""

    @property
    def sigma2(self) -> float:
        return self.params.sigma2

    @property
    def aic(self) -> float:
        k = len(self.names) - (0 if self.order.intercept_identified else 1) + 1
        return self.n_effective * np.log(self.css / self.n_effective) + 2 * k

    def _idx(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"no coefficient named {name!r}; have {self.names}") from None

    def coef(self, name: str) -> float:
        return float(self.estimates[self._idx(name)])

    def se(self, name: str) -> float:
        return float(self.std_errors[self._idx(name)])

    def tstat(self, name: str) -> float:
        return float(self.t_stats[self._idx(name)])

    @property
    def admissible(self) -> bool:
        return self.params.stationary and self.params.invertible


def predict_mean(params: SarimaParams, regressors: RegressorMatrix) -> np.ndarray:
    """Mean function ``omega_0 + sum_j omega_j x_jt``."""
    omega = params.omega
    if omega.size != regressors.n_columns + 1:
        raise ValueError(f"expected {regressors.n_columns + 1} omega values, got {omega.size}")
    return omega[0] + regressors.values @ omega[1:]


def _check_inputs(series: TimeSeries, regressors: RegressorMatrix, order: SarimaOrder):
    if len(regressors) != len(series):
        raise ValueError(f"regressors have {len(regressors)} rows, series has {len(series)}")
    if len(series) <= order.span:
        raise SeriesLengthError(f"series of length {len(series)} cannot be differenced by {order.span}")


def css_residuals(params: SarimaParams, series: TimeSeries, regressors: RegressorMatrix,
                  order: SarimaOrder) -> np.ndarray | None:
    """Conditional innovations at ``params``; ``None`` outside the admissible region."""
    _check_inputs(series, regressors, order)
    z = series.values - predict_mean(params, regressors)
    w = difference_array(z, order.d, order.k, order.D)
    arma = params.arma_vector()
    if arma.size != order.n_arma:
        raise ValueError(f"{order.label} needs {order.n_arma} ARMA coefficients, got {arma.size}")
    return kernels.residuals(arma, order.p, order.q, order.P, order.Q, order.k, w)


def css_objective(params: SarimaParams, series: TimeSeries, regressors: RegressorMatrix,
                  order: SarimaOrder) -> float:
    """Conditional sum of squares; ``inf`` outside the admissible region.

    Examples
    --------
    >>> order = SarimaOrder(1, 0, 0)
    >>> params = SarimaParams([0.0], phi=[0.5])
    >>> round(css_objective(params, TimeSeries([0, 1, 0]), RegressorMatrix.empty(3), order), 4)
    1.2778
    """
    a = css_residuals(params, series, regressors, order)
    if a is None:
        return np.inf
    val = float(a @ a)
    return val if np.isfinite(val) else np.inf


class _Problem:
    """Differenced data for one (series, regressors, order) triple."""

    def __init__(self, y, X, names, order: SarimaOrder):
        self.order = order
        self.names = list(names)
        self.intercept = order.intercept_identified
        cols = [y] + [X[:, j] for j in range(X.shape[1])]
        if self.intercept:
            cols.append(np.ones_like(y))
        self.cols = np.ascontiguousarray(difference_array(np.vstack(cols), order.d, order.k, order.D))
        self.n = self.cols.shape[1]
        for j, name in enumerate(self.names):
            if not np.any(self.cols[j + 1]):
                raise ValueError(f"regressor {name!r} is annihilated by {order.label} differencing")
        self.nbeta = self.cols.shape[0] - 1
        self.core = kernels.ProfileProblem(self.cols, order.p, order.q, order.P, order.Q, order.k)

    @property
    def evaluations(self) -> int:
        return int(self.core.evaluations)

    def residual_vector(self, theta):
        o = self.order
        beta, arma = theta[:self.nbeta], theta[self.nbeta:]
        z = self.cols[0] - beta @ self.cols[1:] if self.nbeta else self.cols[0]
        return kernels.residuals(np.ascontiguousarray(arma, dtype=np.float64),
                                 o.p, o.q, o.P, o.Q, o.k, np.ascontiguousarray(z))


def _opg_cov(problem: _Problem, theta, sigma2, step):
    a0 = problem.residual_vector(theta)
    J = np.empty((a0.size, theta.size))
    for i in range(theta.size):
        h = step * max(1.0, abs(theta[i]))
        tp = theta.copy()
        tp[i] += h
        ap = problem.residual_vector(tp)
        if ap is None or not np.all(np.isfinite(ap)):
            tp[i] = theta[i] - h
            ap = problem.residual_vector(tp)
            if ap is None:
                return None
            J[:, i] = (a0 - ap) / h
        else:
            J[:, i] = (ap - a0) / h
    scores = (a0[:, None] * J) / sigma2
    opg = scores.T @ scores
    try:
        cov = np.linalg.inv(opg)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(cov)) or np.any(np.diag(cov) <= 0):
        return None
    return cov


def fit(series: TimeSeries, regressors: RegressorMatrix | None, order: SarimaOrder,
        config: FitConfig | None = None, start=None) -> FitResult:
    """Estimate a seasonal ARIMA model with regressors by conditional least squares.

    The ARMA coefficients are found by Nelder-Mead from ``start`` (zeros by
    default) followed by a BFGS polish using central finite-difference
    gradients. For any ARMA value the regression coefficients that minimise
    the conditional sum of squares are obtained exactly by least squares on
    the whitened data, so the search runs over the ARMA coefficients only
    and reaches the same joint minimum. Standard errors come from the
    numerical Hessian of the full objective, ``cov = 2 sigma2 H^-1``, with
    an outer-product-of-gradients fallback when the Hessian is unusable.

    Parameters
    ----------
    series : TimeSeries
    regressors : RegressorMatrix or None
    order : SarimaOrder
    config : FitConfig, optional
    start : FitResult or array_like, optional
        Warm start for the ARMA coefficients.

    Returns
    -------
    FitResult
        Non-convergence and unusable Hessians are flagged, not raised.
    """
    config = config or FitConfig()
    if regressors is None:
        regressors = RegressorMatrix.empty(len(series))
    _check_inputs(series, regressors, order)
    if max(order.p, order.d, order.q, order.P, order.D, order.Q) > config.parameter_max_order:
        raise ValueError(f"{order.label} exceeds parameter_max_order={config.parameter_max_order}")
    n_free = order.n_arma + regressors.n_columns + (1 if order.intercept_identified else 0)
    if len(series) < config.min_obs_per_param * max(n_free, 1):
        raise SeriesLengthError(
            f"{len(series)} observations is fewer than {config.min_obs_per_param} per parameter "
            f"({n_free} parameters)")

    # canonical column order keeps results independent of input ordering
    canon = tuple(sorted(regressors.names))
    X = regressors.reorder(canon).values
    prob = _Problem(series.values, X, canon, order)

    if isinstance(start, FitResult):
        x0 = start.params.arma_vector()
    elif start is not None:
        x0 = np.asarray(start, dtype=np.float64)
    else:
        x0 = np.zeros(order.n_arma)
    if x0.size != order.n_arma:
        raise ValueError("start has the wrong number of ARMA coefficients")
    core = prob.core
    if order.n_arma and not np.isfinite(core.profile(x0)[0]):
        x0 = np.zeros(order.n_arma)

    message = ""
    converged = True
    gnorm = 0.0
    step = config.finite_difference_step
    if order.n_arma:
        x, _, nm_it, bf_it, status = core.minimize(
            x0, config.simplex_step, config.max_iterations, 1e-5, config.tolerance * 100,
            1e-7, config.tolerance, step)
        message = f"nelder-mead {nm_it} iterations, bfgs {bf_it} iterations, stop: {status}"
        css = core.profile(x)[0]
        g = core.gradient(x, step) if np.isfinite(css) else np.full(x.size, np.inf)
        gnorm = float(np.max(np.abs(g)))
        converged = bool(np.isfinite(css) and gnorm <= config.gradient_tolerance * (1.0 + abs(css)))
        if not converged:
            logger.debug("%s did not converge: gradient %.3g, %s", order.label, gnorm, message)
    else:
        x = x0

    css, beta = core.profile(x)
    n_eff = prob.n
    sigma2 = css / n_eff if np.isfinite(css) else np.nan
    theta = np.concatenate([beta, x])

    cov = None
    se_method = "unavailable"
    if np.isfinite(css) and sigma2 > 0:
        H = core.hessian(theta, config.hessian_step)
        if np.all(np.isfinite(H)):
            try:
                np.linalg.cholesky(H)
                cov = 2.0 * sigma2 * np.linalg.inv(H)
                se_method = "hessian"
            except np.linalg.LinAlgError:
                cov = None
        if cov is None:
            cov = _opg_cov(prob, theta, sigma2, config.hessian_step)
            se_method = "opg" if cov is not None else "unavailable"
    ses = np.sqrt(np.diag(cov)) if cov is not None else np.full(theta.size, np.nan)

    # map canonical order back to the caller's: [const, regressors..., arma...]
    nreg = regressors.n_columns
    reg_beta = dict(zip(canon, beta[:nreg]))
    reg_se = dict(zip(canon, ses[:nreg]))
    omega_reg = np.array([reg_beta[n] for n in regressors.names])
    if order.intercept_identified:
        const, const_se = beta[nreg], ses[nreg]
    else:
        const = float(np.mean(series.values - regressors.values @ omega_reg)) if nreg else \
            float(np.mean(series.values))
        const_se = np.nan
    arma_se = ses[prob.nbeta:]
    names = (INTERCEPT,) + regressors.names + tuple(order.arma_names())
    estimates = np.concatenate([[const], omega_reg, x])
    std_errors = np.concatenate([[const_se], [reg_se[n] for n in regressors.names], arma_se])
    with np.errstate(divide="ignore", invalid="ignore"):
        t_stats = np.where(std_errors > 0, estimates / std_errors, np.nan)

    # full covariance in output order
    out_cov = None
    if cov is not None:
        perm = [canon.index(n) for n in regressors.names]
        if order.intercept_identified:
            perm = [nreg] + perm
        perm += list(range(prob.nbeta, theta.size))
        out_cov = cov[np.ix_(perm, perm)]

    params = SarimaParams.from_vector(order, x, np.concatenate([[const], omega_reg]), sigma2)
    z = prob.cols[0] - beta @ prob.cols[1:] if prob.nbeta else prob.cols[0]
    resid = prob.residual_vector(theta)
    if resid is None:
        resid = np.full(n_eff, np.nan)
        converged = False
    fitted = series.values[order.span:] - resid
    return FitResult(order=order, params=params, names=names, estimates=estimates,
                     std_errors=std_errors, t_stats=t_stats, cov=out_cov, residuals=resid,
                     fitted=fitted, css=float(css), converged=converged, n_effective=n_eff,
                     se_method=se_method, gradient_norm=gnorm, n_evaluations=prob.evaluations,
                     presample_mean=float(z.mean()), message=message)
