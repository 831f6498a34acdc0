"""Multiplicity-corrected inference over a model universe.

Bonferroni, Holm and Benjamini-Hochberg act on a family of p-values. The
max-t calibration refits every universe model on dependent wild bootstrap
resamples generated under the null for the target coefficient and takes
the (1 - alpha) quantile of the per-replicate maximum |t|.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from . import kernels
from .sarimax import (FitConfig, FitResult, RegressorMatrix, SarimaOrder, fit,
                      predict_mean)
from .series import TimeSeries, difference_array, integrate_array

logger = logging.getLogger(__name__)


def operational_alpha(m: int, alpha: float = 0.05) -> float:
    """Chance of at least one rejection among ``m`` independent level-``alpha`` tests.

    Examples
    --------
    >>> round(operational_alpha(2, 0.05), 4)
    0.0975
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    return 1.0 - (1.0 - alpha) ** m


@dataclass(frozen=True)
class TestFamily:
    """p-values (and optionally t-statistics) for ``m`` hypotheses."""

    __test__ = False  # not a pytest class

    pvalues: np.ndarray
    tstats: np.ndarray | None = None
    labels: tuple = ()

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.pvalues, dtype=np.float64))
        if p.size < 1:
            raise ValueError("a test family needs at least one p-value")
        if np.any(np.isnan(p)) or np.any(p < 0) or np.any(p > 1):
            raise ValueError("p-values must lie in [0, 1]")
        object.__setattr__(self, "pvalues", p)
        if self.tstats is not None:
            t = np.asarray(self.tstats, dtype=np.float64)
            if t.shape != p.shape:
                raise ValueError("tstats must match pvalues")
            object.__setattr__(self, "tstats", t)
        labels = tuple(self.labels) or tuple(str(i) for i in range(p.size))
        if len(labels) != p.size:
            raise ValueError("one label per test is required")
        object.__setattr__(self, "labels", labels)

    @property
    def m(self) -> int:
        return self.pvalues.size

    @classmethod
    def from_tstats(cls, tstats, labels=(), dof=None, m=None) -> "TestFamily":
        """Two-sided p-values from t-statistics (normal reference unless ``dof``).

        NaN statistics (unavailable or non-converged) get p = 1. When ``m``
        exceeds the number of statistics the family is padded with p = 1 so
        corrections still count every declared hypothesis.
        """
        t = np.asarray(tstats, dtype=np.float64)
        ref = stats.norm if dof is None else stats.t(dof)
        p = np.where(np.isfinite(t), 2.0 * ref.sf(np.abs(np.nan_to_num(t))), 1.0)
        labels = tuple(labels)
        if m is not None and m > t.size:
            pad = m - t.size
            p = np.concatenate([p, np.ones(pad)])
            t = np.concatenate([t, np.full(pad, np.nan)])
            labels = labels + tuple(f"missing{i}" for i in range(pad)) if labels else ()
        return cls(p, t, labels)


@dataclass(frozen=True)
class CorrectionResult:
    """Decisions from one multiplicity correction."""

    method: str
    alpha: float
    reject: np.ndarray
    adjusted: np.ndarray
    threshold: float | None = None

    @property
    def n_rejected(self) -> int:
        return int(self.reject.sum())


def bonferroni(family: TestFamily, alpha: float = 0.05) -> CorrectionResult:
    """Reject where ``p <= alpha / m``; adjusted ``q = min(1, m p)``.

    Examples
    --------
    >>> float(bonferroni(TestFamily([0.03] + [0.5] * 7), 0.05).adjusted[0])
    0.24
    """
    m = family.m
    q = np.minimum(1.0, m * family.pvalues)
    thr = alpha / m
    return CorrectionResult("bonferroni", alpha, family.pvalues <= thr, q, thr)


def holm(family: TestFamily, alpha: float = 0.05) -> CorrectionResult:
    """Holm step-down: reject sorted p-values while ``p_(i) <= alpha / (m - i + 1)``."""
    p = family.pvalues
    m = p.size
    order = np.argsort(p, kind="stable")
    ps = p[order]
    ok = ps <= alpha / (m - np.arange(m))
    n_rej = m if ok.all() else int(np.argmin(ok))
    reject = np.zeros(m, dtype=bool)
    reject[order[:n_rej]] = True
    adj_sorted = np.minimum(1.0, np.maximum.accumulate((m - np.arange(m)) * ps))
    adjusted = np.empty(m)
    adjusted[order] = adj_sorted
    return CorrectionResult("holm", alpha, reject, adjusted)


def benjamini_hochberg(family: TestFamily, alpha: float = 0.05) -> CorrectionResult:
    """Benjamini-Hochberg step-up at false discovery rate ``alpha``."""
    p = family.pvalues
    m = p.size
    order = np.argsort(p, kind="stable")
    ps = p[order]
    ok = np.flatnonzero(ps <= alpha * np.arange(1, m + 1) / m)
    reject = np.zeros(m, dtype=bool)
    if ok.size:
        reject[order[:ok[-1] + 1]] = True
    adj_sorted = np.minimum(1.0, np.minimum.accumulate((m / np.arange(1, m + 1) * ps)[::-1])[::-1])
    adjusted = np.empty(m)
    adjusted[order] = adj_sorted
    return CorrectionResult("bh", alpha, reject, adjusted)


def bonferroni_t_threshold(m: int, alpha: float = 0.05, convention: str = "two-sided-normal",
                           dof: int | None = None) -> float:
    """Critical |t| matching a Bonferroni per-test level ``alpha / m``.

    ``convention`` is ``"two-sided-normal"``, ``"one-sided-normal"``,
    ``"two-sided-t"`` or ``"one-sided-t"`` (the t versions need ``dof``).
    """
    sides = {"two-sided": 2.0, "one-sided": 1.0}
    head, _, ref = convention.rpartition("-")
    if head not in sides or ref not in ("normal", "t"):
        raise ValueError(f"unknown convention {convention!r}")
    if ref == "t" and dof is None:
        raise ValueError("t conventions need dof")
    dist = stats.norm if ref == "normal" else stats.t(dof)
    return float(dist.isf(alpha / m / sides[head]))


@dataclass(frozen=True)
class OutcomeCounts:
    """Tallies of one multiple-testing outcome with known truth.

    ``U`` true nulls kept, ``V`` true nulls rejected, ``T`` false nulls
    kept, ``S`` false nulls rejected.
    """

    U: int
    V: int
    T: int
    S: int

    @property
    def m(self) -> int:
        return self.U + self.V + self.T + self.S

    @property
    def m0(self) -> int:
        return self.U + self.V

    @property
    def R(self) -> int:
        return self.V + self.S

    @property
    def W(self) -> int:
        return self.U + self.T

    @classmethod
    def from_decisions(cls, reject, null_true) -> "OutcomeCounts":
        reject = np.asarray(reject, dtype=bool)
        null_true = np.broadcast_to(np.asarray(null_true, dtype=bool), reject.shape)
        return cls(int(np.sum(~reject & null_true)), int(np.sum(reject & null_true)),
                   int(np.sum(~reject & ~null_true)), int(np.sum(reject & ~null_true)))


@dataclass(frozen=True)
class ErrorRates:
    fwer: float
    fdr: float
    fwer_se: float
    fdr_se: float
    n: int


def error_rates(outcomes: Sequence[OutcomeCounts]) -> ErrorRates:
    """Monte Carlo FWER ``mean 1{V>0}`` and FDR ``mean V/max(R,1)`` with standard errors."""
    outcomes = list(outcomes)
    if not outcomes:
        raise ValueError("no outcomes")
    any_v = np.array([o.V > 0 for o in outcomes], dtype=float)
    prop = np.array([o.V / o.R if o.R > 0 else 0.0 for o in outcomes])
    n = len(outcomes)
    se = (lambda x: float(np.std(x, ddof=1) / np.sqrt(n)) if n > 1 else float("nan"))
    return ErrorRates(float(any_v.mean()), float(prop.mean()), se(any_v), se(prop), n)


@dataclass(frozen=True)
class DwbConfig:
    """Dependent wild bootstrap settings (Bartlett kernel of bandwidth ``bandwidth``)."""

    bandwidth: int = 7
    replications: int = 100
    seed: int = 0
    kernel: str = "bartlett"

    def __post_init__(self):
        if int(self.bandwidth) != self.bandwidth or self.bandwidth < 1:
            raise ValueError("bandwidth must be a positive integer")
        if self.replications < 2:
            raise ValueError("at least two bootstrap replications are required")
        if self.kernel != "bartlett":
            raise ValueError("only the Bartlett kernel is supported")


def bartlett(x) -> np.ndarray:
    x = np.abs(np.asarray(x, dtype=np.float64))
    return np.where(x <= 1.0, 1.0 - x, 0.0)


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    """Generator for replicate ``index``, independent of evaluation order."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def dwb_multipliers(n: int, config: DwbConfig, rng: np.random.Generator | None = None) -> np.ndarray:
    """Gaussian multipliers with ``Cov(w_t, w_s) = bartlett((t - s) / l)``.

    Each multiplier is a moving sum of ``l`` iid standard normals scaled by
    ``1/sqrt(l)``; two sums ``h`` apart share ``l - h`` terms, giving the
    Bartlett covariance exactly. ``l = 1`` yields iid normals.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    ell = int(config.bandwidth)
    e = rng.standard_normal(n + ell - 1)
    c = np.concatenate([[0.0], np.cumsum(e)])
    return (c[ell:] - c[:-ell]) / np.sqrt(ell)


class PreconditionError(ValueError):
    """Raised when an operation's precondition on its inputs is not met."""


def _arma_ops(fit_result: FitResult):
    o, prm = fit_result.order, fit_result.params
    ar = kernels.expand(np.array(prm.phi), np.array(prm.seasonal_phi), o.k)
    ma = kernels.expand(np.array(prm.theta), np.array(prm.seasonal_theta), o.k)
    return ar, ma


def dwb_resample(series: TimeSeries, fit_result: FitResult, regressors: RegressorMatrix | None = None,
                 config: DwbConfig | None = None, null: Sequence[str] = (),
                 multipliers=None, rng: np.random.Generator | None = None) -> TimeSeries:
    """One dependent wild bootstrap resample of ``series`` from a fitted model.

    The innovations are multiplied by Bartlett multipliers, passed back
    through the fitted ARMA recursion (same pre-sample conventions as the
    estimator) to give differenced noise, and integrated anchored on the
    original pre-sample values. Coefficients named in ``null`` are set to
    zero in the mean function. With all multipliers equal to one and no
    null the original series is reproduced.
    """
    if not fit_result.converged:
        raise PreconditionError(f"{fit_result.order.label} did not converge; refusing to resample")
    config = config or DwbConfig()
    if regressors is None:
        regressors = RegressorMatrix.empty(len(series))
    if tuple(fit_result.names[1:1 + regressors.n_columns]) != regressors.names:
        raise PreconditionError("regressors do not match those of the fit")
    o = fit_result.order
    a = fit_result.residuals
    if multipliers is None:
        multipliers = dwb_multipliers(a.size, config, rng)
    multipliers = np.asarray(multipliers, dtype=np.float64)
    if multipliers.shape != a.shape:
        raise ValueError("one multiplier per residual is required")
    mean = predict_mean(fit_result.params, regressors)
    z = series.values - mean
    w = difference_array(z, o.d, o.k, o.D)
    (al, ac), (ml, mc) = _arma_ops(fit_result)
    wstar = kernels.color(np.ascontiguousarray(a * multipliers), al, ac, ml, mc, float(w.mean()))
    zstar = integrate_array(wstar, z[:o.span], o.d, o.k, o.D)
    null_mean = mean.copy()
    for name in null:
        null_mean -= fit_result.coef(name) * regressors.column(name)
    return series.with_values(null_mean + zstar)


@dataclass(frozen=True)
class MaxTResult:
    """Bootstrap max-|t| calibration for one target coefficient over a universe.

    ``grid`` holds the target estimates (models x replicates) with the
    target effect of the generating model restored, for sign stability;
    ``tgrid`` holds the null-centered t-statistics. Non-converged refits
    are NaN in both grids and excluded from ``max_stats``.
    """

    target: str
    alpha: float
    labels: tuple
    reference: str
    max_stats: np.ndarray
    threshold: float
    observed_t: np.ndarray
    observed_coef: np.ndarray
    observed_se: np.ndarray
    reject: np.ndarray
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    grid: np.ndarray
    tgrid: np.ndarray
    signed_quantiles: tuple
    failures_per_replicate: np.ndarray

    @property
    def failure_rate(self) -> float:
        return float(self.failures_per_replicate.sum() / self.grid.size) if self.grid.size else 0.0

    @property
    def any_reject(self) -> bool:
        return bool(np.any(self.reject))


def select_reference(fits: Sequence[FitResult]) -> int:
    """Index of the converged fit with the smallest AIC."""
    best, best_aic = None, np.inf
    for i, f in enumerate(fits):
        if f.converged and np.isfinite(f.aic) and f.aic < best_aic:
            best, best_aic = i, f.aic
    if best is None:
        raise PreconditionError("no universe model converged")
    return best


def fit_universe(series: TimeSeries, regressors: RegressorMatrix, universe: Sequence[SarimaOrder],
                 config: FitConfig | None = None, starts=None) -> list[FitResult]:
    """Fit every model of the universe, in universe order."""
    starts = starts if starts is not None else [None] * len(universe)
    return [fit(series, regressors, o, config, start=s) for o, s in zip(universe, starts)]


def _replicate(args):
    (b, series, regressors, universe, target, fit_config, dwb, ref_fit, starts) = args
    rng = replicate_rng(dwb.seed, b)
    ystar = dwb_resample(series, ref_fit, regressors, dwb, null=(target,), rng=rng)
    coefs = np.full(len(universe), np.nan)
    tvals = np.full(len(universe), np.nan)
    for j, (order, start) in enumerate(zip(universe, starts)):
        try:
            r = fit(ystar, regressors, order, fit_config, start=start)
        except (ValueError, np.linalg.LinAlgError) as exc:
            logger.debug("replicate %d, %s failed: %s", b, order.label, exc)
            continue
        se = r.se(target)
        if r.converged and np.isfinite(se) and se > 0:
            coefs[j] = r.coef(target)
            tvals[j] = coefs[j] / se
    return b, coefs, tvals


def max_t(series: TimeSeries, regressors: RegressorMatrix, universe: Sequence[SarimaOrder],
          target: str, alpha: float = 0.05, config: DwbConfig | None = None,
          fit_config: FitConfig | None = None, base_fits: Sequence[FitResult] | None = None,
          reference: int | None = None, workers: int = 1) -> MaxTResult:
    """Max-|t| threshold for ``target`` over ``universe`` by dependent wild bootstrap.

    Resamples come from the ``reference`` base fit (smallest AIC among
    converged fits by default) with the target coefficient set to zero.
    Every universe model is refitted on each resample, warm-started from
    its base fit. Replicate ``b`` draws its multipliers from
    ``SeedSequence([seed, b])``, so results do not depend on ``workers``.

    Raises
    ------
    PreconditionError
        When a replicate loses more than half of the universe to
        non-convergence, or no base fit converged.
    """
    config = config or DwbConfig()
    universe = list(universe)
    if target not in regressors.names:
        raise KeyError(f"target {target!r} is not a regressor; have {regressors.names}")
    if base_fits is None:
        base_fits = fit_universe(series, regressors, universe, fit_config)
    if len(base_fits) != len(universe):
        raise ValueError("one base fit per universe model is required")
    ref = select_reference(base_fits) if reference is None else reference
    ref_fit = base_fits[ref]
    if not ref_fit.converged:
        raise PreconditionError(f"reference model {ref_fit.order.label} did not converge")
    starts = [f.params.arma_vector() if f.converged else None for f in base_fits]
    tasks = [(b, series, regressors, universe, target, fit_config, config, ref_fit, starts)
             for b in range(config.replications)]
    m, B = len(universe), config.replications
    grid = np.full((m, B), np.nan)
    tgrid = np.full((m, B), np.nan)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replicate, tasks, chunksize=max(1, B // (4 * workers))))
    else:
        results = [_replicate(t) for t in tasks]
    for b, coefs, tvals in results:
        grid[:, b] = coefs
        tgrid[:, b] = tvals
    failures = np.sum(np.isnan(tgrid), axis=0)
    if np.any(failures > m / 2):
        bad = int(np.argmax(failures))
        raise PreconditionError(
            f"replicate {bad} lost {int(failures[bad])} of {m} models to non-convergence")
    # the generating model has target 0, so centering is at zero
    max_stats = np.nanmax(np.abs(tgrid), axis=0)
    threshold = float(np.quantile(max_stats, 1.0 - alpha))
    signed = (float(np.quantile(np.nanmin(tgrid, axis=0), alpha / 2)),
              float(np.quantile(np.nanmax(tgrid, axis=0), 1.0 - alpha / 2)))
    obs_coef = np.array([f.coef(target) if f.converged else np.nan for f in base_fits])
    obs_se = np.array([f.se(target) if f.converged else np.nan for f in base_fits])
    with np.errstate(invalid="ignore", divide="ignore"):
        obs_t = obs_coef / obs_se
    reject = np.nan_to_num(np.abs(obs_t), nan=0.0) > threshold
    # the resampling shift leaves the profile objective unchanged, so adding
    # the generator's target estimate back gives the unrestricted resample estimates
    grid = grid + ref_fit.coef(target)
    return MaxTResult(
        target=target, alpha=alpha, labels=tuple(o.label for o in universe),
        reference=ref_fit.order.label, max_stats=max_stats, threshold=threshold,
        observed_t=obs_t, observed_coef=obs_coef, observed_se=obs_se, reject=reject,
        ci_lower=obs_coef - threshold * obs_se, ci_upper=obs_coef + threshold * obs_se,
        grid=grid, tgrid=tgrid, signed_quantiles=signed, failures_per_replicate=failures)


@dataclass(frozen=True)
class SignStability:
    fraction_negative: float
    fraction_positive: float
    n_zero: int
    n_missing: int
    n: int
    bin_edges: np.ndarray
    counts: np.ndarray


def sign_stability(grid, bins: int | str = "auto") -> SignStability:
    """Sign shares over all finite cells of a models x replicates grid.

    Examples
    --------
    >>> sign_stability([[-1.0, -2.0], [-0.5, -3.0]]).fraction_negative
    1.0
    """
    g = np.asarray(grid, dtype=np.float64)
    if g.size == 0:
        raise ValueError("empty grid")
    finite = g[np.isfinite(g)]
    if finite.size == 0:
        raise ValueError("grid has no finite estimates")
    n = finite.size
    counts, edges = np.histogram(finite, bins=bins)
    return SignStability(float(np.sum(finite < 0) / n), float(np.sum(finite > 0) / n),
                         int(np.sum(finite == 0)), int(g.size - n), n, edges, counts)
