"""Synthetic series generators and Monte Carlo harnesses.

All generators are deterministic under a fixed seed; replication ``r`` of
a study draws from ``SeedSequence([seed, r])``.
"""

from __future__ import annotations

import datetime as dt
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

from .multiplicity import (DwbConfig, ErrorRates, OutcomeCounts, PreconditionError, TestFamily,
                           benjamini_hochberg, bonferroni, error_rates, fit_universe, holm, max_t,
                           replicate_rng)
from .sarimax import (FitConfig, InterventionSpec, RegressorMatrix, SarimaOrder, SarimaParams,
                      build_regressors)
from .series import TimeSeries, differencing_polynomial, expand_difference_equation

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LinearProcessSpec:
    """``Y_t = mean_level + e_t + sum_i psi_i e_{t-i}``, truncated after ``len(psi)`` weights."""

    psi: tuple = ()
    innovation_sd: float = 1.0
    mean_level: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "psi", tuple(float(v) for v in self.psi))
        if self.innovation_sd < 0:
            raise ValueError("innovation_sd must be nonnegative")


def gen_linear_process(spec: LinearProcessSpec, n: int, seed: int = 0) -> TimeSeries:
    """Finite moving sum of iid normal innovations after a burn-in of ``len(psi)``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    r = len(spec.psi)
    e = np.random.default_rng(seed).normal(0.0, spec.innovation_sd, n + r)
    y = lfilter(np.concatenate([[1.0], spec.psi]), [1.0], e)[r:]
    return TimeSeries(y + spec.mean_level)


@dataclass(frozen=True)
class InterventionEffect:
    """An intervention input with immediate impact ``omega`` and decay ``delta``.

    The effect follows ``effect_t = delta * effect_{t-1} + omega * input_t``.
    """

    spec: InterventionSpec
    omega: float
    delta: float = 0.0

    def __post_init__(self):
        if abs(self.delta) > 1.0:
            raise ValueError("|delta| must not exceed 1")

    def effect(self, series: TimeSeries) -> np.ndarray:
        return lfilter([self.omega], [1.0, -self.delta], self.spec.encode(series))


@dataclass(frozen=True)
class GeneratorSpec:
    """Seasonal ARIMA noise plus intercept ``params.omega[0]`` plus intervention effects."""

    order: SarimaOrder
    params: SarimaParams
    n: int
    burn_in: int = 500
    interventions: tuple = ()
    seed: int = 0
    start_date: dt.date = dt.date(2000, 1, 1)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not (self.params.stationary and self.params.invertible):
            raise ValueError("generator parameters must be stationary and invertible")
        if self.params.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        ar, ma = expand_difference_equation(self.order, self.params.phi, self.params.theta,
                                            self.params.seasonal_phi, self.params.seasonal_theta)
        max_lag = max(ar.degree, ma.degree, 1)
        if self.burn_in < 10 * max_lag:
            raise ValueError(f"burn_in must be at least 10 x max lag ({10 * max_lag})")
        object.__setattr__(self, "interventions", tuple(self.interventions))

    def regressors(self, series: TimeSeries | None = None) -> RegressorMatrix:
        """Step/pulse columns for the generator's interventions (no decay)."""
        series = series if series is not None else TimeSeries(np.zeros(self.n), self.start_date)
        return build_regressors(series, [e.spec for e in self.interventions])

    def with_seed(self, seed) -> "GeneratorSpec":
        return replace(self, seed=seed)


def gen_noise(order: SarimaOrder, params: SarimaParams, n: int, burn_in: int,
              rng: np.random.Generator) -> np.ndarray:
    """Zero-mean seasonal ARIMA noise of length ``n`` after discarding ``burn_in``."""
    o = order
    ar, ma = expand_difference_equation(
        SarimaOrder(o.p, 0, o.q, o.P, 0, o.Q, o.k, max_order=o.max_order),
        params.phi, params.theta, params.seasonal_phi, params.seasonal_theta)
    a = rng.normal(0.0, np.sqrt(params.sigma2), n + burn_in)
    w = lfilter(ma.to_dense(), ar.to_dense(), a)
    delta = differencing_polynomial(o.d, o.k, o.D).to_dense()
    if delta.size > 1:
        w = lfilter([1.0], delta, w)
    return w[burn_in:]


def gen_sarima(spec: GeneratorSpec) -> TimeSeries:
    """Simulate a series from ``spec``.

    Examples
    --------
    >>> spec = GeneratorSpec(SarimaOrder(), SarimaParams([5.0], sigma2=1e-12), n=3, burn_in=10)
    >>> np.round(gen_sarima(spec).values, 3)
    array([5., 5., 5.])
    """
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    noise = gen_noise(spec.order, spec.params, spec.n, spec.burn_in, rng)
    base = TimeSeries(np.zeros(spec.n), spec.start_date)
    y = spec.params.omega[0] + noise
    for eff in spec.interventions:
        y = y + eff.effect(base)
    return TimeSeries(y, spec.start_date)


def _noise_variance_factor(order: SarimaOrder, params: SarimaParams, n: int, burn_in: int,
                           draws: int = 200, seed: int = 12345) -> float:
    # expected sample variance of unit-sigma noise, by simulation
    unit = replace(params, sigma2=1.0)
    rng = np.random.default_rng(seed)
    return float(np.mean([np.var(gen_noise(order, unit, n, burn_in, rng), ddof=1)
                          for _ in range(draws)]))


WEEKLY_AIRLINE_ORDER = SarimaOrder(0, 1, 1, 0, 1, 1, 7)


def large_daily_spec(omega: float = -634.0, n: int = 8400, level: float = 729.0, sd: float = 467.0,
                     theta: float = 0.4, seasonal_theta: float = 0.6, onset_fraction: float = 0.17,
                     seed: int = 0, burn_in: int = 500,
                     start_date: dt.date = dt.date(1996, 1, 1)) -> GeneratorSpec:
    """Daily series with a step intervention on (0,1,1)x(0,1,1)_7 noise.

    The innovation scale is set so the expected sample variance of the
    series is ``sd**2`` and the intercept so its expected mean is ``level``.
    """
    onset = start_date + dt.timedelta(days=int(round(onset_fraction * n)))
    step = InterventionSpec("intervention", "step", onset, expected_sign=-1 if omega < 0 else 1)
    x = step.encode(TimeSeries(np.zeros(n), start_date))
    eff = omega * x
    base = SarimaParams([0.0], theta=[theta], seasonal_theta=[seasonal_theta], sigma2=1.0)
    factor = _noise_variance_factor(WEEKLY_AIRLINE_ORDER, base, n, burn_in)
    resid_var = sd ** 2 - np.var(eff, ddof=1)
    if resid_var <= 0:
        raise ValueError("the step alone exceeds the target standard deviation")
    sigma2 = resid_var / factor
    params = SarimaParams([level - eff.mean()], theta=[theta], seasonal_theta=[seasonal_theta],
                          sigma2=sigma2)
    return GeneratorSpec(WEEKLY_AIRLINE_ORDER, params, n, burn_in,
                         (InterventionEffect(step, omega),), seed, start_date)


def universe_orders(p=(0, 1, 2), d=(0, 1, 2), q=(0, 1, 2), seasonal=(0, 1, 1), k=7,
                    max_order: int = 3) -> list[SarimaOrder]:
    """Cartesian product of nonseasonal ranges with one fixed seasonal part, lexicographic."""
    for name, rng_ in (("p", p), ("d", d), ("q", q)):
        if len(rng_) == 0:
            raise ValueError(f"range for {name} is empty")
    P, D, Q = seasonal
    return [SarimaOrder(a, b, c, P, D, Q, k, max_order=max_order)
            for a in sorted(p) for b in sorted(d) for c in sorted(q)]


CORRECTIONS = ("naive", "bonferroni", "holm", "bh", "maxt")


@dataclass(frozen=True)
class StudyReplicate:
    """Per-replicate decisions (one boolean vector per correction, in universe order)."""

    index: int
    tstats: np.ndarray
    decisions: dict
    converged: np.ndarray
    maxt_threshold: float = float("nan")


@dataclass(frozen=True)
class ErrorRateReport:
    corrections: tuple
    null_true: bool
    rates: dict
    rejection_rate: dict
    rejection_se: dict
    replicates: tuple
    convergence_failure_rate: float

    def summary_rows(self):
        for c in self.corrections:
            r = self.rates[c]
            yield (c, r.fwer, r.fwer_se, r.fdr, r.fdr_se, self.rejection_rate[c])


def _apply_corrections(tstats, corrections, alpha, m, maxt_threshold=None):
    fam = TestFamily.from_tstats(tstats, m=m)
    decisions = {}
    for c in corrections:
        if c == "naive":
            # pick the most significant model, test it at the nominal level
            rej = np.zeros(fam.m, dtype=bool)
            i = int(np.argmin(fam.pvalues))
            rej[i] = fam.pvalues[i] <= alpha
        elif c == "bonferroni":
            rej = bonferroni(fam, alpha).reject
        elif c == "holm":
            rej = holm(fam, alpha).reject
        elif c == "bh":
            rej = benjamini_hochberg(fam, alpha).reject
        elif c == "maxt":
            t = np.nan_to_num(np.abs(fam.tstats), nan=0.0)
            rej = t > maxt_threshold
        else:
            raise ValueError(f"unknown correction {c!r}")
        decisions[c] = rej[:len(tstats)]
    return decisions


def _study_replicate(args):
    (r, generator, universe, corrections, alpha, target, dwb, fit_config) = args
    spec = generator.with_seed((int(generator.seed), int(r), 0))
    y = gen_sarima(spec)
    X = spec.regressors(y)
    fits = fit_universe(y, X, universe, fit_config)
    conv = np.array([f.converged for f in fits])
    t = np.array([f.tstat(target) if f.converged else np.nan for f in fits])
    thr = float("nan")
    if "maxt" in corrections:
        boot_seed = np.random.SeedSequence([int(generator.seed), int(r), 1]).generate_state(1)[0]
        boot = replace(dwb, seed=int(boot_seed))
        try:
            thr = max_t(y, X, universe, target, alpha, boot, fit_config, base_fits=fits).threshold
        except PreconditionError as exc:
            logger.warning("replicate %d: max-t unavailable (%s)", r, exc)
            thr = np.inf
    dec = _apply_corrections(t, corrections, alpha, len(universe), thr)
    return StudyReplicate(r, t, dec, conv, thr)


def mc_error_rate_study(universe: Sequence[SarimaOrder], generator: GeneratorSpec,
                        corrections: Sequence[str] = CORRECTIONS, replications: int = 500,
                        alpha: float = 0.05, target: str | None = None,
                        dwb: DwbConfig | None = None, fit_config: FitConfig | None = None,
                        workers: int = 1, progress=None) -> ErrorRateReport:
    """Empirical error rates of each correction for the target-coefficient family.

    The family holds one test per universe model. When every target
    effect in ``generator`` is zero all nulls are true; otherwise all are
    false and the rejection rates measure power.
    """
    universe = list(universe)
    corrections = tuple(corrections)
    for c in corrections:
        if c not in CORRECTIONS:
            raise ValueError(f"unknown correction {c!r}")
    if not generator.interventions:
        raise ValueError("the generator needs an intervention to test")
    target = target or generator.interventions[0].spec.name
    null_true = all(e.omega == 0 for e in generator.interventions if e.spec.name == target)
    dwb = dwb or DwbConfig()
    tasks = [(r, generator, universe, corrections, alpha, target, dwb, fit_config)
             for r in range(replications)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reps = list(pool.map(_study_replicate, tasks))
    else:
        reps = []
        for t in tasks:
            reps.append(_study_replicate(t))
            if progress:
                progress(len(reps), replications)
    rates, rej_rate, rej_se = {}, {}, {}
    for c in corrections:
        outs = [OutcomeCounts.from_decisions(rep.decisions[c], null_true) for rep in reps]
        rates[c] = error_rates(outs)
        any_rej = np.array([rep.decisions[c].any() for rep in reps], dtype=float)
        rej_rate[c] = float(any_rej.mean())
        rej_se[c] = float(np.sqrt(rej_rate[c] * (1 - rej_rate[c]) / len(reps)))
    fail = float(np.mean([1.0 - rep.converged.mean() for rep in reps]))
    return ErrorRateReport(corrections, null_true, rates, rej_rate, rej_se, tuple(reps), fail)


@dataclass(frozen=True)
class PostSelectionResult:
    """Estimates of beta_1 from replications where X_1 was selected."""

    estimates: np.ndarray
    std_errors: np.ndarray
    selected: np.ndarray
    threshold: float
    beta1: float
    bin_edges: np.ndarray
    counts: np.ndarray

    @property
    def selection_rate(self) -> float:
        return float(self.selected.mean())

    def fraction_near_zero(self, width: float = 0.5) -> float:
        """Share of selected estimates within ``width`` standard errors of zero."""
        if self.estimates.size == 0:
            return float("nan")
        return float(np.mean(np.abs(self.estimates) <= width * self.std_errors))


def _ols(X, y):
    XtX_inv = np.linalg.inv(X.T @ X)
    b = XtX_inv @ (X.T @ y)
    r = y - X @ b
    s2 = r @ r / (X.shape[0] - X.shape[1])
    return b, np.sqrt(s2 * np.diag(XtX_inv))


def forward_stepwise(X, y, threshold: float) -> list[int]:
    """Forward selection by largest |t| among candidates, while it exceeds ``threshold``."""
    n, p = X.shape
    chosen: list[int] = []
    while len(chosen) < p:
        best, best_t = None, -np.inf
        for j in range(p):
            if j in chosen:
                continue
            cols = [0] + [c + 1 for c in chosen] + [j + 1]
            Z = np.column_stack([np.ones(n), X])[:, cols]
            b, se = _ols(Z, y)
            t = abs(b[-1] / se[-1])
            if t > best_t:
                best, best_t = j, t
        if best_t <= threshold:
            break
        chosen.append(best)
    return chosen


def post_selection_demo(n: int = 200, replications: int = 2000, seed: int = 0,
                        threshold: float = 2.0, beta=(0.0, 0.5, 0.5, 0.5, 0.5),
                        rho: float = 0.5, noise_sd: float = 1.0, bins: int = 40) -> PostSelectionResult:
    """Sampling distribution of beta_1-hat after forward stepwise selection.

    Five equicorrelated predictors; ``beta_1`` is recorded from the final
    model only when ``X_1`` was selected. ``threshold=0`` keeps everything.
    """
    beta = np.asarray(beta, dtype=np.float64)
    p = beta.size
    cov = np.full((p, p), rho) + (1 - rho) * np.eye(p)
    L = np.linalg.cholesky(cov)
    est, ses, sel = [], [], []
    for r in range(replications):
        rng = replicate_rng(seed, r)
        X = rng.standard_normal((n, p)) @ L.T
        y = X @ beta + rng.normal(0, noise_sd, n)
        chosen = forward_stepwise(X, y, threshold)
        sel.append(0 in chosen)
        if 0 in chosen:
            Z = np.column_stack([np.ones(n), X[:, chosen]])
            b, se = _ols(Z, y)
            i = chosen.index(0) + 1
            est.append(b[i])
            ses.append(se[i])
    est = np.array(est)
    ses = np.array(ses)
    counts, edges = np.histogram(est, bins=bins) if est.size else (np.zeros(0, int), np.zeros(0))
    return PostSelectionResult(est, ses, np.array(sel), threshold, float(beta[0]), edges, counts)
