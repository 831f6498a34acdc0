import datetime as dt
import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from itsinfer.multiplicity import (DwbConfig, OutcomeCounts, PreconditionError, TestFamily,
                                   benjamini_hochberg, bonferroni, bonferroni_t_threshold,
                                   dwb_multipliers, dwb_resample, error_rates, fit_universe, holm,
                                   max_t, operational_alpha, replicate_rng, select_reference,
                                   sign_stability)
from itsinfer.sarimax import FitConfig, InterventionSpec, SarimaOrder, SarimaParams, fit
from itsinfer.simulation import GeneratorSpec, InterventionEffect, gen_sarima
from oracles import bartlett_weight, naive_operational_alpha, normal_two_sided_p

pvals = arrays(np.float64, st.integers(1, 30), elements=st.floats(0, 1, allow_nan=False))
alphas = st.floats(0.001, 0.3)


@pytest.mark.parametrize("m", [1, 2, 5, 10, 28, 100])
def test_operational_alpha_oracle(m):
    assert operational_alpha(m, 0.05) == pytest.approx(naive_operational_alpha(m, 0.05), rel=1e-14)


def test_operational_alpha_domain():
    with pytest.raises(ValueError):
        operational_alpha(0)
    with pytest.raises(ValueError):
        operational_alpha(3, 1.0)


def test_family_from_tstats():
    fam = TestFamily.from_tstats([1.96, np.nan, -3.0], labels=["a", "b", "c"], m=5)
    assert fam.m == 5 and fam.labels[:3] == ("a", "b", "c")
    assert fam.pvalues[0] == pytest.approx(normal_two_sided_p(1.96), rel=1e-12)
    assert fam.pvalues[1] == 1.0 and list(fam.pvalues[3:]) == [1.0, 1.0]
    t_fam = TestFamily.from_tstats([2.0], dof=10)
    assert t_fam.pvalues[0] > TestFamily.from_tstats([2.0]).pvalues[0]
    with pytest.raises(ValueError):
        TestFamily([1.5])


def test_bonferroni_hand_case():
    fam = TestFamily([0.001, 0.01, 0.02, 0.5])
    r = bonferroni(fam, 0.05)
    assert list(r.reject) == [True, True, False, False] and r.threshold == 0.0125
    np.testing.assert_allclose(r.adjusted, [0.004, 0.04, 0.08, 1.0])


def test_holm_and_bh_hand_case():
    fam = TestFamily([0.01, 0.04, 0.03, 0.005])
    # sorted 0.005, 0.01, 0.03, 0.04 vs alpha/(4,3,2,1) = .0125, .0167, .025, .05
    assert list(holm(fam, 0.05).reject) == [True, False, False, True]
    # BH bounds .0125, .025, .0375, .05: largest k with p_(k) <= bound is 4
    assert list(benjamini_hochberg(fam, 0.05).reject) == [True, True, True, True]
    np.testing.assert_allclose(holm(fam).adjusted, [0.03, 0.06, 0.06, 0.02])
    np.testing.assert_allclose(benjamini_hochberg(fam).adjusted, [0.02, 0.04, 0.04, 0.02])


@given(pvals, alphas)
def test_holm_superset_of_bonferroni(p, a):
    fam = TestFamily(p)
    b, h = bonferroni(fam, a).reject, holm(fam, a).reject
    assert np.all(h[b])


@given(pvals, alphas)
def test_bh_superset_of_holm(p, a):
    fam = TestFamily(p)
    h, q = holm(fam, a).reject, benjamini_hochberg(fam, a).reject
    assert np.all(q[h])


@given(pvals, alphas, st.randoms())
def test_decisions_permutation_invariant(p, a, rnd):
    perm = list(range(p.size))
    rnd.shuffle(perm)
    perm = np.array(perm)
    for proc in (bonferroni, holm, benjamini_hochberg):
        base = proc(TestFamily(p), a)
        shuf = proc(TestFamily(p[perm]), a)
        np.testing.assert_array_equal(shuf.reject, base.reject[perm])
        np.testing.assert_allclose(shuf.adjusted, base.adjusted[perm])


@given(pvals, alphas)
def test_adjusted_pvalues_agree_with_decisions(p, a):
    fam = TestFamily(p)
    for proc in (bonferroni, holm, benjamini_hochberg):
        r = proc(fam, a)
        ok = np.abs(r.adjusted - a) > 1e-12
        np.testing.assert_array_equal(r.reject[ok], (r.adjusted <= a)[ok])


def test_bonferroni_t_threshold_conventions():
    from statistics import NormalDist
    z = NormalDist().inv_cdf
    assert bonferroni_t_threshold(27, 0.05) == pytest.approx(z(1 - 0.05 / 54), rel=1e-9)
    assert bonferroni_t_threshold(27, 0.05, "one-sided-normal") == pytest.approx(z(1 - 0.05 / 27),
                                                                                rel=1e-9)
    assert bonferroni_t_threshold(1, 0.05) == pytest.approx(1.959964, abs=1e-6)
    assert bonferroni_t_threshold(27, 0.05, "two-sided-t", 30) > bonferroni_t_threshold(27, 0.05)
    with pytest.raises(ValueError):
        bonferroni_t_threshold(27, 0.05, "two-sided-t")
    with pytest.raises(ValueError):
        bonferroni_t_threshold(27, 0.05, "sideways-normal")


def test_error_rates_exhaustive_small_families():
    for m in (1, 2, 3):
        for truth in itertools.product([True, False], repeat=m):
            for rej in itertools.product([True, False], repeat=m):
                o = OutcomeCounts.from_decisions(rej, truth)
                U = sum(t and not r for t, r in zip(truth, rej))
                V = sum(t and r for t, r in zip(truth, rej))
                T = sum(not t and not r for t, r in zip(truth, rej))
                S = sum(not t and r for t, r in zip(truth, rej))
                assert (o.U, o.V, o.T, o.S) == (U, V, T, S)
                assert o.m == m and o.m0 == sum(truth) and o.R == V + S and o.W == U + T
                e = error_rates([o])
                assert e.fwer == (1.0 if V > 0 else 0.0)
                assert e.fdr == (V / (V + S) if V + S else 0.0)


def test_error_rates_means_and_se():
    outs = [OutcomeCounts(1, 1, 0, 1), OutcomeCounts(3, 0, 0, 0),
            OutcomeCounts(0, 2, 0, 2), OutcomeCounts(2, 0, 1, 1)]
    e = error_rates(outs)
    assert e.fwer == 0.5 and e.fdr == pytest.approx((0.5 + 0 + 0.5 + 0) / 4)
    assert e.fwer_se == pytest.approx(np.std([1, 0, 1, 0], ddof=1) / 2)


def test_dwb_multiplier_covariance_is_bartlett():
    cfg = DwbConfig(bandwidth=7)
    w = dwb_multipliers(1_000_000, cfg, np.random.default_rng(1))
    for h in range(0, 12):
        c = float(np.mean(w[h:] * w[:w.size - h]))
        assert c == pytest.approx(bartlett_weight(h, 7), abs=0.01), h


def test_dwb_multipliers_iid_for_unit_bandwidth():
    w = dwb_multipliers(200_000, DwbConfig(bandwidth=1), np.random.default_rng(2))
    assert abs(np.mean(w[1:] * w[:-1])) < 0.01


def test_replicate_rng_independent_of_order():
    a = replicate_rng(5, 3).standard_normal(4)
    replicate_rng(5, 2).standard_normal(10)
    np.testing.assert_array_equal(a, replicate_rng(5, 3).standard_normal(4))
    assert not np.allclose(a, replicate_rng(5, 4).standard_normal(4))


def test_dwb_config_validation():
    with pytest.raises(ValueError):
        DwbConfig(bandwidth=0)
    with pytest.raises(ValueError):
        DwbConfig(kernel="parzen")


START = dt.date(2000, 1, 1)
UNIVERSE = [SarimaOrder(p, d, 0, 0, 1, 1, 7) for p in (0, 1) for d in (0, 1)]


def _data(omega=0.0, seed=1, n=300):
    spec = InterventionSpec("iv", "step", START + dt.timedelta(days=60))
    g = GeneratorSpec(SarimaOrder(0, 0, 0, 0, 1, 1, 7), SarimaParams([10.0], seasonal_theta=[0.6]),
                      n, interventions=(InterventionEffect(spec, omega),), seed=seed,
                      start_date=START)
    y = gen_sarima(g)
    return y, g.regressors(y)


@pytest.mark.parametrize("order", [SarimaOrder(1, 0, 1), SarimaOrder(0, 1, 1, 0, 1, 1, 7),
                                   SarimaOrder(2, 2, 0, 1, 0, 0, 7)])
def test_dwb_unit_multipliers_reproduce_series(order):
    y, X = _data(-2.0, seed=4)
    res = fit(y, X, order)
    assert res.converged
    back = dwb_resample(y, res, X, multipliers=np.ones(res.residuals.size))
    np.testing.assert_allclose(back.values, y.values, atol=1e-8 * np.abs(y.values).max())


def test_dwb_null_removes_target_effect():
    y, X = _data(-2.0, seed=4)
    res = fit(y, X, SarimaOrder(0, 0, 0, 0, 1, 1, 7))
    back = dwb_resample(y, res, X, null=("iv",), multipliers=np.ones(res.residuals.size))
    np.testing.assert_allclose(back.values, y.values - res.coef("iv") * X.column("iv"), atol=1e-8)


def test_dwb_resample_preconditions():
    y, X = _data()
    res = fit(y, X, SarimaOrder(0, 0, 0, 0, 1, 1, 7))
    with pytest.raises(ValueError):
        dwb_resample(y, res, X, multipliers=np.ones(3))
    from dataclasses import replace
    with pytest.raises(PreconditionError):
        dwb_resample(y, replace(res, converged=False), X)


@pytest.fixture(scope="module")
def maxt_null():
    y, X = _data(0.0, seed=8)
    fits = fit_universe(y, X, UNIVERSE)
    return y, X, fits, max_t(y, X, UNIVERSE, "iv", 0.05, DwbConfig(7, 40, 3), base_fits=fits)


def test_max_t_threshold_dominates_single_test_thresholds(maxt_null):
    *_, mt = maxt_null
    for j in range(len(UNIVERSE)):
        col = np.abs(mt.tgrid[j])
        col = col[np.isfinite(col)]
        assert mt.threshold >= np.quantile(col, 0.95) - 1e-12


def test_max_t_result_shapes_and_ci(maxt_null):
    y, X, fits, mt = maxt_null
    m = len(UNIVERSE)
    assert mt.grid.shape == (m, 40) and mt.max_stats.shape == (40,)
    assert mt.reference == fits[select_reference(fits)].order.label
    np.testing.assert_allclose(mt.ci_upper - mt.ci_lower, 2 * mt.threshold * mt.observed_se)
    np.testing.assert_array_equal(mt.reject, np.abs(mt.observed_t) > mt.threshold)
    assert mt.signed_quantiles[0] < 0 < mt.signed_quantiles[1]


def test_max_t_deterministic_and_worker_invariant(maxt_null):
    y, X, fits, mt = maxt_null
    again = max_t(y, X, UNIVERSE, "iv", 0.05, DwbConfig(7, 40, 3), base_fits=fits, workers=2)
    np.testing.assert_array_equal(again.max_stats, mt.max_stats)
    np.testing.assert_array_equal(again.grid, mt.grid)


def test_max_t_grid_shift_matches_unrestricted_resample():
    # refit on a resample that keeps the target effect equals null refit + estimate
    y, X = _data(-1.5, seed=12)
    order = SarimaOrder(1, 0, 0, 0, 1, 1, 7)
    base = fit(y, X, order)
    rng_mult = dwb_multipliers(base.residuals.size, DwbConfig(), np.random.default_rng(0))
    y0 = dwb_resample(y, base, X, null=("iv",), multipliers=rng_mult)
    y1 = dwb_resample(y, base, X, multipliers=rng_mult)
    a, b = fit(y0, X, order, start=base), fit(y1, X, order, start=base)
    assert b.coef("iv") == pytest.approx(a.coef("iv") + base.coef("iv"), abs=1e-6)


def test_max_t_unknown_target():
    y, X = _data()
    with pytest.raises(KeyError):
        max_t(y, X, UNIVERSE, "nope")


def test_select_reference_requires_convergence(maxt_null):
    from dataclasses import replace
    _, _, fits, _ = maxt_null
    with pytest.raises(PreconditionError):
        select_reference([replace(f, converged=False) for f in fits])


def test_sign_stability_counts():
    s = sign_stability([[-1.0, 2.0, np.nan], [0.0, -3.0, -4.0]], bins=3)
    assert s.fraction_negative == pytest.approx(3 / 5)
    assert s.fraction_positive == pytest.approx(1 / 5)
    assert s.n_zero == 1 and s.n_missing == 1 and s.counts.sum() == 5
    with pytest.raises(ValueError):
        sign_stability([[np.nan]])


def test_dwb_resample_innovations_are_scaled_residuals():
    # on the innovation scale the resample is fitted + a_hat * w
    from itsinfer.sarimax import css_residuals
    from itsinfer.simulation import large_daily_spec
    g = large_daily_spec(seed=21)
    y = gen_sarima(g)
    X = g.regressors(y)
    res = fit(y, X, SarimaOrder(0, 1, 1, 0, 1, 1, 7))
    w = dwb_multipliers(res.residuals.size, DwbConfig(), np.random.default_rng(5))
    ystar = dwb_resample(y, res, X, multipliers=w)
    a_star = css_residuals(res.params, ystar, X, res.order)
    np.testing.assert_allclose(a_star, res.residuals * w, atol=1e-6 * np.abs(res.residuals).max())
    assert np.var(a_star) == pytest.approx(np.var(res.residuals), rel=0.05)


def test_dwb_resample_zero_residuals_ignores_multipliers():
    from dataclasses import replace
    y, X = _data(-2.0, seed=4)
    res = fit(y, X, SarimaOrder(1, 0, 0, 0, 1, 1, 7))
    zero = replace(res, residuals=np.zeros_like(res.residuals))
    n = res.residuals.size
    a = dwb_resample(y, zero, X, multipliers=np.ones(n))
    b = dwb_resample(y, zero, X, multipliers=dwb_multipliers(n, DwbConfig(), np.random.default_rng(0)))
    np.testing.assert_array_equal(a.values, b.values)


def test_max_t_single_model_is_percentile_t():
    y, X = _data(0.0, seed=8)
    uni = [SarimaOrder(0, 0, 0, 0, 1, 1, 7)]
    mt = max_t(y, X, uni, "iv", 0.1, DwbConfig(7, 30, 1))
    np.testing.assert_allclose(mt.max_stats, np.abs(mt.tgrid[0]))
    assert mt.threshold == pytest.approx(np.quantile(np.abs(mt.tgrid[0]), 0.9))
