import datetime as dt

import numpy as np
import pytest

from itsinfer.diagnostics import adf_test, white_noise_verdict
from itsinfer.sarimax import InterventionSpec, SarimaOrder, SarimaParams, fit
from itsinfer.series import difference_array
from itsinfer.simulation import (GeneratorSpec, InterventionEffect, LinearProcessSpec,
                                 forward_stepwise, gen_linear_process, gen_sarima,
                                 mc_error_rate_study, large_daily_spec, post_selection_demo,
                                 universe_orders)

START = dt.date(2000, 1, 1)


def test_linear_process_moments():
    y = gen_linear_process(LinearProcessSpec((0.5, 0.25), 2.0, 3.0), 200_000, seed=1).values
    assert y.mean() == pytest.approx(3.0, abs=0.03)
    assert y.var() == pytest.approx(4 * (1 + 0.25 + 0.0625), rel=0.02)
    acf1 = np.corrcoef(y[1:], y[:-1])[0, 1]
    assert acf1 == pytest.approx((0.5 + 0.5 * 0.25) / 1.3125, abs=0.01)


def test_generators_bit_deterministic():
    g = large_daily_spec(n=500, seed=3)
    np.testing.assert_array_equal(gen_sarima(g).values, gen_sarima(g).values)
    assert not np.array_equal(gen_sarima(g).values, gen_sarima(g.with_seed(4)).values)
    spec = LinearProcessSpec((0.3,))
    np.testing.assert_array_equal(gen_linear_process(spec, 50, 9).values,
                                  gen_linear_process(spec, 50, 9).values)


def test_generator_validation():
    with pytest.raises(ValueError, match="stationary"):
        GeneratorSpec(SarimaOrder(1, 0, 0), SarimaParams([0.0], phi=[1.1]), 100)
    with pytest.raises(ValueError, match="burn_in"):
        GeneratorSpec(SarimaOrder(0, 0, 0, 0, 1, 1, 7), SarimaParams([0.0], seasonal_theta=[.5]),
                      100, burn_in=20)
    with pytest.raises(ValueError):
        InterventionEffect(InterventionSpec("a", "step", START), 1.0, delta=1.5)


def test_intervention_effect_decay():
    s = gen_sarima(GeneratorSpec(SarimaOrder(), SarimaParams([0.0], sigma2=1e-20), 6, 10, (
        InterventionEffect(InterventionSpec("p", "pulse", START + dt.timedelta(days=2)), 4.0, 0.5),),
        start_date=START))
    np.testing.assert_allclose(s.values, [0, 0, 4, 2, 1, 0.5], atol=1e-8)


def test_white_noise_generator_passes_verdict():
    # the fixed .10 screen is about 4.5 standard errors at n = 2000
    passes = 0
    for seed in range(200):
        y = gen_sarima(GeneratorSpec(SarimaOrder(), SarimaParams([0.0]), 2000, seed=seed))
        passes += white_noise_verdict(y.values).passes
    assert passes / 200 >= 0.99


def test_differenced_integrated_series_rejects_unit_root():
    rejects = 0
    for seed in range(100):
        y = gen_sarima(GeneratorSpec(SarimaOrder(1, 1, 0), SarimaParams([0.0], phi=[0.5]), 500,
                                     seed=seed))
        rejects += adf_test(difference_array(y.values, 1), 2).reject[0.05]
    assert rejects / 100 >= 0.95


@pytest.mark.parametrize("order,params", [
    (SarimaOrder(1, 0, 1), SarimaParams([2.0], phi=[0.6], theta=[0.3])),
    (SarimaOrder(0, 1, 1, 0, 1, 1, 7), SarimaParams([0.0], theta=[-0.5], seasonal_theta=[0.8])),
    (SarimaOrder(2, 0, 0), SarimaParams([0.0], phi=[0.5, -0.3])),
])
def test_fit_recovers_generator_round_trip(order, params):
    covered, total = 0, 0
    truth = params.arma_vector()
    for seed in range(40):
        g = GeneratorSpec(order, params, 2000, seed=seed)
        res = fit(gen_sarima(g), None, order)
        if not res.converged:
            continue
        est = res.params.arma_vector()
        se = res.std_errors[-truth.size:]
        covered += int(np.all(np.abs(est - truth) <= 3 * se))
        total += 1
    assert total >= 38 and covered / total >= 0.95


def test_large_daily_spec_matches_level_and_sd():
    g = large_daily_spec(seed=0, n=8400)
    ys = [gen_sarima(g.with_seed(s)).values for s in range(20)]
    assert np.mean([y.mean() for y in ys]) == pytest.approx(729, rel=0.05)
    assert np.mean([y.std(ddof=1) for y in ys]) == pytest.approx(467, rel=0.05)
    assert g.interventions[0].spec.name == "intervention"
    assert g.order.label == "(0,1,1)x(0,1,1)_7"


def test_universe_orders_lexicographic():
    u = universe_orders()
    assert len(u) == 27 and u[0].label == "(0,0,0)x(0,1,1)_7" and u[-1].label == "(2,2,2)x(0,1,1)_7"
    assert [(o.p, o.d, o.q) for o in u] == sorted((o.p, o.d, o.q) for o in u)
    with pytest.raises(ValueError):
        universe_orders(p=())


def test_forward_stepwise_picks_strong_predictor(rng):
    X = rng.normal(size=(300, 4))
    y = 2 * X[:, 2] + rng.normal(size=300)
    assert forward_stepwise(X, y, 2.0)[0] == 2


def test_post_selection_no_threshold_centered():
    r = post_selection_demo(n=100, replications=300, threshold=0.0, seed=1)
    assert r.selection_rate == 1.0
    assert abs(r.estimates.mean()) < 0.05


def test_mc_study_small_and_deterministic():
    spec = InterventionSpec("iv", "step", START + dt.timedelta(days=40))
    g = GeneratorSpec(SarimaOrder(0, 0, 0, 0, 1, 1, 7), SarimaParams([5.0], seasonal_theta=[0.6]),
                      200, interventions=(InterventionEffect(spec, 0.0),), seed=11)
    uni = universe_orders(p=(0, 1), d=(0,), q=(0,))
    kw = dict(corrections=("naive", "bonferroni", "holm", "bh"), replications=6)
    a = mc_error_rate_study(uni, g, **kw)
    b = mc_error_rate_study(uni, g, **kw, workers=2)
    assert a.null_true and len(a.replicates) == 6
    for c in kw["corrections"]:
        assert a.rates[c].fwer == b.rates[c].fwer
    for ra, rb in zip(a.replicates, b.replicates):
        np.testing.assert_array_equal(ra.tstats, rb.tstats)
    rows = list(a.summary_rows())
    assert [r[0] for r in rows] == list(kw["corrections"])
    with pytest.raises(ValueError):
        mc_error_rate_study(uni, g, corrections=("magic",), replications=1)
