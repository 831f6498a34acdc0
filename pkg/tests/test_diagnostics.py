import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from itsinfer.diagnostics import (UndefinedAcfError, acf, adf_test, durbin_levinson, ljung_box,
                                  pacf, qq_data, white_noise_verdict)
from oracles import naive_acf

noise = arrays(np.float64, st.integers(30, 200), elements=st.floats(-100, 100, allow_nan=False))


def test_acf_matches_double_loop_oracle(rng):
    for _ in range(200):
        n = int(rng.integers(10, 501))
        x = rng.normal(size=n) * rng.uniform(0.1, 100) + rng.normal() * 50
        L = int(rng.integers(1, min(40, n - 1) + 1))
        got = acf(x, L).autocorrelations
        np.testing.assert_allclose(got, naive_acf(list(x), L), rtol=1e-12, atol=1e-12)


def test_acf_band_and_rows():
    a = acf(np.arange(100.0) % 3, 5)
    assert a.band == pytest.approx(0.2)
    assert [r[0] for r in a.to_rows()] == [1, 2, 3, 4, 5]


def test_acf_constant_series_raises():
    with pytest.raises(UndefinedAcfError):
        acf(np.ones(20), 3)
    with pytest.raises(ValueError):
        acf(np.arange(5.0), 5)


@pytest.mark.parametrize("phi", [[0.6], [0.5, -0.3], [0.2, 0.3, -0.25]])
def test_pacf_of_ar_population_acf_cuts_off(phi):
    # population ACF from the Yule-Walker recursion
    p = len(phi)
    L = 15
    A = np.eye(p)
    b = np.zeros(p)
    for k in range(1, p + 1):
        b[k - 1] = phi[k - 1]
        for j in range(1, p + 1):
            lag = abs(k - j)
            if lag:
                A[k - 1, lag - 1] -= phi[j - 1]
    rho = list(np.linalg.solve(A, b))
    while len(rho) < L:
        rho.append(sum(phi[j] * rho[len(rho) - 1 - j] for j in range(p)))
    out = durbin_levinson(rho)
    assert out[p - 1] == pytest.approx(phi[-1], abs=1e-10)
    np.testing.assert_allclose(out[p:], 0.0, atol=1e-10)


def test_pacf_sample_ar1(rng):
    e = rng.normal(size=5000)
    x = np.zeros_like(e)
    for t in range(1, e.size):
        x[t] = 0.7 * x[t - 1] + e[t]
    pa = pacf(x, 5)
    assert pa[0] == pytest.approx(0.7, abs=0.03)
    assert np.all(np.abs(pa[1:]) < 0.05)


@given(noise, st.floats(0.01, 100), st.floats(-1e3, 1e3))
@settings(max_examples=60, deadline=None)
def test_ljung_box_affine_invariant(x, scale, shift):
    if np.ptp(x) < 1e-6:
        return
    q1, p1 = ljung_box(x, 10)
    q2, p2 = ljung_box(shift + scale * x, 10)
    assert q2 == pytest.approx(q1, rel=1e-9, abs=1e-9)


def test_ljung_box_hand_value():
    x = np.array([1.0, -1.0, 2.0, 0.0, -2.0, 1.0])
    r = naive_acf(list(x), 2)
    n = 6
    want = n * (n + 2) * (r[0] ** 2 / 5 + r[1] ** 2 / 4)
    q, p = ljung_box(x, 2)
    assert q == pytest.approx(want, rel=1e-12)
    with pytest.raises(ValueError):
        ljung_box(x, 2, fitted_params=2)


def test_ljung_box_matches_statsmodels(rng):
    sm = pytest.importorskip("statsmodels.stats.diagnostic")
    x = rng.normal(size=400)
    q, p = ljung_box(x, 28, fitted_params=2)
    ref = sm.acorr_ljungbox(x, lags=[28], model_df=2)
    assert q == pytest.approx(float(ref["lb_stat"].iloc[0]), rel=1e-10)
    assert p == pytest.approx(float(ref["lb_pvalue"].iloc[0]), rel=1e-8)


@given(noise)
def test_qq_data_sorted(x):
    q = qq_data(x)
    assert np.all(np.diff(q[:, 0]) > 0)
    assert np.all(np.diff(q[:, 1]) >= 0)


@pytest.mark.parametrize("trend", ["none", "constant", "constant_and_trend"])
@pytest.mark.parametrize("lags", [0, 3])
def test_adf_matches_statsmodels(rng, trend, lags):
    st_ = pytest.importorskip("statsmodels.tsa.stattools")
    x = rng.normal(size=300).cumsum() * 0.3 + rng.normal(size=300)
    res = adf_test(x, lags, trend)
    ref = st_.adfuller(x, maxlag=lags, autolag=None,
                       regression={"none": "n", "constant": "c", "constant_and_trend": "ct"}[trend])
    assert res.statistic == pytest.approx(ref[0], rel=1e-9)
    assert res.n_obs == ref[3]


def test_adf_rejects_stationary_not_random_walk(rng):
    assert adf_test(rng.normal(size=500)).reject[0.05]
    walk = rng.normal(size=500).cumsum()
    assert not adf_test(walk).reject[0.01]


def test_white_noise_verdict(rng):
    v = white_noise_verdict(rng.normal(size=2000), 0)
    assert v.passes and v.max_abs_acf < 0.1 and 0 < v.ljung_box_pvalue <= 1
    x = np.zeros(2000)
    e = rng.normal(size=2000)
    for t in range(1, 2000):
        x[t] = 0.5 * x[t - 1] + e[t]
    assert not white_noise_verdict(x).passes
