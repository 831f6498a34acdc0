import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from itsinfer import _pykernels, kernels
from oracles import naive_css

coef = st.floats(-0.95, 0.95, allow_nan=False)


def inverse_roots(c):
    """Eigenvalues of the companion matrix: reciprocals of the roots of 1 - sum c_i z^i."""
    m = len(c)
    A = np.zeros((m, m))
    A[0] = c
    A[1:, :-1] = np.eye(m - 1)
    return np.abs(np.linalg.eigvals(A))


def roots_stable(c):
    return len(c) == 0 or bool(np.all(inverse_roots(c) < 1.0))


@given(st.lists(st.floats(-2.5, 2.5, allow_nan=False), max_size=4))
def test_is_stable_matches_roots(c):
    want = roots_stable(c)
    # skip numerically borderline polynomials
    if len(c) and np.min(np.abs(inverse_roots(c) - 1.0)) < 1e-6:
        return
    for mod in kernels.backends():
        assert mod.is_stable(np.asarray(c, dtype=float)) == want


def test_expand_sparse_product(backend):
    lags, coefs = backend.expand(np.array([0.5]), np.array([0.3]), 7)
    assert list(lags) == [1, 7, 8]
    np.testing.assert_allclose(coefs, [-0.5, -0.3, 0.15])


@given(st.lists(coef, max_size=2), st.lists(coef, max_size=2),
       st.lists(coef, max_size=1), st.lists(coef, max_size=1), st.integers(0, 2**31))
@settings(max_examples=60, deadline=None)
def test_css_value_matches_oracle_and_twin(phi, theta, sphi, stheta, seed):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=int(rng.integers(30, 120)))
    arma = np.array(phi + theta + sphi + stheta)
    dims = (len(phi), len(theta), len(sphi), len(stheta), 7)
    vals = [mod.css_value(arma, *dims, z) for mod in kernels.backends()]
    admissible = all(roots_stable(c) for c in (phi, theta, sphi, stheta))
    if not admissible:
        assert all(v == np.inf for v in vals)
        return
    want = naive_css(z, [0.0] * z.size, 0, 0, 7, phi, theta, sphi, stheta)
    for v in vals:
        assert v == pytest.approx(want, rel=1e-10)


def test_color_inverts_whiten(backend, rng):
    ar_lags, ar = backend.expand(np.array([0.5, -0.2]), np.array([0.3]), 7)
    ma_lags, ma = backend.expand(np.array([0.4]), np.array([0.6]), 7)
    w = rng.normal(size=300)
    pre = float(w.mean())
    e = backend.whiten(w[None, :], ar_lags, ar, ma_lags, ma, np.array([pre]))[0]
    back = backend.color(e, ar_lags, ar, ma_lags, ma, pre)
    np.testing.assert_allclose(back, w, atol=1e-9)


def test_whiten_rows_use_own_presample(backend, rng):
    ar_lags, ar = backend.expand(np.array([0.5]), np.array([]), 7)
    ma_lags, ma = backend.expand(np.array([]), np.array([0.6]), 7)
    W = rng.normal(size=(3, 50))
    pre = W.mean(axis=1)
    both = backend.whiten(W, ar_lags, ar, ma_lags, ma, pre)
    for i in range(3):
        one = backend.whiten(W[i:i + 1], ar_lags, ar, ma_lags, ma, pre[i:i + 1])[0]
        np.testing.assert_allclose(both[i], one, rtol=1e-14)


def _problem_cols(rng, n=200):
    x = (np.arange(n) >= 60).astype(float)
    y = 3.0 - 2.0 * x + rng.normal(size=n)
    return np.vstack([y, x, np.ones(n)])


def test_profile_problem_backends_agree(rng):
    cols = _problem_cols(rng)
    mods = kernels.backends()
    probs = [m.ProfileProblem(cols, 1, 1, 0, 1, 7) for m in mods]
    for x in ([0.0, 0.0, 0.0], [0.3, -0.2, 0.5], [0.9, 0.1, 0.2]):
        res = [p.profile(np.array(x)) for p in probs]
        for css, beta in res[1:]:
            assert css == pytest.approx(res[0][0], rel=1e-10)
            np.testing.assert_allclose(beta, res[0][1], rtol=1e-8)
    assert probs[0].profile(np.array([1.2, 0.0, 0.0]))[0] == np.inf


def test_profile_beta_is_least_squares(backend, rng):
    cols = _problem_cols(rng)
    prob = backend.ProfileProblem(cols, 0, 0, 0, 0, 7)
    css, beta = prob.profile(np.array([]))
    X = cols[1:].T
    want, rss, *_ = np.linalg.lstsq(X, cols[0], rcond=None)
    np.testing.assert_allclose(beta, want, rtol=1e-10)
    assert css == pytest.approx(float(rss[0]), rel=1e-10)


def test_minimize_backends_agree(rng):
    cols = _problem_cols(rng, 400)
    out = []
    for m in kernels.backends():
        prob = m.ProfileProblem(cols, 1, 0, 0, 1, 7)
        x, css, nm_it, bf_it, status = prob.minimize(np.zeros(2))
        assert status in ("gtol", "ftol")
        out.append((x, css))
    for x, css in out[1:]:
        np.testing.assert_allclose(x, out[0][0], atol=1e-6)
        assert css == pytest.approx(out[0][1], rel=1e-10)


def test_full_objective_equals_profile_at_optimal_beta(backend, rng):
    cols = _problem_cols(rng)
    prob = backend.ProfileProblem(cols, 1, 0, 0, 1, 7)
    x = np.array([0.2, 0.4])
    css, beta = prob.profile(x)
    assert prob.full(np.r_[beta, x]) == pytest.approx(css, rel=1e-12)
    assert prob.full(np.r_[beta + 0.1, x]) > css


def test_pure_python_env_switch(monkeypatch):
    import importlib
    monkeypatch.setenv("ITSINFER_PURE_PYTHON", "1")
    mod = importlib.reload(kernels)
    try:
        assert mod.BACKEND == "python"
    finally:
        monkeypatch.delenv("ITSINFER_PURE_PYTHON")
        importlib.reload(kernels)


def test_compiled_backend_is_available():
    assert kernels.BACKEND == "cython", "extension not built; run pip install -e ."
    assert _pykernels.BACKEND == "python"
