# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled ARMA recursions behind the conditional sum of squares objective.

Every function here has a pure-Python twin in :mod:`itsinfer._pykernels`
with identical semantics; :mod:`itsinfer.kernels` picks one at import.

Polynomial convention: an operator is ``1 + sum_i c_i B**lag_i`` and is
passed as parallel ``lags`` / ``coefs`` arrays without the lag-0 term.
Factor parameters (phi, theta, seasonal phi, seasonal theta) follow the
Box-Jenkins sign, i.e. ``phi(B) = 1 - phi_1 B - ... - phi_p B**p``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, INFINITY, isfinite
from libc.stdlib cimport malloc, free

cnp.import_array()

BACKEND = "cython"


cdef bint _stable(const double* c, int p, double* work) noexcept nogil:
    # Step-down (reverse Levinson) test: roots of 1 - sum c_i z^i lie outside
    # the unit circle iff every reflection coefficient is inside (-1, 1).
    cdef int m, j
    cdef double kappa, denom, a, b
    for j in range(p):
        work[j] = c[j]
    m = p
    while m > 0:
        kappa = work[m - 1]
        if not (fabs(kappa) < 1.0):
            return False
        denom = 1.0 - kappa * kappa
        j = 0
        while j < (m - 1) - j - 1:
            a = work[j]
            b = work[m - 2 - j]
            work[j] = (a + kappa * b) / denom
            work[m - 2 - j] = (b + kappa * a) / denom
            j += 1
        if j == (m - 1) - j - 1:
            work[j] = (work[j] + kappa * work[j]) / denom
        m -= 1
    return True


def is_stable(double[::1] coefs):
    """True when ``1 - sum_i coefs[i-1] z**i`` has all roots outside |z| = 1."""
    cdef int p = coefs.shape[0]
    if p == 0:
        return True
    cdef double* work = <double*> malloc(p * sizeof(double))
    cdef bint ok
    try:
        ok = _stable(&coefs[0], p, work)
    finally:
        free(work)
    return bool(ok)


cdef int _expand(const double* f1, int n1, const double* f2, int n2, int k,
                 long* lags, double* coefs) noexcept nogil:
    # (1 - sum f1_i B^i)(1 - sum f2_j B^{jk}) -> sparse nonzero terms, lag > 0
    cdef int i, j, cnt = 0, deg = n1 + n2 * k
    cdef double v
    cdef int lag
    for lag in range(1, deg + 1):
        v = 0.0
        # contributions: -f1_lag (j=0), -f2_j (i=0, lag=jk), +f1_i f2_j (lag=i+jk)
        for j in range(0, n2 + 1):
            i = lag - j * k
            if i < 0:
                break
            if i > n1:
                continue
            if j == 0:
                if i >= 1:
                    v -= f1[i - 1]
            elif i == 0:
                v -= f2[j - 1]
            else:
                v += f1[i - 1] * f2[j - 1]
        if v != 0.0:
            lags[cnt] = lag
            coefs[cnt] = v
            cnt += 1
    return cnt


def expand(double[::1] f1, double[::1] f2, int k):
    """Sparse product ``(1 - sum f1_i B^i)(1 - sum f2_j B^{jk})`` without lag 0."""
    cdef int n1 = f1.shape[0], n2 = f2.shape[0]
    cdef int deg = n1 + n2 * k
    lags = np.zeros(max(deg, 1), dtype=np.int64)
    coefs = np.zeros(max(deg, 1), dtype=np.float64)
    cdef long[::1] lv = lags
    cdef double[::1] cv = coefs
    cdef double dummy = 0.0
    cdef int cnt = _expand(&f1[0] if n1 > 0 else &dummy, n1,
                           &f2[0] if n2 > 0 else &dummy, n2, k, &lv[0], &cv[0])
    return lags[:cnt].copy(), coefs[:cnt].copy()


cdef void _whiten_row(const double* w, int n, double pre,
                      const long* al, const double* ac, int na,
                      const long* ml, const double* mc, int nm,
                      double* out) noexcept nogil:
    # a_t = w_t + sum ac_i w_{t-al_i} - sum mc_j a_{t-ml_j}
    # pre-sample w imputed with `pre`, pre-sample a with zero
    cdef int t, i, idx
    cdef double s
    for t in range(n):
        s = w[t]
        for i in range(na):
            idx = t - al[i]
            if idx >= 0:
                s += ac[i] * w[idx]
            else:
                s += ac[i] * pre
        for i in range(nm):
            idx = t - ml[i]
            if idx < 0:
                break
            s -= mc[i] * out[idx]
        out[t] = s


def whiten(double[:, ::1] w, long[::1] ar_lags, double[::1] ar_coefs,
           long[::1] ma_lags, double[::1] ma_coefs, double[::1] presample):
    """Run the inverse ARMA filter on each row of ``w``.

    Parameters
    ----------
    w : ndarray, shape (c, n)
        Differenced, mean-adjusted rows.
    ar_lags, ar_coefs, ma_lags, ma_coefs : ndarray
        Sparse AR and MA operators (lag 0 omitted, lags ascending).
    presample : ndarray, shape (c,)
        Value imputed for each row before its first observation.

    Returns
    -------
    ndarray, shape (c, n)
        Conditional innovations.
    """
    cdef int c = w.shape[0], n = w.shape[1], r
    out = np.empty((c, n), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef long dl = 0
    cdef double dc = 0.0
    cdef int na = ar_lags.shape[0], nm = ma_lags.shape[0]
    if n == 0:
        return out
    with nogil:
        for r in range(c):
            _whiten_row(&w[r, 0], n, presample[r],
                        &ar_lags[0] if na > 0 else &dl, &ar_coefs[0] if na > 0 else &dc, na,
                        &ma_lags[0] if nm > 0 else &dl, &ma_coefs[0] if nm > 0 else &dc, nm,
                        &ov[r, 0])
    return out


def color(double[::1] innov, long[::1] ar_lags, double[::1] ar_coefs,
          long[::1] ma_lags, double[::1] ma_coefs, double presample):
    """Inverse of :func:`whiten` for one row.

    ``w_t = a_t + sum mc_j a_{t-j} - sum ac_i w_{t-i}`` with pre-sample
    ``w`` equal to ``presample`` and pre-sample ``a`` equal to zero.
    """
    cdef int n = innov.shape[0], t, i, idx
    cdef int na = ar_lags.shape[0], nm = ma_lags.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef double s
    with nogil:
        for t in range(n):
            s = innov[t]
            for i in range(nm):
                idx = t - ma_lags[i]
                if idx < 0:
                    break
                s += ma_coefs[i] * innov[idx]
            for i in range(na):
                idx = t - ar_lags[i]
                if idx >= 0:
                    s -= ar_coefs[i] * ov[idx]
                else:
                    s -= ar_coefs[i] * presample
            ov[t] = s
    return out


cdef class _Operators:
    cdef long* al
    cdef double* ac
    cdef int na
    cdef long* ml
    cdef double* mc
    cdef int nm
    cdef double* work

    def __cinit__(self, int max_ar, int max_ma, int max_factor):
        self.al = <long*> malloc((max_ar + 1) * sizeof(long))
        self.ac = <double*> malloc((max_ar + 1) * sizeof(double))
        self.ml = <long*> malloc((max_ma + 1) * sizeof(long))
        self.mc = <double*> malloc((max_ma + 1) * sizeof(double))
        self.work = <double*> malloc((max_factor + 1) * sizeof(double))
        self.na = 0
        self.nm = 0

    def __dealloc__(self):
        free(self.al)
        free(self.ac)
        free(self.ml)
        free(self.mc)
        free(self.work)


cdef bint _build(const double* x, int p, int q, int P, int Q, int k,
                 _Operators ops) noexcept:
    # x = [phi(p), theta(q), Phi(P), Theta(Q)]; returns False when inadmissible
    if not _stable(x, p, ops.work):
        return False
    if not _stable(x + p, q, ops.work):
        return False
    if not _stable(x + p + q, P, ops.work):
        return False
    if not _stable(x + p + q + P, Q, ops.work):
        return False
    ops.na = _expand(x, p, x + p + q, P, k, ops.al, ops.ac)
    ops.nm = _expand(x + p, q, x + p + q + P, Q, k, ops.ml, ops.mc)
    return True


def css_value(double[::1] arma, int p, int q, int P, int Q, int k, double[::1] z):
    """Conditional sum of squares of one mean-adjusted differenced series.

    Returns ``inf`` when any factor is non-stationary or non-invertible or
    when the recursion produces a non-finite value.
    """
    cdef int n = z.shape[0], t
    cdef int mf = max(max(p, q), max(P, Q))
    cdef _Operators ops = _Operators(p + P * k, q + Q * k, mf)
    cdef double dummy = 0.0
    if not _build(&arma[0] if arma.shape[0] > 0 else &dummy, p, q, P, Q, k, ops):
        return INFINITY
    if n == 0:
        return 0.0
    cdef double pre = 0.0, css = 0.0
    for t in range(n):
        pre += z[t]
    pre /= n
    cdef double* buf = <double*> malloc(n * sizeof(double))
    try:
        _whiten_row(&z[0], n, pre, ops.al, ops.ac, ops.na, ops.ml, ops.mc, ops.nm, buf)
        for t in range(n):
            css += buf[t] * buf[t]
    finally:
        free(buf)
    if not isfinite(css):
        return INFINITY
    return css


def residuals(double[::1] arma, int p, int q, int P, int Q, int k, double[::1] z):
    """Conditional innovations of ``z``; ``None`` when inadmissible."""
    cdef int n = z.shape[0], t
    cdef int mf = max(max(p, q), max(P, Q))
    cdef _Operators ops = _Operators(p + P * k, q + Q * k, mf)
    cdef double dummy = 0.0
    if not _build(&arma[0] if arma.shape[0] > 0 else &dummy, p, q, P, Q, k, ops):
        return None
    out = np.empty(n, dtype=np.float64)
    if n == 0:
        return out
    cdef double[::1] ov = out
    cdef double pre = 0.0
    for t in range(n):
        pre += z[t]
    pre /= n
    _whiten_row(&z[0], n, pre, ops.al, ops.ac, ops.na, ops.ml, ops.mc, ops.nm, &ov[0])
    return out




cdef double _nan = float("nan")


cdef class ProfileProblem:
    """Differenced data plus workspace for repeated CSS evaluations.

    ``cols[0]`` is the differenced response, ``cols[1:]`` the differenced
    regressors. The profile objective concentrates the regression
    coefficients out by least squares on the whitened rows; the full
    objective takes ``theta = [beta..., arma...]``.
    """

    cdef double[:, ::1] cols
    cdef readonly int c, n, nbeta, narma, p, q, P, Q, k
    cdef readonly long evaluations
    cdef _Operators ops
    cdef double* buf
    cdef double* means
    cdef double* G
    cdef double* L
    cdef double* rhs
    cdef double* beta
    cdef double* zbuf

    def __cinit__(self, double[:, ::1] cols, int p, int q, int P, int Q, int k):
        cdef int r, t
        cdef double acc
        self.cols = cols
        self.c = cols.shape[0]
        self.n = cols.shape[1]
        self.nbeta = self.c - 1
        self.p, self.q, self.P, self.Q, self.k = p, q, P, Q, k
        self.narma = p + q + P + Q
        self.evaluations = 0
        self.ops = _Operators(p + P * k, q + Q * k, max(max(p, q), max(P, Q)))
        self.buf = <double*> malloc(max(self.c * self.n, 1) * sizeof(double))
        self.zbuf = <double*> malloc(max(self.n, 1) * sizeof(double))
        self.means = <double*> malloc(self.c * sizeof(double))
        self.G = <double*> malloc(self.c * self.c * sizeof(double))
        self.L = <double*> malloc(max(self.nbeta * self.nbeta, 1) * sizeof(double))
        self.rhs = <double*> malloc(max(self.nbeta, 1) * sizeof(double))
        self.beta = <double*> malloc(max(self.nbeta, 1) * sizeof(double))
        for r in range(self.c):
            acc = 0.0
            for t in range(self.n):
                acc += cols[r, t]
            self.means[r] = acc / self.n if self.n > 0 else 0.0
        for r in range(self.nbeta):
            self.beta[r] = 0.0

    def __dealloc__(self):
        free(self.buf)
        free(self.zbuf)
        free(self.means)
        free(self.G)
        free(self.L)
        free(self.rhs)
        free(self.beta)

    cdef double _profile(self, const double* x) noexcept:
        cdef int c = self.c, n = self.n, J = self.nbeta
        cdef int r, s, t, i
        cdef double acc, css
        cdef double* buf = self.buf
        cdef double* G = self.G
        cdef double* L = self.L
        self.evaluations += 1
        if not _build(x, self.p, self.q, self.P, self.Q, self.k, self.ops):
            return INFINITY
        if n == 0:
            return 0.0
        for r in range(c):
            _whiten_row(&self.cols[r, 0], n, self.means[r], self.ops.al, self.ops.ac,
                        self.ops.na, self.ops.ml, self.ops.mc, self.ops.nm, buf + r * n)
        for r in range(c):
            for s in range(r, c):
                acc = 0.0
                for t in range(n):
                    acc += buf[r * n + t] * buf[s * n + t]
                G[r * c + s] = acc
                G[s * c + r] = acc
        css = G[0]
        for i in range(J):
            for s in range(i + 1):
                acc = G[(i + 1) * c + (s + 1)]
                for t in range(s):
                    acc -= L[i * J + t] * L[s * J + t]
                if i == s:
                    if not (acc > 1e-12 * (1.0 + fabs(G[(i + 1) * c + (i + 1)]))):
                        return INFINITY
                    L[i * J + i] = sqrt(acc)
                else:
                    L[i * J + s] = acc / L[s * J + s]
        for i in range(J):
            acc = G[(i + 1) * c]
            for t in range(i):
                acc -= L[i * J + t] * self.rhs[t]
            self.rhs[i] = acc / L[i * J + i]
            css -= self.rhs[i] * self.rhs[i]
        for i in range(J - 1, -1, -1):
            acc = self.rhs[i]
            for t in range(i + 1, J):
                acc -= L[t * J + i] * self.beta[t]
            self.beta[i] = acc / L[i * J + i]
        if css < 0.0:
            css = 0.0
        if not isfinite(css):
            return INFINITY
        return css

    cdef double _full(self, const double* theta) noexcept:
        cdef int n = self.n, J = self.nbeta, t, j
        cdef double pre, css = 0.0, v
        self.evaluations += 1
        if not _build(theta + J, self.p, self.q, self.P, self.Q, self.k, self.ops):
            return INFINITY
        pre = self.means[0]
        for j in range(J):
            pre -= theta[j] * self.means[j + 1]
        for t in range(n):
            v = self.cols[0, t]
            for j in range(J):
                v -= theta[j] * self.cols[j + 1, t]
            self.buf[t] = v
        _whiten_row(self.buf, n, pre, self.ops.al, self.ops.ac, self.ops.na,
                    self.ops.ml, self.ops.mc, self.ops.nm, self.zbuf)
        for t in range(n):
            css += self.zbuf[t] * self.zbuf[t]
        if not isfinite(css):
            return INFINITY
        return css

    cdef double _eval(self, const double* x, int full, double scale) noexcept:
        if full:
            return self._full(x) / scale
        return self._profile(x) / scale

    cdef void _gradient(self, double* x, int m, int full, double scale, double step,
                        double fx, double* g) noexcept:
        # central differences; one-sided on the admissible side near the boundary
        cdef int i
        cdef double h, xi, fp, fm
        for i in range(m):
            xi = x[i]
            h = step * (fabs(xi) if fabs(xi) > 1.0 else 1.0)
            x[i] = xi + h
            fp = self._eval(x, full, scale)
            x[i] = xi - h
            fm = self._eval(x, full, scale)
            x[i] = xi
            if isfinite(fp) and isfinite(fm):
                g[i] = (fp - fm) / (2.0 * h)
            elif isfinite(fp):
                g[i] = (fp - fx) / h
            elif isfinite(fm):
                g[i] = (fx - fm) / h
            else:
                g[i] = 0.0

    def profile(self, x):
        """Return ``(css, beta)`` at ARMA coefficients ``x``."""
        cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
        cdef double dummy = 0.0
        cdef double css = self._profile(&xv[0] if xv.shape[0] > 0 else &dummy)
        out = np.array([self.beta[i] for i in range(self.nbeta)], dtype=np.float64)
        return css, out

    def full(self, theta):
        """CSS at ``theta = [beta..., arma...]``."""
        cdef double[::1] tv = np.ascontiguousarray(theta, dtype=np.float64)
        cdef double dummy = 0.0
        return self._full(&tv[0] if tv.shape[0] > 0 else &dummy)

    def gradient(self, x, double step, bint full=False):
        """Finite-difference gradient of the unscaled profile (or full) CSS."""
        cdef double[::1] xv = np.array(x, dtype=np.float64)
        cdef int m = xv.shape[0]
        g = np.zeros(m)
        cdef double[::1] gv = g
        cdef double dummy = 0.0
        if m == 0:
            return g
        cdef double fx = self._eval(&xv[0], full, 1.0)
        self._gradient(&xv[0], m, full, 1.0, step, fx, &gv[0])
        return g

    def hessian(self, theta, double step):
        """Central second differences of the full CSS at ``theta``."""
        cdef double[::1] x = np.array(theta, dtype=np.float64)
        cdef int m = x.shape[0], i, j
        H = np.zeros((m, m))
        cdef double[:, ::1] Hv = H
        if m == 0:
            return H
        cdef double* h = <double*> malloc(m * sizeof(double))
        cdef double f0, fp, fm, a, b, c_, d, xi, xj
        try:
            for i in range(m):
                h[i] = step * (fabs(x[i]) if fabs(x[i]) > 1.0 else 1.0)
            f0 = self._full(&x[0])
            for i in range(m):
                xi = x[i]
                x[i] = xi + h[i]
                fp = self._full(&x[0])
                x[i] = xi - h[i]
                fm = self._full(&x[0])
                x[i] = xi
                Hv[i, i] = (fp - 2.0 * f0 + fm) / (h[i] * h[i])
            for i in range(m):
                for j in range(i + 1, m):
                    xi = x[i]
                    xj = x[j]
                    x[i] = xi + h[i]; x[j] = xj + h[j]
                    a = self._full(&x[0])
                    x[j] = xj - h[j]
                    b = self._full(&x[0])
                    x[i] = xi - h[i]
                    d = self._full(&x[0])
                    x[j] = xj + h[j]
                    c_ = self._full(&x[0])
                    x[i] = xi; x[j] = xj
                    Hv[i, j] = (a - b - c_ + d) / (4.0 * h[i] * h[j])
                    Hv[j, i] = Hv[i, j]
        finally:
            free(h)
        return H

    def minimize(self, x0, double simplex_step=0.1, int max_iter=500,
                 double nm_xatol=1e-5, double nm_fatol=1e-8,
                 double gtol=1e-7, double ftol=1e-10, double fd_step=1e-5):
        """Nelder-Mead then BFGS on the scaled profile objective.

        Returns ``(x, css, nm_iterations, bfgs_iterations, status)`` where
        status is one of ``"gtol"``, ``"ftol"``, ``"maxiter"``,
        ``"linesearch"`` or ``"none"`` (no ARMA coefficients).
        """
        cdef int m = self.narma
        cdef double[::1] xs = np.array(x0, dtype=np.float64)
        if m == 0:
            css, _ = self.profile(xs)
            return np.asarray(xs).copy(), css, 0, 0, "none"
        cdef double scale = self._profile(&xs[0])
        if not isfinite(scale) or scale <= 0.0:
            scale = 1.0
        sim_np = np.empty((m + 1, m))
        fs_np = np.empty(m + 1)
        cdef double[:, ::1] sim = sim_np
        cdef double[::1] fs = fs_np
        xbar_np = np.empty(m); xr_np = np.empty(m); xe_np = np.empty(m); xc_np = np.empty(m)
        cdef double[::1] xbar = xbar_np, xr = xr_np, xe = xe_np, xc = xc_np
        cdef int i, j, it, nm_it = 0, bf_it = 0, halvings, ls
        cdef double fr, fe, fc, dmax, tmp
        cdef bint shrink

        # initial simplex; vertices outside the admissible region are pulled back
        for j in range(m):
            sim[0, j] = xs[j]
        fs[0] = self._eval(&sim[0, 0], 0, scale)
        for i in range(1, m + 1):
            for j in range(m):
                sim[i, j] = xs[j]
            sim[i, i - 1] += simplex_step
            fs[i] = self._eval(&sim[i, 0], 0, scale)
            halvings = 0
            while not isfinite(fs[i]) and halvings < 60:
                for j in range(m):
                    sim[i, j] = 0.5 * (sim[i, j] + xs[j])
                fs[i] = self._eval(&sim[i, 0], 0, scale)
                halvings += 1
        _sort_simplex(sim, fs, m)

        while nm_it < max_iter:
            dmax = 0.0
            for i in range(1, m + 1):
                for j in range(m):
                    tmp = fabs(sim[i, j] - sim[0, j])
                    if tmp > dmax:
                        dmax = tmp
            tmp = 0.0
            for i in range(1, m + 1):
                if fabs(fs[0] - fs[i]) > tmp or not isfinite(fs[i]):
                    tmp = fabs(fs[0] - fs[i]) if isfinite(fs[i]) else INFINITY
            if dmax <= nm_xatol and tmp <= nm_fatol:
                break
            for j in range(m):
                xbar[j] = 0.0
                for i in range(m):
                    xbar[j] += sim[i, j]
                xbar[j] /= m
            for j in range(m):
                xr[j] = 2.0 * xbar[j] - sim[m, j]
            fr = self._eval(&xr[0], 0, scale)
            shrink = False
            if fr < fs[0]:
                for j in range(m):
                    xe[j] = 3.0 * xbar[j] - 2.0 * sim[m, j]
                fe = self._eval(&xe[0], 0, scale)
                if fe < fr:
                    for j in range(m):
                        sim[m, j] = xe[j]
                    fs[m] = fe
                else:
                    for j in range(m):
                        sim[m, j] = xr[j]
                    fs[m] = fr
            elif fr < fs[m - 1]:
                for j in range(m):
                    sim[m, j] = xr[j]
                fs[m] = fr
            elif fr < fs[m]:
                for j in range(m):
                    xc[j] = 1.5 * xbar[j] - 0.5 * sim[m, j]
                fc = self._eval(&xc[0], 0, scale)
                if fc <= fr:
                    for j in range(m):
                        sim[m, j] = xc[j]
                    fs[m] = fc
                else:
                    shrink = True
            else:
                for j in range(m):
                    xc[j] = 0.5 * xbar[j] + 0.5 * sim[m, j]
                fc = self._eval(&xc[0], 0, scale)
                if fc < fs[m]:
                    for j in range(m):
                        sim[m, j] = xc[j]
                    fs[m] = fc
                else:
                    shrink = True
            if shrink:
                for i in range(1, m + 1):
                    for j in range(m):
                        sim[i, j] = sim[0, j] + 0.5 * (sim[i, j] - sim[0, j])
                    fs[i] = self._eval(&sim[i, 0], 0, scale)
            _sort_simplex(sim, fs, m)
            nm_it += 1

        # BFGS polish
        x_np = np.array(sim_np[0]); g_np = np.empty(m); d_np = np.empty(m)
        xn_np = np.empty(m); gn_np = np.empty(m); s_np = np.empty(m); y_np = np.empty(m)
        Hi_np = np.eye(m); hy_np = np.empty(m)
        cdef double[::1] x = x_np, g = g_np, d = d_np, xn = xn_np, gn = gn_np, sv = s_np, yv = y_np, hy = hy_np
        cdef double[:, ::1] Hi = Hi_np
        cdef double f = fs[0], fn, gd, alpha, sy, yhy, gmax, snorm, ynorm
        status = "maxiter"
        self._gradient(&x[0], m, 0, scale, fd_step, f, &g[0])
        while bf_it < max_iter:
            gmax = 0.0
            for j in range(m):
                if fabs(g[j]) > gmax:
                    gmax = fabs(g[j])
            if gmax <= gtol:
                status = "gtol"
                break
            gd = 0.0
            for i in range(m):
                d[i] = 0.0
                for j in range(m):
                    d[i] -= Hi[i, j] * g[j]
                gd += d[i] * g[i]
            if not (gd < 0.0):
                for i in range(m):
                    for j in range(m):
                        Hi[i, j] = 1.0 if i == j else 0.0
                    d[i] = -g[i]
                gd = 0.0
                for i in range(m):
                    gd -= g[i] * g[i]
            alpha = 1.0
            if bf_it == 0:
                dmax = 0.0
                for j in range(m):
                    if fabs(d[j]) > dmax:
                        dmax = fabs(d[j])
                if dmax > simplex_step:
                    alpha = simplex_step / dmax
            fn = INFINITY
            for ls in range(60):
                for j in range(m):
                    xn[j] = x[j] + alpha * d[j]
                fn = self._eval(&xn[0], 0, scale)
                if fn <= f + 1e-4 * alpha * gd:
                    break
                alpha *= 0.5
            else:
                status = "linesearch"
                break
            self._gradient(&xn[0], m, 0, scale, fd_step, fn, &gn[0])
            sy = 0.0; snorm = 0.0; ynorm = 0.0
            for j in range(m):
                sv[j] = xn[j] - x[j]
                yv[j] = gn[j] - g[j]
                sy += sv[j] * yv[j]
                snorm += sv[j] * sv[j]
                ynorm += yv[j] * yv[j]
            if sy > 1e-12 * sqrt(snorm * ynorm):
                if bf_it == 0:
                    for i in range(m):
                        for j in range(m):
                            Hi[i, j] = (sy / ynorm) if i == j else 0.0
                yhy = 0.0
                for i in range(m):
                    hy[i] = 0.0
                    for j in range(m):
                        hy[i] += Hi[i, j] * yv[j]
                    yhy += yv[i] * hy[i]
                for i in range(m):
                    for j in range(m):
                        Hi[i, j] += ((sy + yhy) * sv[i] * sv[j] / (sy * sy)
                                     - (hy[i] * sv[j] + sv[i] * hy[j]) / sy)
            bf_it += 1
            tmp = fabs(f - fn)
            for j in range(m):
                x[j] = xn[j]
                g[j] = gn[j]
            dmax = f
            f = fn
            if tmp <= ftol * max(fabs(dmax), fabs(fn)):
                status = "ftol"
                break
        return x_np, f * scale, nm_it, bf_it, status


cdef void _sort_simplex(double[:, ::1] sim, double[::1] fs, int m) noexcept:
    # stable insertion sort of vertices by objective value
    cdef int i, j, l
    cdef double fv, tmp
    for i in range(1, m + 1):
        j = i
        while j > 0 and fs[j] < fs[j - 1]:
            fv = fs[j]; fs[j] = fs[j - 1]; fs[j - 1] = fv
            for l in range(m):
                tmp = sim[j, l]; sim[j, l] = sim[j - 1, l]; sim[j - 1, l] = tmp
            j -= 1


def profile_css(double[::1] arma, int p, int q, int P, int Q, int k,
                double[:, ::1] cols, double[::1] beta):
    """CSS with regression coefficients concentrated out.

    ``cols[0]`` is the differenced response and ``cols[1:]`` the differenced
    regressors. Each row is whitened with its own mean as pre-sample value,
    so the whitened response minus whitened regressors times ``beta`` equals
    the innovations of the mean-adjusted series. ``beta`` receives the
    least-squares coefficients. Returns ``inf`` when inadmissible.
    """
    prob = ProfileProblem(cols, p, q, P, Q, k)
    css, b = prob.profile(arma)
    if np.isfinite(css):
        for i in range(b.shape[0]):
            beta[i] = b[i]
    return css
