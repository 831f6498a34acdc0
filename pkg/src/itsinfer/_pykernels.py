"""Pure-Python (numpy/scipy) implementations of the ARMA recursion kernels.

Mirrors :mod:`itsinfer._ckernels` function for function. Used when the
compiled extension is unavailable or ``ITSINFER_PURE_PYTHON=1`` is set.
"""

import numpy as np
from scipy.signal import lfilter, lfiltic

BACKEND = "python"


def is_stable(coefs):
    """True when ``1 - sum_i coefs[i-1] z**i`` has all roots outside |z| = 1."""
    a = [float(c) for c in coefs]
    m = len(a)
    while m > 0:
        kappa = a[m - 1]
        if not abs(kappa) < 1.0:
            return False
        denom = 1.0 - kappa * kappa
        a = [(a[j] + kappa * a[m - 2 - j]) / denom for j in range(m - 1)]
        m -= 1
    return True


def _dense(f, step):
    out = np.zeros(len(f) * step + 1)
    out[0] = 1.0
    for i, v in enumerate(f, start=1):
        out[i * step] = -v
    return out


def expand(f1, f2, k):
    """Sparse product ``(1 - sum f1_i B^i)(1 - sum f2_j B^{jk})`` without lag 0."""
    prod = np.convolve(_dense(f1, 1), _dense(f2, k))
    lags = np.flatnonzero(prod[1:]) + 1
    return lags.astype(np.int64), prod[lags].astype(np.float64)


def _dense_from_sparse(lags, coefs):
    deg = int(lags[-1]) if len(lags) else 0
    out = np.zeros(deg + 1)
    out[0] = 1.0
    out[np.asarray(lags, dtype=np.int64)] = coefs
    return out


def whiten(w, ar_lags, ar_coefs, ma_lags, ma_coefs, presample):
    """Run the inverse ARMA filter on each row of ``w`` (see the compiled twin)."""
    w = np.asarray(w, dtype=np.float64)
    c, n = w.shape
    e = w.copy()
    for lag, coef in zip(ar_lags, ar_coefs):
        lag = int(lag)
        if lag < n:
            e[:, lag:] += coef * w[:, : n - lag]
        e[:, : min(lag, n)] += coef * np.asarray(presample)[:, None]
    if len(ma_lags) == 0:
        return e
    ma = _dense_from_sparse(ma_lags, ma_coefs)
    return lfilter([1.0], ma, e, axis=1)


def color(innov, ar_lags, ar_coefs, ma_lags, ma_coefs, presample):
    """Inverse of :func:`whiten` for one row."""
    innov = np.asarray(innov, dtype=np.float64)
    ar = _dense_from_sparse(ar_lags, ar_coefs)
    ma = _dense_from_sparse(ma_lags, ma_coefs)
    if len(ar) == 1:
        return lfilter(ma, [1.0], innov)
    zi = lfiltic(ma, ar, y=np.full(len(ar) - 1, float(presample)), x=np.zeros(max(len(ma) - 1, 1)))
    out, _ = lfilter(ma, ar, innov, zi=zi)
    return out


def _operators(arma, p, q, P, Q, k):
    arma = np.asarray(arma, dtype=np.float64)
    phi, theta = arma[:p], arma[p:p + q]
    sphi, stheta = arma[p + q:p + q + P], arma[p + q + P:p + q + P + Q]
    if not (is_stable(phi) and is_stable(theta) and is_stable(sphi) and is_stable(stheta)):
        return None
    return expand(phi, sphi, k) + expand(theta, stheta, k)


def residuals(arma, p, q, P, Q, k, z):
    """Conditional innovations of ``z``; ``None`` when inadmissible."""
    ops = _operators(arma, p, q, P, Q, k)
    if ops is None:
        return None
    z = np.asarray(z, dtype=np.float64)
    if z.size == 0:
        return z.copy()
    return whiten(z[None, :], *ops, np.array([z.mean()]))[0]


def css_value(arma, p, q, P, Q, k, z):
    """Conditional sum of squares of one mean-adjusted differenced series."""
    a = residuals(arma, p, q, P, Q, k, z)
    if a is None:
        return np.inf
    css = float(a @ a)
    return css if np.isfinite(css) else np.inf


class ProfileProblem:
    """Differenced data plus cached means for repeated CSS evaluations.

    Same contract as the compiled twin, including the optimizer steps, so
    both backends follow the same path up to rounding.
    """

    def __init__(self, cols, p, q, P, Q, k):
        self.cols = np.ascontiguousarray(cols, dtype=np.float64)
        self.c, self.n = self.cols.shape
        self.nbeta = self.c - 1
        self.p, self.q, self.P, self.Q, self.k = p, q, P, Q, k
        self.narma = p + q + P + Q
        self.evaluations = 0
        self.means = self.cols.mean(axis=1) if self.n else np.zeros(self.c)
        self._beta = np.zeros(self.nbeta)

    def _profile(self, x):
        self.evaluations += 1
        ops = _operators(x, self.p, self.q, self.P, self.Q, self.k)
        if ops is None:
            return np.inf
        if self.n == 0:
            return 0.0
        e = whiten(self.cols, *ops, self.means)
        G = e @ e.T
        css = G[0, 0]
        if self.nbeta:
            H = G[1:, 1:]
            try:
                L = np.linalg.cholesky(H)
            except np.linalg.LinAlgError:
                return np.inf
            if np.any(np.diag(L) ** 2 <= 1e-12 * (1.0 + np.abs(np.diag(H)))):
                return np.inf
            rhs = np.linalg.solve(L, G[1:, 0])
            css -= rhs @ rhs
            self._beta = np.linalg.solve(L.T, rhs)
        css = max(float(css), 0.0)
        return css if np.isfinite(css) else np.inf

    def _full(self, theta):
        self.evaluations += 1
        theta = np.asarray(theta, dtype=np.float64)
        J = self.nbeta
        ops = _operators(theta[J:], self.p, self.q, self.P, self.Q, self.k)
        if ops is None:
            return np.inf
        beta = theta[:J]
        z = self.cols[0] - beta @ self.cols[1:]
        pre = self.means[0] - beta @ self.means[1:]
        a = whiten(z[None, :], *ops, np.array([pre]))[0]
        css = float(a @ a)
        return css if np.isfinite(css) else np.inf

    def _eval(self, x, full, scale):
        return (self._full(x) if full else self._profile(x)) / scale

    def _gradient(self, x, full, scale, step, fx):
        x = np.array(x, dtype=np.float64)
        g = np.zeros(x.size)
        for i in range(x.size):
            xi = x[i]
            h = step * max(abs(xi), 1.0)
            x[i] = xi + h
            fp = self._eval(x, full, scale)
            x[i] = xi - h
            fm = self._eval(x, full, scale)
            x[i] = xi
            if np.isfinite(fp) and np.isfinite(fm):
                g[i] = (fp - fm) / (2.0 * h)
            elif np.isfinite(fp):
                g[i] = (fp - fx) / h
            elif np.isfinite(fm):
                g[i] = (fx - fm) / h
        return g

    def profile(self, x):
        """Return ``(css, beta)`` at ARMA coefficients ``x``."""
        css = self._profile(np.asarray(x, dtype=np.float64))
        return css, np.array(self._beta, dtype=np.float64)

    def full(self, theta):
        """CSS at ``theta = [beta..., arma...]``."""
        return self._full(theta)

    def gradient(self, x, step, full=False):
        """Finite-difference gradient of the unscaled profile (or full) CSS."""
        x = np.asarray(x, dtype=np.float64)
        if x.size == 0:
            return np.zeros(0)
        return self._gradient(x, full, 1.0, step, self._eval(x, full, 1.0))

    def hessian(self, theta, step):
        """Central second differences of the full CSS at ``theta``."""
        x = np.array(theta, dtype=np.float64)
        m = x.size
        H = np.zeros((m, m))
        if m == 0:
            return H
        h = step * np.maximum(np.abs(x), 1.0)
        f0 = self._full(x)
        for i in range(m):
            xi = x[i]
            x[i] = xi + h[i]
            fp = self._full(x)
            x[i] = xi - h[i]
            fm = self._full(x)
            x[i] = xi
            H[i, i] = (fp - 2.0 * f0 + fm) / (h[i] * h[i])
        for i in range(m):
            for j in range(i + 1, m):
                xi, xj = x[i], x[j]
                x[i], x[j] = xi + h[i], xj + h[j]
                a = self._full(x)
                x[j] = xj - h[j]
                b = self._full(x)
                x[i] = xi - h[i]
                d = self._full(x)
                x[j] = xj + h[j]
                c = self._full(x)
                x[i], x[j] = xi, xj
                H[i, j] = H[j, i] = (a - b - c + d) / (4.0 * h[i] * h[j])
        return H

    def minimize(self, x0, simplex_step=0.1, max_iter=500, nm_xatol=1e-5,
                 nm_fatol=1e-8, gtol=1e-7, ftol=1e-10, fd_step=1e-5):
        """Nelder-Mead then BFGS on the scaled profile objective (see the compiled twin)."""
        m = self.narma
        xs = np.array(x0, dtype=np.float64)
        if m == 0:
            css, _ = self.profile(xs)
            return xs.copy(), css, 0, 0, "none"
        scale = self._profile(xs)
        if not np.isfinite(scale) or scale <= 0.0:
            scale = 1.0
        sim = np.tile(xs, (m + 1, 1))
        fs = np.empty(m + 1)
        fs[0] = self._eval(sim[0], False, scale)
        for i in range(1, m + 1):
            sim[i, i - 1] += simplex_step
            fs[i] = self._eval(sim[i], False, scale)
            halvings = 0
            while not np.isfinite(fs[i]) and halvings < 60:
                sim[i] = 0.5 * (sim[i] + xs)
                fs[i] = self._eval(sim[i], False, scale)
                halvings += 1
        order = np.argsort(fs, kind="stable")
        sim, fs = sim[order], fs[order]

        nm_it = 0
        while nm_it < max_iter:
            dmax = np.max(np.abs(sim[1:] - sim[0]))
            spread = np.abs(fs[0] - fs[1:])
            fspread = np.inf if not np.all(np.isfinite(fs[1:])) else spread.max()
            if dmax <= nm_xatol and fspread <= nm_fatol:
                break
            xbar = sim[:m].sum(axis=0) / m
            xr = 2.0 * xbar - sim[m]
            fr = self._eval(xr, False, scale)
            shrink = False
            if fr < fs[0]:
                xe = 3.0 * xbar - 2.0 * sim[m]
                fe = self._eval(xe, False, scale)
                if fe < fr:
                    sim[m], fs[m] = xe, fe
                else:
                    sim[m], fs[m] = xr, fr
            elif fr < fs[m - 1]:
                sim[m], fs[m] = xr, fr
            elif fr < fs[m]:
                xc = 1.5 * xbar - 0.5 * sim[m]
                fc = self._eval(xc, False, scale)
                if fc <= fr:
                    sim[m], fs[m] = xc, fc
                else:
                    shrink = True
            else:
                xc = 0.5 * xbar + 0.5 * sim[m]
                fc = self._eval(xc, False, scale)
                if fc < fs[m]:
                    sim[m], fs[m] = xc, fc
                else:
                    shrink = True
            if shrink:
                for i in range(1, m + 1):
                    sim[i] = sim[0] + 0.5 * (sim[i] - sim[0])
                    fs[i] = self._eval(sim[i], False, scale)
            order = np.argsort(fs, kind="stable")
            sim, fs = sim[order], fs[order]
            nm_it += 1

        x = sim[0].copy()
        f = fs[0]
        Hi = np.eye(m)
        status = "maxiter"
        bf_it = 0
        g = self._gradient(x, False, scale, fd_step, f)
        while bf_it < max_iter:
            gmax = np.max(np.abs(g))
            if gmax <= gtol:
                status = "gtol"
                break
            d = -Hi @ g
            gd = d @ g
            if not gd < 0.0:
                Hi = np.eye(m)
                d = -g
                gd = -(g @ g)
            alpha = 1.0
            if bf_it == 0 and np.max(np.abs(d)) > simplex_step:
                alpha = simplex_step / np.max(np.abs(d))
            for _ in range(60):
                xn = x + alpha * d
                fn = self._eval(xn, False, scale)
                if fn <= f + 1e-4 * alpha * gd:
                    break
                alpha *= 0.5
            else:
                status = "linesearch"
                break
            gn = self._gradient(xn, False, scale, fd_step, fn)
            s, y = xn - x, gn - g
            sy = s @ y
            if sy > 1e-12 * np.sqrt((s @ s) * (y @ y)):
                if bf_it == 0:
                    Hi = np.eye(m) * (sy / (y @ y))
                hy = Hi @ y
                yhy = y @ hy
                Hi = Hi + (sy + yhy) * np.outer(s, s) / (sy * sy) - (np.outer(hy, s) + np.outer(s, hy)) / sy
            bf_it += 1
            change = abs(f - fn)
            fold = f
            x, g, f = xn, gn, fn
            if change <= ftol * max(abs(fold), abs(fn)):
                status = "ftol"
                break
        return x, f * scale, nm_it, bf_it, status


def profile_css(arma, p, q, P, Q, k, cols, beta):
    """CSS with regression coefficients concentrated out (see the compiled twin)."""
    css, b = ProfileProblem(cols, p, q, P, Q, k).profile(arma)
    if np.isfinite(css):
        beta[:] = b
    return css
