"""Independent brute-force reference implementations used as test oracles.

Plain Python loops only; nothing here imports the package under test.
"""

import math


def naive_poly_mul(a, b):
    out = [0.0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def factor(coefs, step=1):
    """Dense coefficients of ``1 - sum c_i B^(i*step)``."""
    out = [0.0] * (len(coefs) * step + 1)
    out[0] = 1.0
    for i, c in enumerate(coefs, start=1):
        out[i * step] = -c
    return out


def naive_difference(x, d=0, k=None, D=0):
    x = list(x)
    for _ in range(d):
        x = [x[t] - x[t - 1] for t in range(1, len(x))]
    for _ in range(D):
        x = [x[t] - x[t - k] for t in range(k, len(x))]
    return x


def naive_css(y, mean, d, D, k, phi, theta, sphi, stheta):
    """CSS with pre-sample w set to the mean of the differenced series and a = 0."""
    z = [yi - mi for yi, mi in zip(y, mean)]
    w = naive_difference(z, d, k, D)
    n = len(w)
    if n == 0:
        return 0.0
    wbar = sum(w) / n
    ar = naive_poly_mul(factor(phi), factor(sphi, k))
    ma = naive_poly_mul(factor(theta), factor(stheta, k))
    a = []
    for t in range(n):
        v = 0.0
        for j, c in enumerate(ar):
            v += c * (w[t - j] if t - j >= 0 else wbar)
        for j in range(1, len(ma)):
            if t - j >= 0:
                v -= ma[j] * a[t - j]
        a.append(v)
    return sum(v * v for v in a)


def naive_acf(x, max_lag):
    n = len(x)
    m = sum(x) / n
    c0 = sum((v - m) ** 2 for v in x)
    out = []
    for h in range(1, max_lag + 1):
        s = 0.0
        for t in range(h, n):
            s += (x[t] - m) * (x[t - h] - m)
        out.append(s / c0)
    return out


def naive_operational_alpha(m, alpha):
    return 1.0 - (1.0 - alpha) ** m


def bartlett_weight(h, l):
    return max(0.0, 1.0 - abs(h) / l)


def normal_two_sided_p(t):
    return math.erfc(abs(t) / math.sqrt(2.0))
