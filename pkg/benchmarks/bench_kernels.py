"""Compare the compiled and pure-Python kernel backends.

Usage::

    python benchmarks/bench_kernels.py [--n 8400] [--repeat 5]

Times the hot paths on one synthetic daily series: a single CSS
evaluation, one profiled evaluation (whitening plus least squares), and
a full optimizer run, for each importable backend.
"""

import argparse
import timeit

import numpy as np

from itsinfer import kernels
from itsinfer.sarimax import SarimaOrder, SarimaParams
from itsinfer.series import difference_array
from itsinfer.simulation import GeneratorSpec, gen_sarima


def _problem(n):
    order = SarimaOrder(1, 1, 1, 0, 1, 1, 7)
    g = GeneratorSpec(order, SarimaParams([100.0], phi=[0.3], theta=[0.4], seasonal_theta=[0.6]),
                      n, seed=1)
    y = gen_sarima(g).values
    x = (np.arange(n) >= n // 5).astype(float)
    cols = difference_array(np.vstack([y, x]), order.d, order.k, order.D)
    return order, np.ascontiguousarray(cols)


def best_of(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=8400)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    o, cols = _problem(args.n)
    arma = np.array([0.3, 0.4, 0.6])
    dims = (o.p, o.q, o.P, o.Q, o.k)
    rows = []
    for mod in kernels.backends():
        prob = mod.ProfileProblem(cols, *dims)
        css = best_of(lambda: mod.css_value(arma, *dims, cols[0]), args.repeat, 50)
        prof = best_of(lambda: prob.profile(arma), args.repeat, 50)
        opt = best_of(lambda: mod.ProfileProblem(cols, *dims).minimize(np.zeros(3)), args.repeat, 1)
        rows.append((mod.BACKEND, css, prof, opt))
    print(f"n = {args.n}, model {o.label} with one regressor")
    print(f"{'backend':<10}{'css_value':>14}{'profile':>14}{'minimize':>14}")
    for name, *t in rows:
        print(f"{name:<10}" + "".join(f"{v * 1e3:>11.3f} ms" for v in t))
    if len(rows) == 2:
        ref = rows[1]
        print(f"{'speedup':<10}" + "".join(f"{ref[i] / rows[0][i]:>13.1f}x" for i in (1, 2, 3)))


if __name__ == "__main__":
    main()
