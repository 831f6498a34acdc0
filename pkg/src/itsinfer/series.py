"""Time series container, differencing, and sparse lag-polynomial algebra."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np
from scipy.signal import lfilter, lfiltic


class SeriesLengthError(ValueError):
    """Raised when a series is too short for the requested operation."""


@dataclass(frozen=True)
class TimeSeries:
    """Equally spaced daily observations.

    Parameters
    ----------
    values : array_like
        Finite observations, one per calendar day.
    start_date : datetime.date
        Date of the first observation.
    period_labels : sequence, optional
        Per-observation tags (e.g. day-of-week names), same length as values.
    """

    values: np.ndarray
    start_date: dt.date = dt.date(1970, 1, 1)
    period_labels: tuple | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).reshape(-1)
        if v.size < 1:
            raise SeriesLengthError("a time series needs at least one observation")
        if not np.all(np.isfinite(v)):
            bad = int(np.flatnonzero(~np.isfinite(v))[0])
            raise ValueError(f"non-finite value at position {bad}; missing values are not imputed")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if isinstance(self.start_date, dt.datetime):
            object.__setattr__(self, "start_date", self.start_date.date())
        if self.period_labels is not None:
            labels = tuple(self.period_labels)
            if len(labels) != v.size:
                raise ValueError("period_labels must match the number of observations")
            object.__setattr__(self, "period_labels", labels)

    def __len__(self):
        return self.values.size

    @property
    def end_date(self) -> dt.date:
        return self.start_date + dt.timedelta(days=len(self) - 1)

    @property
    def dates(self) -> list[dt.date]:
        return [self.start_date + dt.timedelta(days=i) for i in range(len(self))]

    def index_of(self, date: dt.date) -> int:
        """Position of ``date``; raises ``IndexError`` outside the span."""
        i = (date - self.start_date).days
        if not 0 <= i < len(self):
            raise IndexError(f"{date} is outside the series span {self.start_date}..{self.end_date}")
        return i

    def with_values(self, values, start_date: dt.date | None = None) -> "TimeSeries":
        return TimeSeries(values, self.start_date if start_date is None else start_date)


@dataclass(frozen=True)
class LagPolynomial:
    """Sparse polynomial in the backshift operator B, stored as lag -> coefficient.

    ``LagPolynomial({0: 1, 1: -1, 7: -1, 8: 1})`` is ``(1 - B)(1 - B^7)``.
    """

    coefficients: Mapping[int, float] = field(default_factory=lambda: {0: 1.0})

    def __post_init__(self):
        terms = {}
        for lag, c in dict(self.coefficients).items():
            lag = int(lag)
            if lag < 0:
                raise ValueError("lags must be nonnegative")
            if c != 0:
                terms[lag] = float(c)
        object.__setattr__(self, "coefficients", MappingProxyType(dict(sorted(terms.items()))))

    @classmethod
    def from_factor(cls, params: Sequence[float], step: int = 1) -> "LagPolynomial":
        """``1 - params[0] B^step - params[1] B^(2 step) - ...`` (Box-Jenkins sign)."""
        terms = {0: 1.0}
        for i, v in enumerate(params, start=1):
            terms[i * step] = -float(v)
        return cls(terms)

    @property
    def degree(self) -> int:
        return max(self.coefficients, default=0)

    def __getitem__(self, lag: int) -> float:
        return self.coefficients.get(lag, 0.0)

    def __mul__(self, other: "LagPolynomial") -> "LagPolynomial":
        return poly_multiply(self, other)

    def __pow__(self, n: int) -> "LagPolynomial":
        out = LagPolynomial({0: 1.0})
        for _ in range(n):
            out = out * self
        return out

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.degree + 1)
        for lag, c in self.coefficients.items():
            out[lag] = c
        return out

    def __repr__(self):
        return f"LagPolynomial({dict(self.coefficients)})"


def poly_multiply(a: LagPolynomial, b: LagPolynomial) -> LagPolynomial:
    """Product of two lag polynomials."""
    terms: dict[int, float] = {}
    for la, ca in a.coefficients.items():
        for lb, cb in b.coefficients.items():
            terms[la + lb] = terms.get(la + lb, 0.0) + ca * cb
    return LagPolynomial(terms)


def differencing_polynomial(order: int = 0, seasonal_lag: int | None = None,
                            seasonal_order: int = 0) -> LagPolynomial:
    """``(1 - B)^order (1 - B^k)^seasonal_order``."""
    poly = LagPolynomial({0: 1.0, 1: -1.0}) ** order
    if seasonal_order:
        if not seasonal_lag or seasonal_lag < 1:
            raise ValueError("seasonal differencing needs a positive seasonal lag")
        poly = poly * LagPolynomial({0: 1.0, seasonal_lag: -1.0}) ** seasonal_order
    return poly


def difference_array(x, order: int = 0, seasonal_lag: int | None = None,
                     seasonal_order: int = 0) -> np.ndarray:
    """Apply ``(1 - B)^order (1 - B^k)^seasonal_order`` along the last axis.

    The first ``order + seasonal_order * k`` positions are consumed.
    """
    x = np.asarray(x, dtype=np.float64)
    if order < 0 or seasonal_order < 0:
        raise ValueError("differencing orders must be nonnegative")
    span = order + (seasonal_order * seasonal_lag if seasonal_order else 0)
    if x.shape[-1] <= span:
        raise SeriesLengthError(
            f"series of length {x.shape[-1]} is too short for differencing span {span}")
    for _ in range(order):
        x = x[..., 1:] - x[..., :-1]
    for _ in range(seasonal_order):
        x = x[..., seasonal_lag:] - x[..., :-seasonal_lag]
    return x


def integrate_array(dx, anchors, order: int = 0, seasonal_lag: int | None = None,
                    seasonal_order: int = 0) -> np.ndarray:
    """Invert :func:`difference_array` given the consumed leading values.

    Parameters
    ----------
    dx : array_like
        Differenced series.
    anchors : array_like
        The first ``order + seasonal_order * k`` values of the level series.

    Returns
    -------
    ndarray
        Level series of length ``len(anchors) + len(dx)``.
    """
    poly = differencing_polynomial(order, seasonal_lag, seasonal_order).to_dense()
    anchors = np.asarray(anchors, dtype=np.float64)
    span = len(poly) - 1
    if anchors.size != span:
        raise ValueError(f"expected {span} anchor values, got {anchors.size}")
    dx = np.asarray(dx, dtype=np.float64)
    if span == 0:
        return dx.copy()
    zi = lfiltic([1.0], poly, y=anchors[::-1])
    level, _ = lfilter([1.0], poly, dx, zi=zi)
    return np.concatenate([anchors, level])


def difference(series: TimeSeries, order: int = 0, seasonal_lag: int | None = None,
               seasonal_order: int = 0) -> TimeSeries:
    """Difference a series; the result starts ``order + D*k`` days later.

    Examples
    --------
    >>> difference(TimeSeries([1, 2, 3, 4]), 1).values
    array([1., 1., 1.])
    """
    out = difference_array(series.values, order, seasonal_lag, seasonal_order)
    shift = len(series) - out.size
    return TimeSeries(out, series.start_date + dt.timedelta(days=shift))


def expand_difference_equation(order, phi=(), theta=(), seasonal_phi=(), seasonal_theta=()):
    """Fully expanded AR-with-differencing and MA operators of a seasonal ARIMA.

    Parameters
    ----------
    order : SarimaOrder
        Model structure.
    phi, theta, seasonal_phi, seasonal_theta : sequence of float
        Coefficient values; omitted trailing coefficients are zero.

    Returns
    -------
    (LagPolynomial, LagPolynomial)
        ``phi(B) Phi(B^k) (1-B)^d (1-B^k)^D`` and ``theta(B) Theta(B^k)``.
        The noise recursion is read off as
        ``N_t = -sum_{l>0} ar[l] N_{t-l} + a_t + sum_{l>0} ma[l] a_{t-l}``.
    """
    def pad(vals, n):
        vals = list(vals)
        if len(vals) > n:
            raise ValueError("more coefficients than the order allows")
        return vals + [0.0] * (n - len(vals))

    k = order.k
    ar = (LagPolynomial.from_factor(pad(phi, order.p))
          * LagPolynomial.from_factor(pad(seasonal_phi, order.P), k)
          * differencing_polynomial(order.d, k, order.D))
    ma = (LagPolynomial.from_factor(pad(theta, order.q))
          * LagPolynomial.from_factor(pad(seasonal_theta, order.Q), k))
    return ar, ma
