"""Formal power series in one variable ``x``.

Generating functions of Gaussian variables have the closed form
``exp(i mu x - v x^2 / 2)``.  ``GaussianSeries`` keeps the two parameters
(the variance as a list of summands, so that dividing out a factor cancels
it exactly) and only expands into coefficient arrays on request.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def _pad(a, n: int) -> np.ndarray:
    out = np.zeros(n + 1, dtype=complex)
    a = np.asarray(a, dtype=complex)[:n + 1]
    out[:a.size] = a
    return out


def series_mul(a, b, n: int) -> np.ndarray:
    """First ``n + 1`` coefficients of the product of two series."""
    return np.convolve(_pad(a, n), _pad(b, n))[:n + 1]


def series_div(a, b, n: int) -> np.ndarray:
    """First ``n + 1`` coefficients of ``a / b``; requires ``b[0] != 0``."""
    a, b = _pad(a, n), _pad(b, n)
    if b[0] == 0:
        raise ZeroDivisionError("series with vanishing constant term is not invertible")
    q = np.zeros(n + 1, dtype=complex)
    for m in range(n + 1):
        q[m] = (a[m] - np.dot(q[:m], b[m:0:-1])) / b[0]
    return q


@dataclass(frozen=True)
class GaussianSeries:
    """``exp(i*mean*x - variance*x**2/2)`` with ``variance = fsum(variance_terms)``."""

    mean: float = 0.0
    variance_terms: tuple = field(default=())

    @property
    def variance(self) -> float:
        return math.fsum(self.variance_terms)

    def __mul__(self, other: "GaussianSeries") -> "GaussianSeries":
        return GaussianSeries(self.mean + other.mean, self.variance_terms + other.variance_terms)

    def __truediv__(self, other: "GaussianSeries") -> "GaussianSeries":
        return GaussianSeries(self.mean - other.mean,
                              self.variance_terms + tuple(-v for v in other.variance_terms))

    def coefficients(self, n: int) -> np.ndarray:
        """Coefficients of ``x^0 .. x^n``."""
        a = 1j * self.mean
        b = -0.5 * self.variance
        out = np.zeros(n + 1, dtype=complex)
        for m in range(n + 1):
            s = 0j
            for j in range(m // 2 + 1):
                s += a ** (m - 2 * j) / math.factorial(m - 2 * j) * b ** j / math.factorial(j)
            out[m] = s
        return out

    def moment(self, n: int) -> float:
        """``(-i)^n n!`` times the ``x^n`` coefficient, i.e. the n-th moment."""
        return gaussian_moment(self.mean, self.variance, n)


def gaussian_moment(mean: float, variance: float, n: int) -> float:
    """E[X^n] for X ~ N(mean, variance): sum_j C(n, 2j) mean^(n-2j) variance^j (2j-1)!!."""
    if n < 0:
        raise ValueError("moment order must be non-negative")
    total = 0.0
    dfact = 1.0   # (2j - 1)!!
    for j in range(n // 2 + 1):
        if j > 0:
            dfact *= 2 * j - 1
        total += math.comb(n, 2 * j) * mean ** (n - 2 * j) * variance ** j * dfact
    return total
