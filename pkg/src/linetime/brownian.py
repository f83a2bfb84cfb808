"""Closed-form laws for standard Brownian motion.

Covers the occupancy law along a line from an arbitrary start, the truncated
(after time ``c``) law and its moments, the covariance/correlation structure of
the ray process ``V(b)``, the one- and two-sided maximum distributions, the
sign-pattern probabilities of ``(V(c,-1), V(c,1))`` and the moments of the
axis-time limit ``|N(0,1)|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .laws import Mixture

__all__ = [
    "phi",
    "Phi",
    "tail_weight",
    "line_law",
    "truncated_law",
    "truncated_moment",
    "cov_pair",
    "corr_pair",
    "max_cdf",
    "two_sided_max_cdf",
    "two_sided_max_cdf_theta",
    "SignPatternProbs",
    "sign_pattern_probs",
    "cross_moment_truncated",
    "axis_time_moment",
    "abs_normal_moment",
]

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def phi(x: float) -> float:
    return _INV_SQRT_2PI * math.exp(-0.5 * x * x)


def Phi(x: float) -> float:
    """Standard normal CDF via the C library ``erfc`` (absolute error ~1e-16)."""
    return 0.5 * math.erfc(-x / _SQRT2)


def tail_weight(u: float) -> float:
    """``k(u) = 2 (1 - Phi(u))``, the two-sided normal tail; k(0) = 1."""
    if u < 0:
        raise ValueError("tail_weight needs u >= 0")
    return math.erfc(u / _SQRT2)


def line_law(x0: float, a: float, b: float) -> Mixture:
    """Relative time along ``a + b t`` for Brownian motion started at ``x0``.

    For ``b > 0`` the law is Exp(b) when ``x0 >= a`` and otherwise carries an
    atom ``1 - exp(-2 b (a - x0))`` at zero; negative slopes mirror this.
    """
    if b == 0:
        raise ValueError("slope 0 gives an almost surely infinite time; use scale.limit_law")
    gap = (a - x0) if b > 0 else (x0 - a)
    if gap <= 0:
        return Mixture(0.0, abs(b))
    return Mixture(-math.expm1(-2.0 * abs(b) * gap), abs(b))


def truncated_law(c: float, b: float) -> Mixture:
    """Relative time along ``b t`` during ``t >= c`` (Brownian motion from 0)."""
    if c < 0:
        raise ValueError("c must be nonnegative")
    if b == 0:
        raise ValueError("slope must be nonzero")
    return Mixture(1.0 - tail_weight(abs(b) * math.sqrt(c)), abs(b))


def truncated_moment(c: float, b: float, p: int) -> float:
    """``E V(c,b)^p = p! k(|b| sqrt c) / |b|^p``."""
    if p < 1:
        raise ValueError("p must be a positive integer")
    if b == 0:
        raise ValueError("slope must be nonzero")
    return math.factorial(p) * tail_weight(abs(b) * math.sqrt(c)) / abs(b) ** p


def cov_pair(b: float, c: float) -> float:
    """Covariance of ``V(b)`` and ``V(c)`` for nonzero slopes.

    Input normalization (the process is invariant under ``b -> -b`` applied to
    all slopes jointly):

    ==================  ============================================
    signs               formula used
    ==================  ============================================
    same sign           ``lo = min(|b|,|c|)``, ``hi = max``:
                        ``1 / (hi (2 hi - lo))``
    opposite signs      ``c = |negative|``, ``d = positive``:
                        ``1/(d (c+2d)) + 1/(c (2c+d)) - 1/(c d)``
    ==================  ============================================

    ``b == c`` reduces to the variance ``1/b^2``.
    """
    if b == 0 or c == 0:
        raise ValueError("slopes must be nonzero")
    if (b > 0) == (c > 0):
        lo, hi = sorted((abs(b), abs(c)))
        return 1.0 / (hi * (2.0 * hi - lo))
    neg, pos = (-b, c) if b < 0 else (-c, b)
    return 1.0 / (pos * (neg + 2.0 * pos)) + 1.0 / (neg * (2.0 * neg + pos)) - 1.0 / (neg * pos)


def corr_pair(b: float, c: float) -> float:
    if b == 0 or c == 0:
        raise ValueError("slopes must be nonzero")
    if (b > 0) == (c > 0):
        lo, hi = sorted((abs(b), abs(c)))
        return lo / (lo + 2.0 * (hi - lo))
    neg, pos = (-b, c) if b < 0 else (-c, b)
    k = pos / neg
    return -3.0 * k / ((k + 2.0) * (2.0 * k + 1.0))


def max_cdf(b: float, c: float) -> float:
    """``Pr{max_{0<=t<=1/c} W(t) <= b} = 2 Phi(b sqrt c) - 1``."""
    if c <= 0:
        raise ValueError("c must be positive")
    if b <= 0:
        return 0.0
    return math.erf(b * math.sqrt(c) / _SQRT2)


def two_sided_max_cdf(u: float, terms: int = 10_000) -> float:
    """``H(u) = Pr{max_{0<=s<=1} |W(s)| <= u}`` by the alternating series

    ``sum_k (-1)^k [Phi((2k+1)u) - Phi((2k-1)u)]``, summed symmetrically in
    ``k`` until a pair of terms drops below 1e-14 (at most ``terms`` pairs).

    Below ``u = 0.5`` the alternating terms are O(u) while H(u) is below
    1e-8, so cancellation would dominate; the theta series is used there.
    """
    if u <= 0:
        return 0.0
    if u < 0.5:
        return two_sided_max_cdf_theta(u)
    # k = 0 term, then k and -k together; the k and -k terms are equal.
    total = math.erf(u / _SQRT2)
    for k in range(1, terms + 1):
        term = 0.5 * (math.erfc((2 * k - 1) * u / _SQRT2) - math.erfc((2 * k + 1) * u / _SQRT2))
        pair = 2.0 * term * (-1) ** k
        total += pair
        if abs(pair) < 1e-14:
            break
    return min(1.0, max(0.0, total))


def two_sided_max_cdf_theta(u: float, terms: int = 200) -> float:
    """``H(u)`` from the dual (heat-kernel eigenfunction) series

    ``(4/pi) sum_n (-1)^n/(2n+1) exp(-(2n+1)^2 pi^2 / (8 u^2))``, which
    converges fast for small ``u``.  Used as an independent check.
    """
    if u <= 0:
        return 0.0
    total = 0.0
    for n in range(terms):
        term = (-1) ** n / (2 * n + 1) * math.exp(-((2 * n + 1) ** 2) * math.pi ** 2 / (8.0 * u * u))
        total += term
        if abs(term) < 1e-17:
            break
    return min(1.0, max(0.0, 4.0 / math.pi * total))


@dataclass(frozen=True)
class SignPatternProbs:
    p00: float
    p01: float
    p10: float
    p11: float

    def __post_init__(self):
        s = self.p00 + self.p01 + self.p10 + self.p11
        if abs(s - 1.0) > 1e-12:
            raise ValueError(f"sign-pattern probabilities sum to {s!r}")


def sign_pattern_probs(c: float) -> SignPatternProbs:
    """Probabilities that ``W`` after time ``c`` touches neither, one, or both rays ``+-t``."""
    if c < 0:
        raise ValueError("c must be nonnegative")
    if c == 0:
        return SignPatternProbs(0.0, 0.0, 0.0, 1.0)
    p00 = two_sided_max_cdf(math.sqrt(c))
    p01 = math.erf(math.sqrt(c) / _SQRT2) - p00
    return SignPatternProbs(p00, p01, p01, 1.0 - p00 - 2.0 * p01)


def cross_moment_truncated(c: float) -> float:
    """``E V(c,-1) V(c,1) = (2/3) k(3 sqrt c)``."""
    if c < 0:
        raise ValueError("c must be nonnegative")
    return 2.0 / 3.0 * tail_weight(3.0 * math.sqrt(c))


def axis_time_moment(p: int) -> float:
    """Limit moments ``p! / (2^{p/2} Gamma(p/2 + 1))`` of the axis-time variable."""
    if p < 1:
        raise ValueError("p must be a positive integer")
    return math.factorial(p) / (2.0 ** (p / 2.0) * math.gamma(p / 2.0 + 1.0))


def abs_normal_moment(p: float) -> float:
    """``E|N(0,1)|^p = 2^{p/2} Gamma((p+1)/2) / sqrt(pi)``."""
    return 2.0 ** (p / 2.0) * math.gamma((p + 1) / 2.0) / math.sqrt(math.pi)
