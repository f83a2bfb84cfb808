"""Exact joint moments of the ray-occupancy pair ``(V(b), V(c))``, ``0 < b < c``.

A *path type* is a word over ``{B, C}`` recording in which time order the
``p`` points on the ray ``b t`` and the ``q`` points on ``c t`` occur.  Read
backwards, the word splits into alternating runs starting with a (possibly
empty) B-run; with run lengths ``i(0), i(1), ...`` its weight is

    g(word) = prod_j (1 / b_j)^{i(j)},   b_j = b + j (c - b),

and ``E V(b)^p V(c)^q = p! q! sum_words g(word)``.

Floats are summed with ``math.fsum``; passing ``int``/``Fraction`` slopes (or
``rational=True``) switches to exact rational arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from numbers import Rational

import numpy as np

from . import brownian

__all__ = [
    "PathType",
    "RunProfile",
    "SingularConfigurationError",
    "EnumerationBoundError",
    "OppositeSignError",
    "MgfDivergenceError",
    "run_profile",
    "path_weight",
    "enumerate_paths",
    "joint_moment",
    "word_sums",
    "mgf",
    "fourth_moment_difference",
    "richardson_m4_coefficient",
    "MAX_ENUMERATION",
]

MAX_ENUMERATION = 20


class SingularConfigurationError(ZeroDivisionError):
    pass


class EnumerationBoundError(ValueError):
    pass


class OppositeSignError(NotImplementedError):
    """Joint moments of opposite-sign slopes beyond (1,1) have no closed form here."""


class MgfDivergenceError(ArithmeticError):
    pass


@dataclass(frozen=True)
class PathType:
    word: tuple[str, ...]

    def __post_init__(self):
        if any(ch not in ("B", "C") for ch in self.word):
            raise ValueError("path words use the letters B and C only")

    @classmethod
    def from_string(cls, s: str) -> "PathType":
        return cls(tuple(s))

    @property
    def p(self) -> int:
        return self.word.count("B")

    @property
    def q(self) -> int:
        return self.word.count("C")


@dataclass(frozen=True)
class RunProfile:
    i: tuple[int, ...]

    @property
    def p(self) -> int:
        return sum(self.i[0::2])

    @property
    def q(self) -> int:
        return sum(self.i[1::2])


def run_profile(path: PathType) -> RunProfile:
    runs = [0]
    letter = "B"
    for ch in reversed(path.word):
        if ch != letter:
            runs.append(0)
            letter = ch
        runs[-1] += 1
    return RunProfile(tuple(runs))


def _use_rational(b, c, rational):
    if rational is None:
        return isinstance(b, Rational) and isinstance(c, Rational)
    return rational


def path_weight(path: PathType, b, c, rational: bool | None = None):
    exact = _use_rational(b, c, rational)
    if exact:
        b, c = Fraction(b), Fraction(c)
    weight = Fraction(1) if exact else 1.0
    for j, count in enumerate(run_profile(path).i):
        if count == 0:
            continue
        bj = b + j * (c - b)
        if bj == 0:
            raise SingularConfigurationError(f"b_{j} = 0 for b={b!r}, c={c!r}")
        weight *= (1 / bj) ** count
    return weight


def enumerate_paths(p: int, q: int):
    """All ``C(p+q, p)`` words with ``p`` B's and ``q`` C's, in lexicographic order of B positions."""
    n = p + q
    for pos in combinations(range(n), p):
        word = ["C"] * n
        for k in pos:
            word[k] = "B"
        yield PathType(tuple(word))


def _enumerated_moment(b, c, p, q, exact):
    terms = [path_weight(w, b, c, rational=exact) for w in enumerate_paths(p, q)]
    total = sum(terms, Fraction(0)) if exact else math.fsum(terms)
    return math.factorial(p) * math.factorial(q) * total


def joint_moment(b, c, p: int, q: int, rational: bool | None = None):
    """``E V(b)^p V(c)^q`` by path enumeration (``p + q <= 20``).

    Canonical inputs are ``0 < b < c``; ``b > c`` is handled by swapping roles,
    two negative slopes by the joint reflection ``V(-b) ~ V(b)``, and ``b == c``
    by the single-ray moment.  Opposite signs are supported only for
    ``p + q <= 2`` (marginals and the covariance formula).
    """
    if p < 0 or q < 0:
        raise ValueError("p and q must be nonnegative")
    if p + q > MAX_ENUMERATION:
        raise EnumerationBoundError(f"p + q = {p + q} exceeds the enumeration bound {MAX_ENUMERATION}")
    if b == 0 or c == 0:
        raise SingularConfigurationError("slopes must be nonzero")
    exact = _use_rational(b, c, rational)
    if exact:
        b, c = Fraction(b), Fraction(c)
    if (b > 0) != (c > 0):
        if q == 0:
            return math.factorial(p) / abs(b) ** p
        if p == 0:
            return math.factorial(q) / abs(c) ** q
        if p == 1 and q == 1:
            return brownian.cov_pair(float(b), float(c)) + 1.0 / abs(float(b) * float(c))
        raise OppositeSignError("opposite-sign joint moments beyond (1,1) are left to simulation")
    b, c = abs(b), abs(c)
    if b == c:
        return math.factorial(p + q) / b ** (p + q)
    if b > c:
        b, c, p, q = c, b, q, p
    return _enumerated_moment(b, c, p, q, exact)


def word_sums(b, c, max_degree: int, rational: bool | None = None):
    """``G[p][q] = sum over words of g`` for all ``p + q <= max_degree``.

    Dynamic program over reversed prefixes: the state is the number of B's
    used and the index ``j`` of the current run (even runs are B-runs).
    Returns a dict keyed by ``(p, q)``.
    """
    exact = _use_rational(b, c, rational)
    if exact:
        b, c = Fraction(b), Fraction(c)
        one, zero, dtype = Fraction(1), Fraction(0), object
    else:
        b, c = float(b), float(c)
        one, zero, dtype = 1.0, 0.0, float
    if not (0 < b < c):
        raise ValueError("word_sums needs 0 < b < c")
    inv = [one / (b + j * (c - b)) for j in range(max_degree + 2)]
    inv = np.array(inv, dtype=dtype)
    # shell[p, j]: prefixes of length n with p B's whose current run index is j
    shell = np.full((1, 1), zero, dtype=dtype)
    shell[0, 0] = one
    out = {(0, 0): one}
    even = np.arange(max_degree + 2) % 2 == 0
    for n in range(max_degree):
        new = np.full((n + 2, n + 3), zero, dtype=dtype)
        jmax = shell.shape[1]
        ev = even[:jmax]
        scaled = shell * inv[:jmax]
        nxt = shell * inv[1:jmax + 1]
        # stay in the current run
        new[1:n + 2, :jmax][:, ev] += scaled[:, ev]
        new[0:n + 1, :jmax][:, ~ev] += scaled[:, ~ev]
        # open run j+1: C after an even run, B after an odd run
        new[0:n + 1, 1:jmax + 1][:, ev] += nxt[:, ev]
        new[1:n + 2, 1:jmax + 1][:, ~ev] += nxt[:, ~ev]
        shell = new
        sums = shell.sum(axis=1)
        for pp in range(n + 2):
            out[(pp, n + 1 - pp)] = sums[pp]
    return out


def mgf(b, c, s: float, t: float, tol: float = 1e-12, max_degree: int = 400) -> float:
    """Joint moment generating function ``E exp(s V(b) + t V(c))``, ``0 < b < c``.

    The double series is summed shell by shell in total degree ``p + q``; it
    stops once three consecutive shells each contribute less than ``tol`` and
    raises :class:`MgfDivergenceError` after three successively growing shells.
    """
    b, c = float(b), float(c)
    if not (0 < b < c):
        raise ValueError("mgf needs 0 < b < c")
    inv = np.array([1.0 / (b + j * (c - b)) for j in range(max_degree + 2)])
    even = np.arange(max_degree + 2) % 2 == 0
    shell = np.zeros((1, 1))
    shell[0, 0] = 1.0
    shells = [1.0]
    growing = 0
    for n in range(max_degree):
        new = np.zeros((n + 2, n + 3))
        jmax = shell.shape[1]
        ev = even[:jmax]
        # weights s and t are folded in as letters are appended
        scaled = shell * inv[:jmax]
        nxt = shell * inv[1:jmax + 1]
        new[1:n + 2, :jmax][:, ev] += s * scaled[:, ev]
        new[0:n + 1, :jmax][:, ~ev] += t * scaled[:, ~ev]
        new[0:n + 1, 1:jmax + 1][:, ev] += t * nxt[:, ev]
        new[1:n + 2, 1:jmax + 1][:, ~ev] += s * nxt[:, ~ev]
        shell = new
        contrib = math.fsum(shell.ravel())
        if not math.isfinite(contrib):
            raise MgfDivergenceError("series overflowed")
        growing = growing + 1 if abs(contrib) > abs(shells[-1]) else 0
        shells.append(contrib)
        if growing >= 3:
            raise MgfDivergenceError(f"shells grow at (s, t) = ({s}, {t}); outside the convergence region")
        if len(shells) >= 3 and all(abs(v) < tol for v in shells[-3:]):
            return math.fsum(shells)
    raise MgfDivergenceError(f"no convergence within degree {max_degree}")


def fourth_moment_difference(b: float, h: float) -> float:
    """``m_b(h) = E{V(b+h) - V(b)}^4`` from five joint moments."""
    if b <= 0 or h < 0:
        raise ValueError("need b > 0 and h >= 0")
    if h == 0:
        return 0.0
    c = b + h
    terms = [math.comb(4, j) * (-1) ** (4 - j) * joint_moment(b, c, 4 - j, j) for j in range(5)]
    return math.fsum(terms)


def richardson_m4_coefficient(b: float, h: float) -> float:
    """Two-level Richardson extrapolation of ``m_b(h)/h^2`` to ``h -> 0`` from ``h, h/2, h/4``."""
    f = [fourth_moment_difference(b, x) / x ** 2 for x in (h, h / 2, h / 4)]
    r1 = [2.0 * f[1] - f[0], 2.0 * f[2] - f[1]]
    return (4.0 * r1[1] - r1[0]) / 3.0
