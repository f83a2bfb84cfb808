"""Occupancy and delta-miss counts for normalized partial sums of i.i.d. data.

With ``Y_i = (X_i - xi)/sigma`` and ``S_n = Y_1 + ... + Y_n`` the partial-sum
occupancy is

    V_{m,eps}(c, b) = (1/(eps m)) #{ n >= <cm> : b n/m <= S_n/sqrt(m) <= b n/m + eps },

``<cm>`` being the smallest integer ``>= cm``.  Sums are carried across
chunks with a compensated (Neumaier) accumulator so ``S_n`` stays accurate
over millions of terms.

Infinite sums are cut once the Brownian-approximation probability of any
further contribution is below ``tol`` (same escape rule as the continuous
simulator), with a hard cap of ``horizon_factor * m`` terms that flags the
sample.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import rng
from .montecarlo import SampleBatch

__all__ = [
    "Family",
    "IidSpec",
    "partial_sum_occupancy",
    "delta_miss_count",
    "miss_count_pair",
    "second_order_difference",
    "occupancy_representations",
]

_CHUNK = 16384
_BLOCK = 16


class Family(str, enum.Enum):
    NORMAL = "Normal"
    EXPONENTIAL = "Exponential"
    UNIFORM = "Uniform"


@dataclass(frozen=True)
class IidSpec:
    """An i.i.d. law with mean ``xi``.

    ``scale`` is the standard deviation (Normal), the rate of the exponential
    before shifting (Exponential), or the half-width (Uniform).
    """

    family: Family
    xi: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError("scale parameter must be positive and finite")
        if not math.isfinite(self.xi):
            raise ValueError("mean must be finite")

    @classmethod
    def normal(cls, xi: float = 0.0, sigma: float = 1.0) -> "IidSpec":
        return cls(Family.NORMAL, xi, sigma)

    @classmethod
    def exponential(cls, rate: float = 1.0, xi: float = 1.0) -> "IidSpec":
        """``xi + (E - 1)/rate`` with ``E ~ Exp(1)``; sd ``1/rate``."""
        return cls(Family.EXPONENTIAL, xi, rate)

    @classmethod
    def uniform(cls, xi: float = 0.0, half_width: float = 1.0) -> "IidSpec":
        return cls(Family.UNIFORM, xi, half_width)

    @property
    def sigma(self) -> float:
        if self.family is Family.NORMAL:
            return self.scale
        if self.family is Family.EXPONENTIAL:
            return 1.0 / self.scale
        return self.scale / math.sqrt(3.0)

    def draw(self, gen: np.random.Generator, size: int) -> np.ndarray:
        if self.family is Family.NORMAL:
            return self.xi + self.scale * gen.standard_normal(size)
        if self.family is Family.EXPONENTIAL:
            return self.xi + (gen.standard_exponential(size) - 1.0) / self.scale
        return self.xi + self.scale * (2.0 * gen.random(size) - 1.0)

    def standardized(self, gen: np.random.Generator, size: int) -> np.ndarray:
        return (self.draw(gen, size) - self.xi) / self.sigma

    def to_json(self) -> dict:
        return {"family": self.family.value, "xi": self.xi, "scale": self.scale, "sigma": self.sigma}


class _Walk:
    """Standardized partial sums ``S_n`` delivered in chunks."""

    def __init__(self, dist: IidSpec, gen: np.random.Generator):
        self.dist, self.gen = dist, gen
        self.n = 0
        self.hi = 0.0
        self.lo = 0.0

    def chunk(self, size: int) -> tuple[np.ndarray, np.ndarray]:
        y = self.dist.standardized(self.gen, size)
        sums = self.hi + (np.cumsum(y) + self.lo)
        total = math.fsum(y)
        t = self.hi + total
        if abs(self.hi) >= abs(total):
            self.lo += (self.hi - t) + total
        else:
            self.lo += (total - t) + self.hi
        self.hi = t
        idx = np.arange(self.n + 1, self.n + size + 1)
        self.n += size
        return idx, sums


def _ceil(x: float) -> int:
    # smallest integer >= x, tolerant of representation error in products like c*m
    r = round(x)
    return int(r) if abs(x - r) < 1e-9 * max(1.0, abs(x)) else int(math.ceil(x))


def _batch(kind, dist, params, n_reps, seed, threads, one, columns=("value",)):
    t0 = time.perf_counter()

    def work(block: range):
        out = [one(rng.stream(seed, r)) for r in block]
        return np.array([o[0] for o in out], dtype=float), np.array([o[1] for o in out], dtype=bool)

    parts = rng.run_blocks(work, n_reps, _BLOCK, threads)
    values = np.concatenate([p[0] for p in parts], axis=0)
    flags = np.concatenate([p[1] for p in parts])
    config = {"dist": dist.to_json(), "n_reps": int(n_reps), "seed": int(seed)}
    return SampleBatch(kind, values, flags, params, config, tuple(columns),
                       wall_time=time.perf_counter() - t0)


def partial_sum_occupancy(dist: IidSpec, m: int, epsilon: float, c: float, b: float,
                          n_reps: int, seed: int, *, tol: float = 1e-6, margin: float = 1.0,
                          horizon_factor: int = 100, threads: int | None = None) -> SampleBatch:
    """Samples of ``V_{m,eps}(c, b)`` in the one-sided strip convention."""
    if m < 1 or epsilon <= 0 or c < 0 or b == 0:
        raise ValueError("need m >= 1, epsilon > 0, c >= 0 and b != 0")
    if c > 0 and m * c < 1:
        raise ValueError("m * c must be at least 1 when c > 0")
    n0 = _ceil(c * m)
    n_cap = horizon_factor * m
    reach = math.log(1.0 / tol) / (2.0 * abs(b))
    # escape in the units of S_n / sqrt(m) - b n / m
    stop_lo = min(-margin, -reach) if b > 0 else -math.inf
    stop_hi = max(margin, epsilon + reach) if b < 0 else math.inf
    root_m = math.sqrt(m)

    def one(gen):
        walk = _Walk(dist, gen)
        count = 1 if n0 == 0 else 0
        while walk.n < n_cap:
            idx, s = walk.chunk(min(_CHUNK, n_cap - walk.n))
            line = b * idx / m
            w = s / root_m
            y = w - line
            gone = np.flatnonzero((y < stop_lo) | (y > stop_hi))
            end = gone[0] + 1 if gone.size else len(idx)
            hits = (line[:end] <= w[:end]) & (w[:end] <= line[:end] + epsilon) & (idx[:end] >= n0)
            count += int(hits.sum())
            if gone.size:
                return count / (epsilon * m), False
        return count / (epsilon * m), True

    params = {"m": int(m), "epsilon": float(epsilon), "c": float(c), "b": float(b)}
    return _batch("partialsum", dist, params, n_reps, seed, threads, one)


def _miss_counts(dist: IidSpec, ks: Sequence[float], delta: float, c: float, tol: float,
                 margin: float, horizon_factor: int):
    """Per-replication counter of delta-misses for several shrinkage constants ``k``.

    A miss at ``n`` for constant ``k`` is ``|sigma S_n - k xi| >= delta (n + k)``,
    i.e. ``|n/(n+k) mean_n - xi| >= delta``.
    """
    if not delta > 0 or not c > 0:
        raise ValueError("delta and c must be positive")
    if any(k < 0 for k in ks):
        raise ValueError("k must be nonnegative")
    m = 1.0 / (delta * delta)
    n0 = max(1, _ceil(c * m))
    n_cap = int(math.ceil(horizon_factor * m))
    sigma, xi = dist.sigma, dist.xi
    # distance (in sigma*S units) below the boundary that counts as escaped
    gap = sigma * math.sqrt(m) * max(margin, sigma * math.log(2.0 / tol) / 2.0)
    ks = np.asarray(ks, dtype=float)[:, None]

    def one(gen):
        walk = _Walk(dist, gen)
        counts = np.zeros(len(ks), dtype=np.int64)
        while walk.n < n_cap:
            idx, s = walk.chunk(min(_CHUNK, n_cap - walk.n))
            u = np.abs(sigma * s - ks * xi)
            bound = delta * (idx + ks)
            gone = np.flatnonzero((u < bound - gap).all(axis=0))
            end = gone[0] + 1 if gone.size else len(idx)
            counts += ((u[:, :end] >= bound[:, :end]) & (idx[:end] >= n0)).sum(axis=1)
            if gone.size:
                return counts, False
        return counts, True

    return one


def delta_miss_count(dist: IidSpec, k: float, delta: float, c: float, n_reps: int, seed: int, *,
                     tol: float = 1e-6, margin: float = 1.0, horizon_factor: int = 100,
                     threads: int | None = None) -> SampleBatch:
    """Samples of ``Q_delta(k)``, the number of ``n >= c/delta^2`` at which the shrunk mean misses by ``delta``."""
    count = _miss_counts(dist, [k], delta, c, tol, margin, horizon_factor)

    def one(gen):
        v, flag = count(gen)
        return float(v[0]), flag

    params = {"k": float(k), "delta": float(delta), "c": float(c)}
    return _batch("miss", dist, params, n_reps, seed, threads, one)


def miss_count_pair(dist: IidSpec, k: float, delta: float, c: float, n_reps: int, seed: int, *,
                    tol: float = 1e-6, margin: float = 1.0, horizon_factor: int = 100,
                    threads: int | None = None) -> SampleBatch:
    """``(Q_delta(k), Q_delta(0))`` computed on the same data stream."""
    count = _miss_counts(dist, [k, 0.0], delta, c, tol, margin, horizon_factor)

    def one(gen):
        v, flag = count(gen)
        return v.astype(float), flag

    params = {"k": float(k), "delta": float(delta), "c": float(c)}
    return _batch("miss_pair", dist, params, n_reps, seed, threads, one, columns=("Q(k)", "Q(0)"))


def second_order_difference(dist: IidSpec, k: float, delta: float, c: float, n_reps: int, seed: int,
                            **kw) -> SampleBatch:
    """Samples of ``delta (Q_delta(k) - Q_delta(0))`` with both counts on shared data."""
    pair = miss_count_pair(dist, k, delta, c, n_reps, seed, **kw)
    diff = delta * (pair.values[:, 0] - pair.values[:, 1])
    return SampleBatch("difference", diff, pair.truncated, pair.params, pair.config,
                       wall_time=pair.wall_time)


def occupancy_representations(y: np.ndarray, m: int, epsilon: float, c: float, b: float):
    """The partial-sum occupancy of a finite standardized sample, three ways.

    Returns the count form, the ``T_n = S_n / sqrt(n)`` square-root-boundary
    form, and the integral of the step process ``W_m(t) = S_[mt] / sqrt(m)``.
    All three sum over ``<cm> <= n <= len(y)``; ``c > 0`` is required so that
    ``T_n`` is defined.
    """
    if not c > 0:
        raise ValueError("c must be positive")
    y = np.asarray(y, dtype=float)
    s = np.cumsum(y)
    n = np.arange(1, len(y) + 1)
    keep = n >= _ceil(c * m)
    n, s = n[keep], s[keep]

    line = b * n / m
    w = s / math.sqrt(m)
    count_form = np.sum((line <= w) & (w <= line + epsilon)) / (epsilon * m)

    t_n = s / np.sqrt(n)
    root = np.sqrt(n / m)
    sqrt_form = np.sum((b * root <= t_n) & (t_n <= b * root + epsilon * np.sqrt(m / n))) / (epsilon * m)

    # step process: on [n/m, (n+1)/m) it equals S_n / sqrt(m)
    edges = np.append(n, n[-1] + 1) / m if n.size else np.array([])
    lengths = np.diff(edges)
    step = (b * np.floor(edges[:-1] * m + 1e-9) / m <= w) & (w <= b * np.floor(edges[:-1] * m + 1e-9) / m + epsilon)
    integral_form = float(np.dot(step, lengths)) / epsilon
    return float(count_form), float(sqrt_form), integral_form
