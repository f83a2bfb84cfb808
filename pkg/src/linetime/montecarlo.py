"""Monte Carlo estimates of strip-occupancy functionals.

Every estimator discretizes time on the grid ``t_k = k dt`` and replaces the
time integral by a sum over grid points (half weight at the first point of
the integration range).  A replication ends when the analytic probability of
ever returning to the strip drops below ``escape_return_tol`` (the escape
rule), or at ``t_max``, in which case the sample is flagged as truncated.

Constant-coefficient diffusions are advanced one replication at a time with
exact Gaussian increments in chunks; state-dependent coefficients go through
an Euler-Maruyama loop vectorized across a block of replications.  Either way
replication ``r`` draws only from :func:`linetime.rng.stream` ``(seed, r)``,
which is what makes results independent of the thread count.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from . import rng, scale
from .laws import TransienceClass
from .scale import DiffusionSpec, LineTarget

__all__ = [
    "StripMode",
    "SimConfig",
    "SampleBatch",
    "RecurrentLineError",
    "simulate_line_occupancy",
    "simulate_joint",
    "simulate_truncated",
    "simulate_axis_time",
    "simulate_exceedance_time",
    "escape_thresholds",
]

_CHUNK = 16384
_EM_CHUNK = 1024
_BLOCK = 32


class RecurrentLineError(ValueError):
    """The occupancy time along the requested line is almost surely infinite."""


class StripMode(str, enum.Enum):
    CENTERED = "Centered"
    LOWER = "Lower"


@dataclass(frozen=True)
class SimConfig:
    epsilon: float = 0.05
    dt: float = 1e-4
    t_max: float = 100.0
    escape_margin: float = 1.0
    escape_return_tol: float = 1e-6
    n_reps: int = 2000
    seed: int = 0
    strip_mode: StripMode = StripMode.CENTERED

    def __post_init__(self):
        object.__setattr__(self, "strip_mode", StripMode(self.strip_mode))
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not (0 < self.dt < self.epsilon ** 2):
            raise ValueError(f"dt={self.dt!r} must lie in (0, epsilon^2 = {self.epsilon ** 2!r})")
        if not self.t_max > self.dt:
            raise ValueError("t_max must exceed dt")
        if not self.escape_margin > 0:
            raise ValueError("escape_margin must be positive")
        if not (0 < self.escape_return_tol < 1):
            raise ValueError("escape_return_tol must lie in (0, 1)")
        if int(self.n_reps) != self.n_reps or self.n_reps < 1:
            raise ValueError("n_reps must be a positive integer")
        if not (-(1 << 63) <= int(self.seed) < (1 << 64)):
            raise ValueError("seed must fit in 64 bits")

    @property
    def strip(self) -> tuple[float, float]:
        if self.strip_mode is StripMode.CENTERED:
            return -0.5 * self.epsilon, 0.5 * self.epsilon
        return 0.0, self.epsilon

    @property
    def n_max(self) -> int:
        return int(math.ceil(self.t_max / self.dt - 1e-9))

    def with_(self, **kw) -> "SimConfig":
        return replace(self, **kw)

    def to_json(self) -> dict:
        d = asdict(self)
        d["strip_mode"] = self.strip_mode.value
        return d

    @classmethod
    def from_json(cls, d: dict) -> "SimConfig":
        return cls(**d)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt(x) for x in v)
    return str(v)


@dataclass
class SampleBatch:
    """Simulated realizations; ``values`` has one row per replication."""

    kind: str
    values: np.ndarray
    truncated: np.ndarray
    params: dict
    config: dict
    columns: tuple[str, ...] = ("value",)
    wall_time: float = field(default=0.0, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        self.values = v
        self.truncated = np.asarray(self.truncated, dtype=bool)
        if v.shape[1] != len(self.columns):
            raise ValueError("column names do not match the value matrix")
        if len(self.truncated) != v.shape[0]:
            raise ValueError("one truncation flag per replication")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def column(self, i: int = 0) -> np.ndarray:
        return self.values[:, i]

    @property
    def truncated_fraction(self) -> float:
        return float(self.truncated.mean()) if self.n else 0.0

    @property
    def reliable(self) -> bool:
        return self.truncated_fraction < 0.01

    def header(self) -> dict:
        h = {"kind": self.kind}
        h.update({k: self.params[k] for k in sorted(self.params)})
        h.update({f"cfg.{k}": self.config[k] for k in sorted(self.config)})
        h["n"] = self.n
        h["n_truncated"] = int(self.truncated.sum())
        return h

    def to_csv(self) -> str:
        lines = [f"# {k}={_fmt(v)}" for k, v in self.header().items()]
        lines.append(",".join(self.columns))
        for row in self.values:
            lines.append(",".join("%.17g" % x for x in row))
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        cols = []
        for i, name in enumerate(self.columns):
            x = self.values[:, i]
            cols.append({
                "name": name,
                "mean": float(x.mean()),
                "sd": float(x.std(ddof=1)) if self.n > 1 else 0.0,
                "zero_fraction": float(np.mean(x == 0.0)),
            })
        return {
            "kind": self.kind,
            "params": {k: self.params[k] for k in sorted(self.params)},
            "config": {k: self.config[k] for k in sorted(self.config)},
            "n": self.n,
            "columns": cols,
            "n_truncated": int(self.truncated.sum()),
            "truncated_indices": [int(i) for i in np.flatnonzero(self.truncated)],
            "reliable": self.reliable,
        }

    @classmethod
    def from_csv(cls, text: str) -> "SampleBatch":
        head, rows, columns = {}, [], None
        for line in text.splitlines():
            if line.startswith("# "):
                k, _, v = line[2:].partition("=")
                head[k] = v
            elif columns is None:
                columns = tuple(line.split(","))
            elif line:
                rows.append([float(x) for x in line.split(",")])
        n_trunc = int(head.pop("n_truncated", "0"))
        n = int(head.pop("n"))
        kind = head.pop("kind")
        config = {k[4:]: v for k, v in head.items() if k.startswith("cfg.")}
        params = {k: v for k, v in head.items() if not k.startswith("cfg.")}
        values = np.array(rows, dtype=float).reshape(n, len(columns))
        # per-sample flags are not stored in CSV; only the count survives
        flags = np.zeros(n, dtype=bool)
        flags[:n_trunc] = True
        return cls(kind, values, flags, params, config, columns)


# --------------------------------------------------------------------------
# stopping thresholds


def _const_threshold(drift: float, sigma: float, lo: float, hi: float, margin: float, tol: float):
    """Escape thresholds in shifted coordinates for constant drift/volatility."""
    reach = sigma * sigma * math.log(1.0 / tol) / (2.0 * abs(drift))
    if drift < 0:
        return min(-margin, lo - reach), math.inf
    return -math.inf, max(margin, hi + reach)


def _search_threshold(prob, start: float, direction: float, margin: float, tol: float) -> float:
    """Smallest offset ``y`` beyond ``start`` (in ``direction``) with ``prob(y) < tol``."""
    inner, step = start, margin
    for _ in range(80):
        outer = start + direction * step
        if prob(outer) < tol:
            break
        inner, step = outer, 2.0 * step
    else:
        raise scale.QuadratureError("no escape threshold found")
    for _ in range(40):
        mid = 0.5 * (inner + outer)
        if prob(mid) < tol:
            outer = mid
        else:
            inner = mid
    return outer


def escape_thresholds(spec: DiffusionSpec, line: LineTarget, cfg: SimConfig,
                      quad: scale.QuadPolicy = scale.QuadPolicy()) -> tuple[float, float]:
    """``(y_lo, y_hi)``: the path is abandoned once ``Y = X - a - b t`` is below ``y_lo`` or above ``y_hi``.

    A side on which the shifted process cannot escape gets an infinite
    threshold.  Raises :class:`RecurrentLineError` when neither side can.
    """
    lo, hi = cfg.strip
    margin, tol = cfg.escape_margin, cfg.escape_return_tol
    if spec.is_constant:
        mu = spec.mu.evaluate(0.0)
        sigma = abs(spec.sigma.evaluate(0.0))
        if mu == line.b:
            raise RecurrentLineError("drift equals the line slope: the line is recurrent")
        if sigma == 0:
            raise scale.SigmaError("sigma is zero")
        return _const_threshold(mu - line.b, sigma, lo, hi, margin, tol)
    kp, km = scale.transience_masses(spec, line, quad)
    if scale.classify(kp, km) is TransienceClass.RECURRENT_LINE:
        raise RecurrentLineError("both scale masses are infinite: the line is recurrent")
    y_lo, y_hi = -math.inf, math.inf
    if km.is_finite:
        edge = LineTarget(line.a + lo, line.b)
        masses = scale.transience_masses(spec, edge, quad)
        prob = lambda y: scale.hit_probability(spec, edge, line.a + y, quad, masses)
        y_lo = min(-margin, _search_threshold(prob, lo, -1.0, margin, tol))
    if kp.is_finite:
        edge = LineTarget(line.a + hi, line.b)
        masses = scale.transience_masses(spec, edge, quad)
        prob = lambda y: scale.hit_probability(spec, edge, line.a + y, quad, masses)
        y_hi = max(margin, _search_threshold(prob, hi, 1.0, margin, tol))
    return y_lo, y_hi


# --------------------------------------------------------------------------
# kernels


def _grid_weights(idx: np.ndarray, k0: int) -> np.ndarray:
    w = np.where(idx > k0, 1.0, 0.0)
    w[idx == k0] = 0.5
    return w


def _const_paths(gen, x0, mu, sigma, a, b, lo, hi, k0, stop_lo, stop_hi, dt, n_max):
    """Occupancy counts (in units of ``dt``) along several lines for one path.

    Returns ``(counts, truncated)``; the path stops the first time every line
    is past its escape threshold.
    """
    a = np.asarray(a, dtype=float)[:, None]
    b = np.asarray(b, dtype=float)[:, None]
    stop_lo = np.asarray(stop_lo, dtype=float)[:, None]
    stop_hi = np.asarray(stop_hi, dtype=float)[:, None]
    counts = np.zeros(a.shape[0])
    y = x0 - a[:, 0]
    if k0 == 0:
        counts += 0.5 * ((y >= lo) & (y <= hi))
    if np.all((y < stop_lo[:, 0]) | (y > stop_hi[:, 0])):
        return counts, False
    step_mean, step_sd = mu * dt, sigma * math.sqrt(dt)
    x, n = float(x0), 0
    while n < n_max:
        size = min(_CHUNK, n_max - n)
        path = x + np.cumsum(step_mean + step_sd * gen.standard_normal(size))
        idx = np.arange(n + 1, n + size + 1, dtype=float)
        ys = path - a - b * (idx * dt)
        inside = (ys >= lo) & (ys <= hi)
        gone = np.flatnonzero(((ys < stop_lo) | (ys > stop_hi)).all(axis=0))
        end = gone[0] + 1 if gone.size else size
        if n + 1 > k0:
            counts += inside[:, :end].sum(axis=1)
        else:
            counts += inside[:, :end] @ _grid_weights(idx[:end], k0)
        if gone.size:
            return counts, False
        x, n = float(path[-1]), n + size
    return counts, True


def _em_block(gens, x0, spec: DiffusionSpec, a, b, lo, hi, k0, stop_lo, stop_hi, dt, n_max):
    """Euler-Maruyama for a block of replications sharing one line."""
    reps = len(gens)
    counts = np.zeros(reps)
    flags = np.zeros(reps, dtype=bool)
    y0 = x0 - a
    if k0 == 0 and lo <= y0 <= hi:
        counts += 0.5
    if y0 < stop_lo or y0 > stop_hi:
        return counts, flags
    ids = np.arange(reps)
    x = np.full(reps, float(x0))
    sqdt = math.sqrt(dt)
    n = 0
    while ids.size and n < n_max:
        size = min(_EM_CHUNK, n_max - n)
        z = np.stack([gens[i].standard_normal(size) for i in ids])
        for j in range(size):
            k = n + j + 1
            x = x + spec.mu.evaluate_array(x) * dt + spec.sigma.evaluate_array(x) * sqdt * z[:, j]
            y = x - a - b * (k * dt)
            if k >= k0:
                hit = (y >= lo) & (y <= hi)
                counts[ids] += np.where(hit, 0.5 if k == k0 else 1.0, 0.0)
            gone = (y < stop_lo) | (y > stop_hi)
            if gone.any():
                keep = ~gone
                ids, x, z = ids[keep], x[keep], z[keep]
                if not ids.size:
                    break
        n += size
    flags[ids] = True
    return counts, flags


def _collect(parts):
    values = np.concatenate([p[0] for p in parts], axis=0)
    flags = np.concatenate([p[1] for p in parts])
    return values, flags


def _start_index(c: float, dt: float) -> int:
    return int(math.ceil(c / dt - 1e-9)) if c > 0 else 0


def _const_batch(cfg, x0, mu, sigma, a, b, k0, stop_lo, stop_hi, threads):
    lo, hi = cfg.strip

    def work(block: range):
        vals = np.empty((len(block), len(a)))
        flags = np.empty(len(block), dtype=bool)
        for row, r in enumerate(block):
            counts, flags[row] = _const_paths(rng.stream(cfg.seed, r), x0, mu, sigma, a, b, lo, hi,
                                              k0, stop_lo, stop_hi, cfg.dt, cfg.n_max)
            vals[row] = counts * (cfg.dt / cfg.epsilon)
        return vals, flags

    return _collect(rng.run_blocks(work, cfg.n_reps, _BLOCK, threads))


def simulate_line_occupancy(spec: DiffusionSpec, x0: float, line: LineTarget, cfg: SimConfig,
                            threads: int | None = None) -> SampleBatch:
    """Relative time spent by ``X`` (started at ``x0``) in the strip around ``a + b t``."""
    t0 = time.perf_counter()
    y_lo, y_hi = escape_thresholds(spec, line, cfg)
    k0 = 0
    lo, hi = cfg.strip
    if spec.is_constant:
        values, flags = _const_batch(cfg, x0, spec.mu.evaluate(0.0), spec.sigma.evaluate(0.0),
                                     [line.a], [line.b], k0, [y_lo], [y_hi], threads)
    else:
        def work(block: range):
            gens = [rng.stream(cfg.seed, r) for r in block]
            counts, flags = _em_block(gens, x0, spec, line.a, line.b, lo, hi, k0,
                                      y_lo, y_hi, cfg.dt, cfg.n_max)
            return counts * (cfg.dt / cfg.epsilon), flags

        values, flags = _collect(rng.run_blocks(work, cfg.n_reps, _BLOCK, threads))
    params = {"mu": spec.mu.to_text(), "sigma": spec.sigma.to_text(), "x0": float(x0),
              "a": float(line.a), "b": float(line.b)}
    return SampleBatch("line", values, flags, params, cfg.to_json(),
                       wall_time=time.perf_counter() - t0)


def simulate_joint(b_list: Sequence[float], cfg: SimConfig, c: float = 0.0,
                   threads: int | None = None) -> SampleBatch:
    """Occupancy along several rays ``b t`` by one Brownian path; ``c > 0`` counts only ``t >= c``."""
    b_list = [float(b) for b in b_list]
    if not b_list or any(b == 0 for b in b_list):
        raise ValueError("slopes must be nonzero")
    if len(set(b_list)) != len(b_list):
        raise ValueError("slopes must be distinct")
    if c < 0:
        raise ValueError("c must be nonnegative")
    t0 = time.perf_counter()
    lo, hi = cfg.strip
    th = [_const_threshold(-b, 1.0, lo, hi, cfg.escape_margin, cfg.escape_return_tol) for b in b_list]
    values, flags = _const_batch(cfg, 0.0, 0.0, 1.0, [0.0] * len(b_list), b_list,
                                 _start_index(c, cfg.dt), [t[0] for t in th], [t[1] for t in th], threads)
    cols = tuple(f"V(b={b!r})" for b in b_list)
    return SampleBatch("joint", values, flags, {"b": b_list, "c": float(c)}, cfg.to_json(), cols,
                       wall_time=time.perf_counter() - t0)


def simulate_truncated(c: float, b: float, cfg: SimConfig, threads: int | None = None) -> SampleBatch:
    """Relative time along ``b t`` accumulated only during ``t >= c`` (Brownian motion from 0)."""
    batch = simulate_joint([b], cfg, c, threads)
    batch.kind = "truncated"
    batch.params = {"b": float(b), "c": float(c)}
    batch.columns = ("value",)
    return batch


def simulate_axis_time(T: float, cfg: SimConfig, threads: int | None = None) -> SampleBatch:
    """``(1/(eps sqrt T))`` times the time spent in the strip about 0 during ``[0, T]``.

    The grid uses ``N = round(T/dt)`` steps of exactly ``T/N`` and the
    trapezoid weights; there is no escape rule.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    t0 = time.perf_counter()
    steps = max(1, int(round(T / cfg.dt)))
    h = T / steps
    lo, hi = cfg.strip
    scale_ = h / (cfg.epsilon * math.sqrt(T))

    def work(block: range):
        vals = np.empty(len(block))
        for row, r in enumerate(block):
            gen = rng.stream(cfg.seed, r)
            total, w, n = 0.5 * (lo <= 0.0 <= hi), 0.0, 0
            while n < steps:
                size = min(_CHUNK, steps - n)
                path = w + np.cumsum(math.sqrt(h) * gen.standard_normal(size))
                inside = (path >= lo) & (path <= hi)
                total += inside.sum()
                if n + size == steps and inside[-1]:
                    total -= 0.5
                w, n = float(path[-1]), n + size
            vals[row] = total * scale_
        return vals, np.zeros(len(block), dtype=bool)

    values, flags = _collect(rng.run_blocks(work, cfg.n_reps, _BLOCK, threads))
    return SampleBatch("axis", values, flags, {"T": float(T)}, cfg.to_json(),
                       wall_time=time.perf_counter() - t0)


def simulate_exceedance_time(c: float, inv_sigma: float, cfg: SimConfig,
                             threads: int | None = None) -> SampleBatch:
    """Time after ``c`` during which ``|W(t)| >= t * inv_sigma``.

    Accumulation starts at the first grid point ``>= max(c, dt)``.  The path
    is abandoned once ``|W|`` is more than ``max(M, log(2/tol)/(2 inv_sigma))``
    inside both rays.
    """
    if c < 0 or not inv_sigma > 0:
        raise ValueError("need c >= 0 and inv_sigma > 0")
    t0 = time.perf_counter()
    dt = cfg.dt
    k0 = max(1, _start_index(c, dt))
    gap = max(cfg.escape_margin, math.log(2.0 / cfg.escape_return_tol) / (2.0 * inv_sigma))
    n_max = cfg.n_max

    def one(gen):
        total, w, n = 0.0, 0.0, 0
        sd = math.sqrt(dt)
        while n < n_max:
            size = min(_CHUNK, n_max - n)
            path = w + np.cumsum(sd * gen.standard_normal(size))
            idx = np.arange(n + 1, n + size + 1, dtype=float)
            bound = idx * dt * inv_sigma
            absw = np.abs(path)
            gone = np.flatnonzero(absw < bound - gap)
            end = gone[0] + 1 if gone.size else size
            hits = absw[:end] >= bound[:end]
            if n + 1 > k0:
                total += hits.sum()
            else:
                total += hits @ _grid_weights(idx[:end], k0)
            if gone.size:
                return total * dt, False
            w, n = float(path[-1]), n + size
        return total * dt, True

    def work(block: range):
        out = [one(rng.stream(cfg.seed, r)) for r in block]
        return np.array([o[0] for o in out]), np.array([o[1] for o in out], dtype=bool)

    values, flags = _collect(rng.run_blocks(work, cfg.n_reps, _BLOCK, threads))
    return SampleBatch("exceedance", values, flags, {"c": float(c), "inv_sigma": float(inv_sigma)},
                       cfg.to_json(), wall_time=time.perf_counter() - t0)
