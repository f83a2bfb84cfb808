"""Statistical checks of simulated batches against target laws.

Every check compares an estimate to its target in units of a standard error
and passes when ``|estimate - target| < se_multiplier * SE``.  KS checks use
a fixed level (p > 0.01).  A sample is an atom exactly when it equals 0.0.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special as _special
from scipy import stats as _sps

from .brownian import abs_normal_moment
from .laws import Mixture, OccupancyLaw
from .montecarlo import SampleBatch

__all__ = [
    "Check",
    "KsResult",
    "FitReport",
    "fit_against",
    "two_sample_ks",
    "ks_one_sample",
    "abs_normal_check",
    "mean_check",
    "correlation",
    "binomial_se",
    "KS_ALPHA",
    "EXACT_KS_LIMIT",
]

KS_ALPHA = 0.01
EXACT_KS_LIMIT = 10_000


@dataclass(frozen=True)
class Check:
    name: str
    estimate: float
    target: float
    se: float
    passed: bool
    detail: str = ""

    @property
    def z(self) -> float:
        return (self.estimate - self.target) / self.se if self.se > 0 else math.inf

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict} {self.name}: {self.estimate:.6g} vs {self.target:.6g} (se {self.se:.3g}) {self.detail}".rstrip()


@dataclass(frozen=True)
class KsResult:
    statistic: float
    pvalue: float
    n: int
    method: str


@dataclass
class FitReport:
    checks: list[Check]
    moments: list[dict]
    atom_fraction: float
    atom_se: float
    ks: KsResult | None
    se_multiplier: float
    echo: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json(self) -> dict:
        return _clean({
            "passed": self.passed,
            "se_multiplier": self.se_multiplier,
            "checks": [dict(asdict(c), z=_finite_or_none(c.z)) for c in self.checks],
            "moments": self.moments,
            "atom_fraction": self.atom_fraction,
            "atom_se": self.atom_se,
            "ks": asdict(self.ks) if self.ks else None,
            "echo": self.echo,
        })


def _finite_or_none(x: float):
    return x if math.isfinite(x) else None


def _clean(obj):
    """Replace non-finite floats by None so the result is strict JSON."""
    if isinstance(obj, float):
        return _finite_or_none(obj)
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _values(batch, column: int = 0) -> np.ndarray:
    if isinstance(batch, SampleBatch):
        return batch.column(column)
    return np.asarray(batch, dtype=float).ravel()


def binomial_se(p: float, n: int) -> float:
    """``sqrt(p(1-p)/n)``, floored at ``0.5/n`` so degenerate targets keep a resolution of half a sample."""
    return max(math.sqrt(p * (1.0 - p) / n), 0.5 / n)


def _ks_pvalue(d: float, n: int) -> tuple[float, str]:
    if n <= EXACT_KS_LIMIT:
        return float(_sps.kstwo.sf(d, n)), "exact"
    return float(_sps.kstwobign.sf(math.sqrt(n) * d)), "asymptotic"


def ks_one_sample(x, cdf) -> KsResult:
    """One-sample KS statistic against a continuous ``cdf`` (vectorized callable)."""
    x = np.sort(np.asarray(x, dtype=float))
    n = len(x)
    if n == 0:
        raise ValueError("empty sample")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))
    p, method = _ks_pvalue(d, n)
    return KsResult(d, min(1.0, max(0.0, p)), n, method)


def two_sample_ks(a, b) -> KsResult:
    """Two-sample KS statistic with the asymptotic Kolmogorov p-value."""
    x, y = np.sort(_values(a)), np.sort(_values(b))
    n, m = len(x), len(y)
    if n == 0 or m == 0:
        raise ValueError("both samples must be nonempty")
    grid = np.concatenate([x, y])
    fx = np.searchsorted(x, grid, side="right") / n
    fy = np.searchsorted(y, grid, side="right") / m
    d = float(np.max(np.abs(fx - fy)))
    ne = n * m / (n + m)
    p = 1.0 if d == 0 else float(_sps.kstwobign.sf(math.sqrt(ne) * d))
    return KsResult(d, min(1.0, max(0.0, p)), n + m, "asymptotic")


def mean_check(name: str, x, target: float, se_multiplier: float = 4.0, se: float | None = None) -> Check:
    x = np.asarray(x, dtype=float)
    if se is None:
        se = float(np.std(x, ddof=1) / math.sqrt(len(x))) if len(x) > 1 else math.inf
    est = float(np.mean(x))
    return Check(name, est, target, se, abs(est - target) < se_multiplier * se)


def correlation(x, y) -> tuple[float, float]:
    """Pearson correlation and its delta-method standard error."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    zx = (x - x.mean()) / x.std()
    zy = (y - y.mean()) / y.std()
    rho = float(np.mean(zx * zy))
    influence = zx * zy - 0.5 * rho * (zx * zx + zy * zy)
    return rho, float(np.std(influence, ddof=1) / math.sqrt(len(x)))


def _moment_table(x: np.ndarray, target) -> list[dict]:
    n = len(x)
    rows = []
    for p in range(1, 5):
        xp = x ** p
        se = float(np.std(xp, ddof=1) / math.sqrt(n)) if n > 1 else None
        rows.append({"order": p, "estimate": float(xp.mean()), "se": se, "target": target(p)})
    return rows


def fit_against(batch, law: OccupancyLaw, se_multiplier: float = 4.0, column: int = 0) -> FitReport:
    """Compare a batch with a mixture law: atom weight, positive-part mean and SD, and KS."""
    if not isinstance(law, Mixture):
        raise ValueError("only mixture laws can be fitted; an almost surely infinite law has no sample")
    x = _values(batch, column)
    n = len(x)
    if n == 0:
        raise ValueError("empty batch")
    k = se_multiplier
    w = law.atom_weight
    scale = 1.0 / law.rate

    p0 = float(np.mean(x == 0.0))
    se0 = binomial_se(w, n)
    checks = [Check("atom_fraction", p0, w, se0, abs(p0 - w) < k * se0)]

    pos = x[x > 0.0]
    ks = None
    if pos.size == 0:
        vacuous = w == 1.0
        note = "no positive samples"
        checks += [Check(name, math.nan, scale, math.inf, vacuous, note)
                   for name in ("positive_mean", "positive_sd", "positive_ks")]
    else:
        npos = pos.size
        se_mean = scale / math.sqrt(npos)
        m = float(pos.mean())
        checks.append(Check("positive_mean", m, scale, se_mean, abs(m - scale) < k * se_mean))
        se_sd = scale * math.sqrt(2.0 / npos)
        sd = float(pos.std(ddof=1)) if npos > 1 else 0.0
        checks.append(Check("positive_sd", sd, scale, se_sd, abs(sd - scale) < k * se_sd))
        ks = ks_one_sample(pos, lambda v: -np.expm1(-law.rate * v))
        checks.append(Check("positive_ks", ks.pvalue, KS_ALPHA, math.inf, ks.pvalue > KS_ALPHA,
                            f"D={ks.statistic:.4g} ({ks.method})"))

    echo = batch.summary() if isinstance(batch, SampleBatch) else {}
    echo.pop("truncated_indices", None)
    return FitReport(checks, _moment_table(x, law.moment), p0, se0, ks, se_multiplier,
                     {"law": law.to_json(), **({"batch": echo} if echo else {})})


_ABS_NORMAL_VAR = {1: 1.0 - 2.0 / math.pi, 2: 2.0, 4: 96.0}


def abs_normal_check(batch, se_multiplier: float = 4.0, column: int = 0) -> FitReport:
    """Moments 1, 2, 4 against ``sqrt(2/pi), 1, 3`` and KS against ``2 Phi(x) - 1``.

    Standard errors use the variances of ``|N|^p`` under the target law.
    """
    x = _values(batch, column)
    n = len(x)
    if n == 0:
        raise ValueError("empty batch")
    checks = []
    for p in (1, 2, 4):
        target = abs_normal_moment(p)
        se = math.sqrt(_ABS_NORMAL_VAR[p] / n)
        est = float(np.mean(x ** p))
        checks.append(Check(f"moment_{p}", est, target, se, abs(est - target) < se_multiplier * se))
    ks = ks_one_sample(x, lambda v: _special.erf(np.maximum(v, 0.0) / math.sqrt(2.0)))
    checks.append(Check("ks", ks.pvalue, KS_ALPHA, math.inf, ks.pvalue > KS_ALPHA,
                        f"D={ks.statistic:.4g} ({ks.method})"))
    echo = batch.summary() if isinstance(batch, SampleBatch) else {}
    echo.pop("truncated_indices", None)
    return FitReport(checks, _moment_table(x, abs_normal_moment), float(np.mean(x == 0.0)),
                     binomial_se(0.0, n), ks, se_multiplier, {"law": {"kind": "AbsNormal"}, **({"batch": echo} if echo else {})})
