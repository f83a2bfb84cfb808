"""Scale densities, transience masses and the limit occupancy law of a diffusion.

For a diffusion ``dX = mu(X) dt + sigma(X) dW`` and the line ``x = a + b t`` the
line-shifted scale density is

    s(y) = exp(-E(y)),   E(y) = int_a^y 2 (mu(x) - b) / sigma(x)^2 dx,

and the transience masses are ``k+ = int_a^inf s`` and ``k- = int_-inf^a s``.
Finite masses mean the corresponding infinity is attracting.

The exponent ``E`` is represented by a piecewise Chebyshev antiderivative on
cells that are refined until the tail coefficients certify the interpolation
error; the improper integrals of ``s`` are summed over panels of doubling width
with vectorized adaptive Simpson inside each panel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exprparse import Expr, parse
from .laws import AlmostSurelyInfinite, ExtendedMass, Mixture, OccupancyLaw, TransienceClass

__all__ = [
    "DiffusionSpec",
    "LineTarget",
    "QuadPolicy",
    "QuadratureError",
    "SigmaError",
    "LineAnalysis",
    "scale_density",
    "exponent",
    "transience_masses",
    "classify",
    "hit_probability",
    "limit_law",
    "analyze",
]

_LOG_MAX = 700.0


class QuadratureError(RuntimeError):
    """The quadrature failed for a reason other than divergence."""


class SigmaError(ValueError):
    """sigma(x) was not strictly positive at a probed point."""


@dataclass(frozen=True)
class DiffusionSpec:
    mu: Expr
    sigma: Expr

    @classmethod
    def from_strings(cls, mu: str, sigma: str) -> "DiffusionSpec":
        return cls(parse(mu), parse(sigma))

    @classmethod
    def brownian(cls) -> "DiffusionSpec":
        return cls.from_strings("0", "1")

    @property
    def is_constant(self) -> bool:
        return self.mu.is_constant() and self.sigma.is_constant()

    def sigma_at(self, x: float) -> float:
        s = self.sigma.evaluate(x)
        if not s > 0:
            raise SigmaError(f"sigma({x!r}) = {s!r} is not positive")
        return s

    def drift_ratio(self, xs: np.ndarray, b: float) -> np.ndarray:
        """``2 (mu - b) / sigma^2`` evaluated elementwise."""
        sig = self.sigma.evaluate_array(xs)
        bad = ~(sig > 0)
        if bad.any():
            x = float(np.broadcast_to(xs, sig.shape)[bad][0])
            raise SigmaError(f"sigma({x!r}) = {float(sig[bad][0])!r} is not positive")
        return 2.0 * (self.mu.evaluate_array(xs) - b) / (sig * sig)

    def to_json(self) -> dict:
        return {"mu": self.mu.to_text(), "sigma": self.sigma.to_text()}


@dataclass(frozen=True)
class LineTarget:
    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError("line intercept and slope must be finite")


@dataclass(frozen=True)
class QuadPolicy:
    rel_tol: float = 1e-10
    # exponent interpolation
    cells_per_panel: int = 32
    cheb_points: int = 24
    exponent_abs_tol: float = 1e-12
    max_refine: int = 40
    # adaptive Simpson inside a panel
    simpson_initial: int = 32
    simpson_max_depth: int = 50
    # tail stopping rules
    converge_fraction: float = 1e-14
    stall_panels: int = 40
    stall_fraction: float = 1e-14
    stall_total: float = 1e12
    ratio_panels: int = 20
    ratio_threshold: float = 0.999
    max_panels: int = 1000


# Chebyshev points of the first kind and the value->coefficient transform.
def _cheb_setup(n: int):
    k = np.arange(n)
    theta = np.pi * (k + 0.5) / n
    nodes = np.cos(theta)
    transform = np.cos(np.outer(np.arange(n), theta)) * (2.0 / n)
    transform[0] *= 0.5
    # antiderivative of sum c_j T_j on [-1, 1] vanishing at -1
    return nodes, transform


def _clenshaw(t: np.ndarray, coef: np.ndarray) -> np.ndarray:
    """Evaluate rows of Chebyshev coefficients ``coef`` at points ``t``."""
    b1 = np.zeros_like(t)
    b2 = np.zeros_like(t)
    for j in range(coef.shape[1] - 1, 0, -1):
        b1, b2 = 2.0 * t * b1 - b2 + coef[:, j], b1
    return t * b1 - b2 + coef[:, 0]


class _ExponentPiece:
    """Antiderivative of the drift ratio over one interval, cell by cell."""

    def __init__(self, left, right, coef, e_left):
        self.left = left
        self.right = right
        self.coef = coef
        self.e_left = e_left

    def __call__(self, y: np.ndarray) -> np.ndarray:
        idx = np.clip(np.searchsorted(self.left, y, side="right") - 1, 0, len(self.left) - 1)
        l, r = self.left[idx], self.right[idx]
        t = np.clip((2.0 * y - l - r) / (r - l), -1.0, 1.0)
        return self.e_left[idx] + _clenshaw(t, self.coef[idx])


class _ScaleIntegrator:
    def __init__(self, spec: DiffusionSpec, line: LineTarget, quad: QuadPolicy):
        self.spec = spec
        self.line = line
        self.quad = quad
        self.nodes, self.transform = _cheb_setup(quad.cheb_points)

    # -- exponent -------------------------------------------------------
    def _fit_cells(self, left: np.ndarray, right: np.ndarray):
        """Fit cells, bisecting any whose Chebyshev tail is not negligible."""
        q = self.quad
        done_l, done_r, done_c = [], [], []
        for _ in range(q.max_refine):
            half = 0.5 * (right - left)
            xs = 0.5 * (left + right)[:, None] + half[:, None] * self.nodes[None, :]
            g = self.spec.drift_ratio(xs, self.line.b)
            c = g @ self.transform.T
            integ = np.polynomial.chebyshev.chebint(c, axis=1, lbnd=-1) * half[:, None]
            tail = np.abs(c[:, -3:]).max(axis=1) * half
            scale = np.abs(g).max(axis=1) * half
            ok = tail <= q.exponent_abs_tol + 1e-14 * scale
            done_l.append(left[ok])
            done_r.append(right[ok])
            done_c.append(integ[ok])
            if ok.all():
                break
            mid = 0.5 * (left[~ok] + right[~ok])
            left = np.concatenate([left[~ok], mid])
            right = np.concatenate([mid, right[~ok]])
        else:
            raise QuadratureError("exponent interpolation did not converge")
        left = np.concatenate(done_l)
        right = np.concatenate(done_r)
        coef = np.concatenate(done_c)
        order = np.argsort(left, kind="stable")
        return left[order], right[order], coef[order]

    def _piece(self, lo: float, hi: float, e_anchor: float, anchor_is_left: bool) -> _ExponentPiece:
        n = self.quad.cells_per_panel
        edges = np.linspace(lo, hi, n + 1)
        left, right, coef = self._fit_cells(edges[:-1], edges[1:])
        half = 0.5 * (right - left)
        # value of each cell's antiderivative at its right edge
        inc = _clenshaw(np.ones_like(left), coef)
        if anchor_is_left:
            e_left = e_anchor + np.concatenate([[0.0], np.cumsum(inc[:-1])])
        else:
            e_left = e_anchor - np.cumsum(inc[::-1])[::-1]
        del half
        return _ExponentPiece(left, right, coef, e_left)

    @staticmethod
    def _panel_offsets(k: int) -> tuple[float, float]:
        if k == 0:
            return 0.0, 1.0
        return float(2 ** (k - 1)), float(2 ** k)

    def exponent(self, y: float) -> float:
        """E(y), integrating outward from the intercept in doubling panels."""
        a = self.line.a
        if y == a:
            return 0.0
        direction = 1.0 if y > a else -1.0
        dist = abs(y - a)
        e = 0.0
        k = 0
        while True:
            o_lo, o_hi = self._panel_offsets(k)
            o_hi = min(o_hi, dist)
            lo, hi = sorted((a + direction * o_lo, a + direction * o_hi))
            piece = self._piece(lo, hi, e, anchor_is_left=direction > 0)
            end = hi if direction > 0 else lo
            e = float(piece(np.array([end]))[0])
            if o_hi >= dist:
                return e
            k += 1

    # -- scale density integrals ------------------------------------------
    def _simpson(self, f, lo: float, hi: float) -> float:
        q = self.quad
        n0 = q.simpson_initial
        edges = np.linspace(lo, hi, n0 + 1)
        a, b = edges[:-1], edges[1:]
        m = 0.5 * (a + b)
        vals = f(np.concatenate([a, m, b[-1:]]))
        fa, fm = vals[:n0], vals[n0:2 * n0]
        fb = np.concatenate([fa[1:], vals[-1:]])
        whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
        scale = abs(float(whole.sum()))
        if scale == 0.0:
            return 0.0
        tol_density = q.rel_tol * scale / (hi - lo)
        accepted = []
        for _ in range(q.simpson_max_depth):
            lm = 0.5 * (a + m)
            rm = 0.5 * (m + b)
            fv = f(np.concatenate([lm, rm]))
            flm, frm = fv[:len(a)], fv[len(a):]
            left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
            right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
            delta = left + right - whole
            ok = np.abs(delta) <= 15.0 * tol_density * (b - a)
            accepted.append(left[ok] + right[ok] + delta[ok] / 15.0)
            if ok.all():
                return math.fsum(np.concatenate(accepted))
            nk = ~ok
            a, m, b = (np.concatenate([a[nk], m[nk]]),
                       np.concatenate([lm[nk], rm[nk]]),
                       np.concatenate([m[nk], b[nk]]))
            fa, fm, fb = (np.concatenate([fa[nk], fm[nk]]),
                          np.concatenate([flm[nk], frm[nk]]),
                          np.concatenate([fm[nk], fb[nk]]))
            whole = np.concatenate([left[nk], right[nk]])
        raise QuadratureError(f"adaptive Simpson did not converge on [{lo}, {hi}]")

    def tail(self, x0: float, direction: float) -> tuple[float, float, bool]:
        """Integral of ``s(y)/s(x0)`` over ``[x0, inf)`` (direction +1) or ``(-inf, x0]``.

        Returns ``(log_s_x0, value, heuristic)`` where ``value`` is ``inf`` when
        the integral diverges; ``heuristic`` flags a divergence verdict reached
        by the panel heuristics rather than by overflow.
        """
        q = self.quad
        e0 = self.exponent(x0)
        e_start = 0.0
        contributions: list[float] = []
        total = 0.0
        stall_run = 0
        ratio_run = 0
        prev = None
        for k in range(q.max_panels):
            o_lo, o_hi = self._panel_offsets(k)
            lo, hi = sorted((x0 + direction * o_lo, x0 + direction * o_hi))
            piece = self._piece(lo, hi, e_start, anchor_is_left=direction > 0)
            probe = piece(np.linspace(lo, hi, 257))
            if -probe.min() > _LOG_MAX:
                return -e0, math.inf, False

            def s(y, piece=piece):
                return np.exp(-piece(y))

            v = self._simpson(s, lo, hi)
            contributions.append(v)
            total = math.fsum(contributions)
            if total > 1e300:
                return -e0, math.inf, False
            if v <= q.converge_fraction * total:
                return -e0, total, False
            stall_run = stall_run + 1 if v > q.stall_fraction * total else 0
            if stall_run >= q.stall_panels and total > q.stall_total:
                return -e0, math.inf, True
            if prev is not None and prev > 0 and v / prev >= q.ratio_threshold:
                ratio_run += 1
            else:
                ratio_run = 0
            if ratio_run >= q.ratio_panels:
                return -e0, math.inf, True
            prev = v
            end = hi if direction > 0 else lo
            e_start = float(piece(np.array([end]))[0])
        raise QuadratureError("tail integral undecided after max_panels panels")


def exponent(spec: DiffusionSpec, line: LineTarget, y: float, quad: QuadPolicy = QuadPolicy()) -> float:
    return _ScaleIntegrator(spec, line, quad).exponent(y)


def scale_density(spec: DiffusionSpec, line: LineTarget, y: float,
                  quad: QuadPolicy = QuadPolicy()) -> float:
    """``s_{a,b}(y) = exp(-int_a^y 2 (mu - b)/sigma^2)``; equals 1 at ``y = a``."""
    e = exponent(spec, line, y, quad)
    if -e > 709.0:
        raise OverflowError(f"scale density overflows at y={y!r}")
    return math.exp(-e)


def transience_masses(spec: DiffusionSpec, line: LineTarget,
                      quad: QuadPolicy = QuadPolicy()) -> tuple[ExtendedMass, ExtendedMass]:
    spec.sigma_at(line.a)
    integ = _ScaleIntegrator(spec, line, quad)
    out = []
    for direction in (1.0, -1.0):
        _, v, heuristic = integ.tail(line.a, direction)
        out.append(ExtendedMass(v, heuristic) if math.isfinite(v) else ExtendedMass.infinite(heuristic))
    return out[0], out[1]


def classify(k_plus: ExtendedMass, k_minus: ExtendedMass) -> TransienceClass:
    if k_plus.is_finite and k_minus.is_finite:
        return TransienceClass.BOTH_ATTRACTING
    if k_plus.is_finite:
        return TransienceClass.PLUS_ATTRACTING
    if k_minus.is_finite:
        return TransienceClass.MINUS_ATTRACTING
    return TransienceClass.RECURRENT_LINE


def _hit(integ: _ScaleIntegrator, k_plus: ExtendedMass, k_minus: ExtendedMass, x: float) -> float:
    a = integ.line.a
    if x == a:
        return 1.0
    direction = 1.0 if x > a else -1.0
    k = k_plus if x > a else k_minus
    if not k.is_finite:
        return 1.0
    log_s, v, _ = integ.tail(x, direction)
    if v == 0.0:
        return 0.0
    w = math.exp(log_s + math.log(v) - math.log(k.value))
    return min(1.0, max(0.0, w))


def hit_probability(spec: DiffusionSpec, line: LineTarget, x: float,
                    quad: QuadPolicy = QuadPolicy(),
                    masses: tuple[ExtendedMass, ExtendedMass] | None = None) -> float:
    """Probability that the line-shifted process started at ``x`` reaches level ``a``."""
    if masses is None:
        masses = transience_masses(spec, line, quad)
    return _hit(_ScaleIntegrator(spec, line, quad), masses[0], masses[1], x)


@dataclass(frozen=True)
class LineAnalysis:
    k_plus: ExtendedMass
    k_minus: ExtendedMass
    transience: TransienceClass
    hit_probability: float
    sigma_at_a: float
    law: OccupancyLaw

    @property
    def heuristic(self) -> bool:
        return self.k_plus.heuristic or self.k_minus.heuristic

    def to_json(self) -> dict:
        law = self.law.to_json()
        return {
            "law": law,
            "transience": self.transience.value,
            "k_plus": self.k_plus.to_json(),
            "k_minus": self.k_minus.to_json(),
            "w": self.hit_probability,
            "alpha": law.get("rate"),
            "sigma_at_a": self.sigma_at_a,
            "heuristic_divergence": self.heuristic,
        }


def analyze(spec: DiffusionSpec, line: LineTarget, x0: float,
            quad: QuadPolicy = QuadPolicy()) -> LineAnalysis:
    integ = _ScaleIntegrator(spec, line, quad)
    kp, km = transience_masses(spec, line, quad)
    cls = classify(kp, km)
    sig_a = spec.sigma_at(line.a)
    if cls is TransienceClass.RECURRENT_LINE:
        return LineAnalysis(kp, km, cls, 1.0, sig_a, AlmostSurelyInfinite())
    w = _hit(integ, kp, km, x0)
    rate = 0.5 * sig_a ** 2 * (kp.reciprocal + km.reciprocal)
    return LineAnalysis(kp, km, cls, w, sig_a, Mixture(1.0 - w, rate))


def limit_law(spec: DiffusionSpec, line: LineTarget, x0: float,
              quad: QuadPolicy = QuadPolicy()) -> OccupancyLaw:
    """Limit law of the relative time spent along ``x = a + b t`` from ``X(0) = x0``."""
    return analyze(spec, line, x0, quad).law
