import math

import numpy as np
import pytest

from linetime import brownian as bm

# Pinned by a Brownian-bridge-corrected simulation (2e5 paths, 500 steps):
# P(max_{[0,1]} |W| <= 1) = 0.37069 with standard error 0.00107.
H1_SIMULATED = 0.37069
H1_SIMULATED_SE = 0.00107


def test_normal_functions():
    assert bm.phi(0.0) == pytest.approx(0.3989422804, abs=1e-10)
    assert bm.Phi(0.0) == 0.5
    assert bm.Phi(1.0) == pytest.approx(0.8413447461, abs=1e-10)
    assert bm.Phi(-40.0) < 1e-300


def test_tail_weight():
    assert bm.tail_weight(0.0) == 1.0
    assert bm.tail_weight(1.0) == pytest.approx(0.3173105, abs=1e-7)
    assert bm.tail_weight(2.0) == pytest.approx(0.0455003, abs=1e-7)
    assert bm.tail_weight(40.0) < 1e-300


@pytest.mark.parametrize("x0,a,b,atom,rate", [
    (0, 0, -3, 0.0, 3.0),
    (0, 1, 1, 1 - math.exp(-2), 1.0),
    (5, 1, 1, 0.0, 1.0),
    (0, -1, -2, 1 - math.exp(-4), 2.0),
])
def test_line_law(x0, a, b, atom, rate):
    law = bm.line_law(x0, a, b)
    assert law.atom_weight == pytest.approx(atom, abs=1e-15)
    assert law.rate == rate


@pytest.mark.parametrize("c,b,atom", [(0, 2, 0.0), (1, 1, 1 - 0.3173105), (4, -1, 1 - 0.0455003)])
def test_truncated_law(c, b, atom):
    law = bm.truncated_law(c, b)
    assert law.atom_weight == pytest.approx(atom, abs=1e-7)
    assert law.rate == abs(b)


def test_truncated_moments():
    assert bm.truncated_moment(0, 1, 3) == 6.0
    assert bm.truncated_moment(0, 2, 3) == 0.75
    assert bm.truncated_moment(1, 1, 1) == pytest.approx(0.3173105, abs=1e-7)
    for c, b in [(0.3, 1.2), (2.0, -0.5)]:
        assert bm.truncated_moment(c, b, 1) == pytest.approx(bm.truncated_law(c, b).mean, rel=1e-12)


def test_covariance_examples():
    assert bm.cov_pair(1, 2) == pytest.approx(1 / 6)
    assert bm.cov_pair(-1, 1) == pytest.approx(-1 / 3)
    assert bm.cov_pair(1, 1) == pytest.approx(1.0)
    assert bm.cov_pair(-1, -2) == pytest.approx(1 / 6)


def test_correlation_examples():
    assert bm.corr_pair(1, 3) == pytest.approx(1 / 5)
    assert bm.corr_pair(-2, 2) == pytest.approx(-1 / 3)
    assert bm.corr_pair(0.7, 0.7) == pytest.approx(1.0)


def test_correlation_is_normalized_covariance():
    rng = np.random.default_rng(3)
    for _ in range(200):
        b, c = rng.uniform(0.1, 5, size=2) * rng.choice([-1, 1], size=2)
        rho = bm.cov_pair(b, c) / math.sqrt(bm.cov_pair(b, b) * bm.cov_pair(c, c))
        assert rho == pytest.approx(bm.corr_pair(b, c), abs=1e-12)


def test_opposite_sign_correlation_minimum():
    ks = np.geomspace(0.01, 100, 4001)
    vals = np.array([bm.corr_pair(-1.0, k) for k in ks])
    i = int(np.argmin(vals))
    assert vals[i] == pytest.approx(-1 / 3, abs=1e-12)
    assert ks[i] == pytest.approx(1.0, rel=1e-12)


def test_max_cdf():
    assert bm.max_cdf(1, 1) == pytest.approx(0.6826895, abs=1e-7)
    assert bm.max_cdf(0, 1) == 0.0
    assert bm.max_cdf(40, 1) == pytest.approx(1.0, abs=1e-12)


def test_two_sided_max_cdf():
    assert bm.two_sided_max_cdf(40.0) == pytest.approx(1.0, abs=1e-12)
    assert bm.two_sided_max_cdf(0.0) == 0.0
    us = np.linspace(0.05, 4, 80)
    h = [bm.two_sided_max_cdf(u) for u in us]
    assert all(x <= y + 1e-15 for x, y in zip(h, h[1:]))
    assert all(hu <= bm.max_cdf(u, 1.0) + 1e-15 for hu, u in zip(h, us))


def test_two_sided_series_agree():
    for u in (0.5, 0.8, 1.0, 1.7, 3.0):
        assert bm.two_sided_max_cdf(u) == pytest.approx(bm.two_sided_max_cdf_theta(u), abs=1e-14)


def test_h1_matches_simulation_oracle():
    assert abs(bm.two_sided_max_cdf(1.0) - H1_SIMULATED) < 3 * H1_SIMULATED_SE


def test_sign_patterns():
    assert bm.sign_pattern_probs(0.0) == bm.SignPatternProbs(0.0, 0.0, 0.0, 1.0)
    p = bm.sign_pattern_probs(1.0)
    assert p.p00 == pytest.approx(bm.two_sided_max_cdf(1.0))
    assert p.p01 == pytest.approx(0.6826895 - bm.two_sided_max_cdf(1.0), abs=1e-7)
    for c in (0.01, 0.5, 3.0, 20.0):
        q = bm.sign_pattern_probs(c)
        assert q.p00 + q.p01 + q.p10 + q.p11 == pytest.approx(1.0, abs=1e-14)
        assert min(q.p00, q.p01, q.p10, q.p11) >= 0


def test_cross_moment():
    assert bm.cross_moment_truncated(0.0) == pytest.approx(1 + bm.cov_pair(-1, 1), abs=1e-12)
    assert bm.cross_moment_truncated(1.0) == pytest.approx(0.0017999, abs=1e-7)
    assert bm.cross_moment_truncated(100.0) < 1e-100


@pytest.mark.parametrize("p,value", [(1, math.sqrt(2 / math.pi)), (2, 1.0), (4, 3.0)])
def test_axis_time_moments(p, value):
    assert bm.axis_time_moment(p) == pytest.approx(value, rel=1e-14)
    assert bm.abs_normal_moment(p) == pytest.approx(value, rel=1e-14)
