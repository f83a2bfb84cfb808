import itertools
import math

import numpy as np
import pytest
from scipy import stats as sps

from linetime import stats
from linetime.laws import Mixture
from linetime.montecarlo import SampleBatch


def _batch(x):
    return SampleBatch("test", np.asarray(x, dtype=float), np.zeros(len(x), dtype=bool), {}, {})


@pytest.mark.parametrize("n,d", [(5, 0.56328), (10, 0.40925), (20, 0.29408)])
def test_ks_critical_values(n, d):
    # 5% critical values of the one-sample statistic
    assert sps.kstwo.sf(d, n) == pytest.approx(0.05, abs=5e-4)


def test_two_sample_statistic_against_brute_force():
    gen = np.random.default_rng(0)
    for _ in range(20):
        a, b = gen.normal(size=7), gen.normal(0.5, 1, size=9)
        grid = np.concatenate([a, b])
        brute = max(abs(np.mean(a <= g) - np.mean(b <= g)) for g in grid)
        assert stats.two_sample_ks(a, b).statistic == pytest.approx(brute, abs=1e-12)


def test_two_sample_extreme_arrangement_count():
    # among C(10,5) = 252 interleavings of 5 and 5 points exactly 2 give D = 1
    hits = 0
    for pos in itertools.combinations(range(10), 5):
        a = np.array(pos, dtype=float)
        b = np.array([i for i in range(10) if i not in pos], dtype=float)
        hits += stats.two_sample_ks(a, b).statistic == 1.0
    assert hits == 2


def test_two_sample_identical_and_disjoint():
    x = np.linspace(0, 1, 50)
    assert stats.two_sample_ks(x, x).pvalue == 1.0
    r = stats.two_sample_ks(x, x + 5)
    assert r.statistic == 1.0 and r.pvalue < 1e-10


def test_one_sample_methods():
    gen = np.random.default_rng(1)
    small = stats.ks_one_sample(gen.uniform(size=100), lambda v: np.clip(v, 0, 1))
    assert small.method == "exact" and small.pvalue > 0.01
    big = stats.ks_one_sample(gen.uniform(size=20000), lambda v: np.clip(v, 0, 1))
    assert big.method == "asymptotic"


def test_binomial_se_floor():
    assert stats.binomial_se(0.0, 100) == pytest.approx(0.005)
    assert stats.binomial_se(0.5, 100) == pytest.approx(0.05)


def test_exponential_fit_passes_and_wrong_rate_fails():
    gen = np.random.default_rng(2)
    x = gen.exponential(0.5, size=4000)
    assert stats.fit_against(_batch(x), Mixture(0.0, 2.0)).passed
    report = stats.fit_against(_batch(x), Mixture(0.0, 1.0))
    assert not report.passed
    assert not report.check("positive_mean").passed


def test_mixture_fit_uses_atom():
    gen = np.random.default_rng(3)
    x = np.where(gen.uniform(size=5000) < 0.3, 0.0, gen.exponential(1.0, size=5000))
    rep = stats.fit_against(_batch(x), Mixture(0.3, 1.0))
    assert rep.passed
    assert rep.check("atom_fraction").estimate == pytest.approx(0.3, abs=0.03)
    assert not stats.fit_against(_batch(x), Mixture(0.0, 1.0)).passed


def test_all_zero_batch():
    zeros = _batch(np.zeros(100))
    assert stats.fit_against(zeros, Mixture(1.0, 1.0)).passed
    assert not stats.fit_against(zeros, Mixture(0.5, 1.0)).passed
    report = stats.fit_against(zeros, Mixture(1.0, 1.0)).to_json()
    assert report["checks"][1]["estimate"] is None


def test_correlation_standard_error():
    gen = np.random.default_rng(4)
    z = gen.normal(size=(20000, 2))
    x, y = z[:, 0], 0.6 * z[:, 0] + 0.8 * z[:, 1]
    rho, se = stats.correlation(x, y)
    assert rho == pytest.approx(0.6, abs=4 * se)
    assert se == pytest.approx((1 - 0.36) / math.sqrt(20000), rel=0.1)


def test_abs_normal_check():
    gen = np.random.default_rng(5)
    assert stats.abs_normal_check(_batch(np.abs(gen.normal(size=5000)))).passed
    assert not stats.abs_normal_check(_batch(np.full(5000, 0.8))).passed


def test_mean_check():
    c = stats.mean_check("m", [1.0, 2.0, 3.0], 2.0)
    assert c.passed and c.z == 0.0
    assert "m" in c.line()
