import math

import numpy as np
import pytest

from linetime import brownian, stats
from linetime.montecarlo import (
    RecurrentLineError,
    SampleBatch,
    SimConfig,
    StripMode,
    escape_thresholds,
    simulate_axis_time,
    simulate_exceedance_time,
    simulate_joint,
    simulate_line_occupancy,
    simulate_truncated,
)
from linetime.scale import DiffusionSpec, LineTarget

BM = DiffusionSpec.brownian()
FAST = SimConfig(epsilon=0.1, dt=1e-3, t_max=60.0, n_reps=400, seed=11)


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(epsilon=0.01, dt=1e-4)
    with pytest.raises(ValueError):
        SimConfig(n_reps=0)
    cfg = SimConfig(strip_mode="Lower")
    assert cfg.strip == (0.0, cfg.epsilon)
    assert SimConfig.from_json(cfg.to_json()) == cfg


def test_same_output_for_any_thread_count():
    cfg = FAST.with_(n_reps=70)
    runs = [simulate_line_occupancy(BM, 0.0, LineTarget(0.3, 1.0), cfg, threads=t) for t in (1, 3, 8)]
    for other in runs[1:]:
        np.testing.assert_array_equal(runs[0].values, other.values)
        assert runs[0].to_csv() == other.to_csv()


def test_seed_changes_output():
    a = simulate_truncated(0.5, 1.0, FAST.with_(n_reps=50))
    b = simulate_truncated(0.5, 1.0, FAST.with_(n_reps=50, seed=12))
    assert not np.array_equal(a.values, b.values)


def test_recurrent_line_is_rejected():
    with pytest.raises(RecurrentLineError):
        simulate_line_occupancy(BM, 0.0, LineTarget(0.0, 0.0), FAST)


def test_atom_weight_matches_hitting_probability():
    rng = np.random.default_rng(4)
    cfg = FAST.with_(n_reps=300)
    for i in range(10):
        b = float(rng.uniform(0.5, 2.0) * rng.choice([-1, 1]))
        a = float(rng.uniform(0.05, 0.6) * np.sign(b))
        law = brownian.line_law(0.0, a, b)
        batch = simulate_line_occupancy(BM, 0.0, LineTarget(a, b), cfg.with_(seed=100 + i))
        p0 = float(np.mean(batch.column() == 0))
        se = stats.binomial_se(law.atom_weight, batch.n)
        # discrete monitoring misses a few crossings; allow that bias on top of 4 SE
        assert abs(p0 - law.atom_weight) < 4 * se + 0.03, (a, b, p0, law.atom_weight)


def test_rate_on_the_ray():
    batch = simulate_line_occupancy(BM, 0.0, LineTarget(0.0, 2.0), FAST.with_(n_reps=800))
    x = batch.column()
    assert np.all(x > 0)
    assert abs(x.mean() - 0.5) < 4 * 0.5 / math.sqrt(batch.n) + 0.02


def test_general_diffusion_path_runs():
    spec = DiffusionSpec.from_strings("2 + 0*x", "1")
    batch = simulate_line_occupancy(spec, 0.0, LineTarget(0.0, 1.0), FAST.with_(n_reps=64))
    assert batch.n == 64 and np.all(batch.column() >= 0)
    assert abs(batch.column().mean() - 1.0) < 0.5


def test_truncation_is_flagged():
    short = FAST.with_(t_max=0.05, n_reps=40)
    batch = simulate_line_occupancy(BM, 0.0, LineTarget(0.0, 1.0), short)
    assert batch.truncated.all()
    assert not batch.reliable


def test_escape_thresholds_bracket_the_strip():
    lo, hi = escape_thresholds(BM, LineTarget(0.0, 1.0), FAST)
    assert lo < -FAST.epsilon and hi == math.inf
    lo, hi = escape_thresholds(BM, LineTarget(0.0, -1.0), FAST)
    assert lo == -math.inf and hi > FAST.epsilon


def test_truncation_at_zero_equals_plain_ray():
    cfg = FAST.with_(n_reps=40)
    a = simulate_truncated(0.0, 1.0, cfg)
    b = simulate_line_occupancy(BM, 0.0, LineTarget(0.0, 1.0), cfg)
    np.testing.assert_allclose(a.column(), b.column(), rtol=0, atol=1e-12)


def test_far_on_escape_side_gives_zeros():
    # X - (a + b t) drifts upward for b < 0, so a start far above never returns
    batch = simulate_line_occupancy(BM, 30.0, LineTarget(0.0, -1.0), FAST.with_(n_reps=20))
    assert np.all(batch.column() == 0)


def test_joint_columns_and_positivity():
    batch = simulate_joint([1.0, -1.0], FAST.with_(n_reps=200))
    assert batch.columns == ("V(b=1.0)", "V(b=-1.0)")
    assert batch.values.shape == (200, 2)
    assert np.all(batch.values > 0)
    rho, se = stats.correlation(batch.values[:, 0], batch.values[:, 1])
    assert rho < 0


def test_joint_rejects_repeated_slopes():
    with pytest.raises(ValueError):
        simulate_joint([1.0, 1.0], FAST)


def test_axis_time_first_moment():
    batch = simulate_axis_time(1.0, FAST.with_(n_reps=1000))
    x = batch.column()
    assert abs(x.mean() - math.sqrt(2 / math.pi)) < 4 * x.std() / math.sqrt(len(x)) + 0.03


def test_exceedance_time_nonnegative_with_right_zero_fraction():
    batch = simulate_exceedance_time(1.0, 1.0, FAST.with_(n_reps=600))
    x = batch.column()
    assert np.all(x >= 0)
    zero = float(np.mean(x == 0))
    target = brownian.two_sided_max_cdf(1.0)
    assert abs(zero - target) < 4 * stats.binomial_se(target, len(x)) + 0.03


def test_csv_round_trip():
    batch = simulate_joint([1.0, 2.0], FAST.with_(n_reps=25, strip_mode=StripMode.LOWER), c=0.5)
    text = batch.to_csv()
    again = SampleBatch.from_csv(text)
    np.testing.assert_array_equal(again.values, batch.values)
    np.testing.assert_array_equal(again.truncated, batch.truncated)
    assert again.columns == batch.columns
    assert again.kind == batch.kind
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    assert len(lines) == 26


def test_summary_fields():
    batch = simulate_truncated(1.0, 1.0, FAST.with_(n_reps=50))
    s = batch.summary()
    assert s["n"] == 50
    assert {"mean", "sd", "zero_fraction"} <= set(s["columns"][0])
