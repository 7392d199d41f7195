import numpy as np
import pytest

from src.core.demand import LinearDemand, StepDemand
from src.core.objective import REVENUE, WELFARE, objective_array
from src.ironing.envelope import coarsen, envelope_derivative, envelope_value, iron, scaled
from src.ironing.mixture import price_mixture
from src.utils.errors import ValidationError


def brute_force_envelope(x, y):
    """max over chords (i, j) spanning each point, O(n^3)."""
    n = len(x)
    best = y.copy()
    i, j = np.triu_indices(n, k=1)
    for k in range(n):
        span = (x[i] <= x[k]) & (x[k] <= x[j])
        if span.any():
            a, b = i[span], j[span]
            chord = y[a] + (y[b] - y[a]) * (x[k] - x[a]) / (x[b] - x[a])
            best[k] = max(best[k], chord.max())
    return best


def random_step_curve(rng):
    atoms = rng.integers(1, 7)
    return StepDemand(atoms=[(float(v), float(m)) for v, m in zip(rng.uniform(0.1, 5.0, atoms), rng.uniform(0.05, 0.5, atoms))])


def test_concave_objective_is_its_own_envelope():
    env = iron(LinearDemand(intercept=1.0, slope=1.0), 0.0, REVENUE, grid_size=101)
    assert np.allclose(env.values, env.value_array(np.asarray(env.breakpoints)))
    assert np.allclose(env.value_array(np.asarray(env.grid)), env.raw_values, atol=1e-12)
    assert env.ironed_intervals() == []


def test_step_curve_is_ironed_between_atoms():
    env = iron(StepDemand(atoms=[(3.0, 0.3), (1.0, 0.5)]), 0.0, REVENUE, grid_size=101)
    assert env.breakpoints == pytest.approx((0.0, 0.3, 0.8))
    assert env.values == pytest.approx((0.0, 0.9, 0.8))
    assert env.ironed_intervals() == [pytest.approx((0.3, 0.8))]
    assert envelope_value(env, 0.55) == pytest.approx(0.85)


def test_envelope_matches_brute_force_hull():
    rng = np.random.default_rng(7)
    for _ in range(40):
        curve = random_step_curve(rng)
        cost = float(rng.uniform(0.0, 0.5))
        env = iron(curve, cost, REVENUE, grid_size=120)
        grid = np.asarray(env.grid)
        expected = brute_force_envelope(grid, np.asarray(env.raw_values))
        assert np.allclose(env.value_array(grid), expected, atol=1e-9)


@pytest.mark.slow
def test_envelope_is_least_concave_majorant_on_fine_grid():
    # concave, above every sample and touching the samples at its breakpoints
    rng = np.random.default_rng(17)
    for _ in range(200):
        curve = random_step_curve(rng)
        env = iron(curve, float(rng.uniform(0.0, 0.5)), REVENUE, grid_size=10_000)
        grid, raw = np.asarray(env.grid), np.asarray(env.raw_values)
        assert len(grid) >= 10_000
        assert np.all(env.value_array(grid) >= raw - 1e-9)
        assert np.all(np.diff(env.slopes) <= 1e-9)
        bq = np.asarray(env.breakpoints)
        assert np.allclose(env.values, np.interp(bq, grid, raw), atol=1e-9)


def test_envelope_lies_above_welfare_and_ends_match():
    curve = StepDemand(atoms=[(2.0, 0.4), (0.5, 0.4), (1.5, 0.1)])
    env = iron(curve, 0.1, WELFARE, grid_size=200)
    raw = np.asarray(env.raw_values)
    assert np.all(env.value_array(np.asarray(env.grid)) >= raw - 1e-12)
    assert env.values[0] == pytest.approx(raw[0])
    assert env.values[-1] == pytest.approx(raw[-1])
    assert np.all(np.diff(env.slopes) <= 1e-12)


def test_envelope_derivative_is_one_sided_at_kinks():
    env = iron(StepDemand(atoms=[(3.0, 0.3), (1.0, 0.5)]), 0.0, REVENUE, grid_size=101)
    assert envelope_derivative(env, 0.3) == pytest.approx((3.0, -0.2))
    assert envelope_derivative(env, 0.5) == pytest.approx((-0.2, -0.2))
    assert envelope_derivative(env, 0.0) == pytest.approx((3.0, 3.0))


def test_envelope_value_rejects_out_of_range():
    env = iron(LinearDemand(intercept=1.0, slope=1.0), 0.0, REVENUE, grid_size=11)
    with pytest.raises(ValidationError):
        envelope_value(env, 1.5)
    with pytest.raises(ValidationError):
        iron(LinearDemand(), 0.0, REVENUE, grid_size=1)


def test_coarsen_keeps_both_ends():
    env = iron(LinearDemand(intercept=1.0, slope=1.0), 0.0, REVENUE, grid_size=1001)
    small = coarsen(env, 10)
    assert len(small.breakpoints) == 11
    assert small.breakpoints[0] == 0.0 and small.breakpoints[-1] == pytest.approx(1.0)
    assert np.all(np.diff(small.slopes) <= 1e-12)
    assert coarsen(small, 50) is small
    with pytest.raises(ValidationError):
        coarsen(env, 0)


def test_scaled_envelope():
    env = iron(LinearDemand(intercept=1.0, slope=1.0), 0.0, REVENUE, grid_size=101)
    half = scaled(env, 0.5)
    assert half.breakpoints == env.breakpoints
    assert envelope_value(half, 0.5) == pytest.approx(0.125)
    assert half.scale == 0.5


def test_mixture_on_ironed_interval():
    curve = StepDemand(atoms=[(3.0, 0.3), (1.0, 0.5)])
    env = iron(curve, 0.0, REVENUE, grid_size=101)
    mix = price_mixture(env, curve, 0.55)
    assert [e.price for e in mix.entries] == pytest.approx([3.0, 1.0])
    assert [e.probability for e in mix.entries] == pytest.approx([0.5, 0.5])
    assert mix.expected_throughput() == pytest.approx(0.55)
    assert mix.expected_demand(curve) == pytest.approx(0.55)
    assert mix.expected_objective(curve, env) == pytest.approx(0.85)


def test_mixture_is_deterministic_where_envelope_touches():
    curve = StepDemand(atoms=[(3.0, 0.3), (1.0, 0.5)])
    env = iron(curve, 0.0, REVENUE, grid_size=101)
    mix = price_mixture(env, curve, 0.3)
    assert len(mix.entries) == 1
    assert mix.entries[0].price == pytest.approx(3.0)
    with pytest.raises(ValidationError):
        price_mixture(env, curve, 0.0)


@pytest.mark.parametrize("trials", [200, pytest.param(1000, marks=pytest.mark.slow)])
def test_mixture_attains_envelope_on_random_curves(trials):
    rng = np.random.default_rng(11)
    for _ in range(trials):
        curve = random_step_curve(rng)
        cost = float(rng.uniform(0.0, 0.3))
        env = iron(curve, cost, REVENUE, grid_size=60)
        q_bar = float(rng.uniform(1e-3, 1.0)) * env.top
        mix = price_mixture(env, curve, q_bar)
        assert sum(e.probability for e in mix.entries) == pytest.approx(1.0)
        assert mix.expected_demand(curve) == pytest.approx(q_bar, abs=1e-6)
        assert mix.expected_objective(curve, env) == pytest.approx(envelope_value(env, q_bar), abs=1e-6)


@pytest.mark.parametrize("trials", [100, pytest.param(1000, marks=pytest.mark.slow)])
def test_no_two_point_price_mix_beats_envelope(trials):
    rng = np.random.default_rng(3)
    for _ in range(trials):
        curve = random_step_curve(rng)
        env = iron(curve, 0.0, REVENUE, grid_size=60)
        p1, p2 = sorted(rng.uniform(0.0, 5.0, 2))
        d_high, d_low = curve.evaluate(p1), curve.evaluate(p2)
        if d_high - d_low < 1e-9:
            continue
        q_bar = float(rng.uniform(d_low, d_high))
        prob_low = (d_high - q_bar) / (d_high - d_low)
        value = prob_low * p2 * d_low + (1 - prob_low) * p1 * d_high
        assert value <= envelope_value(env, q_bar) + 1e-9


def test_raw_objective_matches_samples():
    curve = LinearDemand(intercept=2.0, slope=1.0, volume=1.0)
    env = iron(curve, 0.0, REVENUE, grid_size=11)
    grid = np.asarray(env.grid)
    assert np.allclose(env.raw_values, objective_array(curve, 0.0, REVENUE, grid))


def test_welfare_envelope_is_concave():
    rng = np.random.default_rng(23)
    for _ in range(50):
        curve = random_step_curve(rng)
        env = iron(curve, float(rng.uniform(0.0, 0.3)), WELFARE, grid_size=500)
        q = np.linspace(0.0, env.top, 2001)
        assert np.all(np.diff(env.value_array(q), 2) <= 1e-9)
