import math

import numpy as np
import pytest
from pydantic import ValidationError

from rko_route.models.errors import DomainError
from rko_route.models.params import DaParams
from rko_route.utils import danneal
from rko_route.utils.exact import solve_exact
from rko_route.utils.rko import Evaluator, chromosome_length, random_chromosome
from tests.conftest import tiny_instance


def closed_form(t, initial_temp, q_v):
    return initial_temp * (2.0 ** (q_v - 1.0) - 1.0) / ((1.0 + t) ** (q_v - 1.0) - 1.0)


def test_temperature_matches_closed_form():
    for t in range(1, 10_001):
        assert danneal.temperature(t, 5230.0, 2.62) == pytest.approx(closed_form(t, 5230.0, 2.62), rel=1e-12)


def test_temperature_starts_at_initial_and_decreases():
    temps = [danneal.temperature(t, 100.0, 1.1321) for t in range(1, 200)]
    assert temps[0] == pytest.approx(100.0, rel=1e-12)
    assert all(b < a for a, b in zip(temps, temps[1:]))


def test_temperature_rejects_iteration_zero():
    with pytest.raises(DomainError):
        danneal.temperature(0, 100.0, 2.0)


def test_improvements_always_accepted():
    assert danneal.acceptance_probability(0.0, 10.0, -5.0) == 1.0
    assert danneal.acceptance_probability(-3.0, 0.01, -5.0) == 1.0


def test_acceptance_formula_and_cutoff():
    assert danneal.acceptance_probability(0.1, 1.0, -5.0) == pytest.approx(0.4 ** (1.0 / 6.0))
    # 1 - (1 - q_a) * beta * dE <= 0 rejects outright
    assert danneal.acceptance_probability(1.0, 1.0, -5.0) == 0.0


def test_acceptance_frequency_within_three_sigma():
    p = danneal.acceptance_probability(0.05, 1.0, -2.3875)
    rng = np.random.default_rng(0)
    trials = 10_000
    accepted = np.sum(rng.random(trials) < p)
    assert abs(accepted / trials - p) <= 3 * math.sqrt(p * (1 - p) / trials)


def test_visiting_tail_grows_with_q_v():
    rng = np.random.default_rng(1)
    heavy = np.abs(danneal.visiting_displacement(1.0, 2.9, rng, 20_000))
    light = np.abs(danneal.visiting_displacement(1.0, 1.5, rng, 20_000))
    assert np.mean(heavy > 0.5) > np.mean(light > 0.5)


def test_visiting_spread_grows_with_temperature():
    rng = np.random.default_rng(2)
    hot = np.median(np.abs(danneal.visiting_displacement(10.0, 2.62, rng, 20_000)))
    cold = np.median(np.abs(danneal.visiting_displacement(0.1, 2.62, rng, 20_000)))
    assert hot > cold


def test_visiting_is_finite_for_q_v_near_one():
    rng = np.random.default_rng(3)
    step = danneal.visiting_displacement(20314.2789, 1.1321, rng, 1000)
    assert np.all(np.isfinite(step))


def test_wrap_keys_stays_in_unit_interval():
    rng = np.random.default_rng(4)
    for _ in range(1000):
        x = rng.normal(0.0, 10.0 ** rng.integers(0, 7), size=30)
        wrapped = danneal.wrap_keys(x)
        assert np.all(wrapped > 0.0) and np.all(wrapped <= 1.0)


def test_wrap_keys_fixed_points_and_integers():
    x = np.array([0.25, 1.0, 2.0, -1.0, 0.0, 1.75, -0.25])
    np.testing.assert_allclose(danneal.wrap_keys(x), [0.25, 1.0, 1.0, 1.0, 1.0, 0.75, 0.75])


def test_local_search_never_worsens_and_respects_budget(synthetic):
    rng = np.random.default_rng(5)
    with Evaluator(synthetic) as evaluator:
        start = evaluator.evaluate(random_chromosome(rng, chromosome_length(synthetic)))
        before = evaluator.evaluations
        best, used = danneal.local_search(start, evaluator, 25, rng)
        assert evaluator.evaluations - before == used <= 25
    assert best.cost <= start.cost


def test_params_aliases_and_bounds():
    params = DaParams.model_validate({"maxiter": 5547, "seed": 151, "visit": 1.1321, "accept": -2.3875,
                                      "initial_temp": 20314.2789, "restart_temp_ratio": 6.3192e-5})
    assert params.q_v == 1.1321
    with pytest.raises(ValidationError):
        DaParams(q_v=3.0)
    with pytest.raises(ValidationError):
        DaParams(restart_temp_ratio=1.0)


def test_run_records_every_iteration(synthetic):
    params = DaParams(maxiter=60, local_search_budget=5, seed=7)
    result = danneal.run(synthetic, params)
    assert len(result.rows) == 60
    assert [row.iteration for row in result.rows] == list(range(1, 61))
    incumbents = [row.incumbent_cost for row in result.rows]
    assert all(b <= a for a, b in zip(incumbents, incumbents[1:]))
    assert result.best.cost == incumbents[-1]
    trace = [cost for _, cost in result.trace]
    assert all(b < a for a, b in zip(trace, trace[1:]))
    assert result.tour.total_cost == result.best.cost


def test_run_is_deterministic(tiny):
    params = DaParams(maxiter=40, local_search_budget=3, seed=9)
    first, second = danneal.run(tiny, params), danneal.run(tiny, params)
    assert [r.current_cost for r in first.rows] == [r.current_cost for r in second.rows]
    assert first.best.chromosome == second.best.chromosome


def test_restart_resets_temperature(tiny):
    params = DaParams(maxiter=100, local_search_budget=0, restart_temp_ratio=0.2, seed=1)
    result = danneal.run(tiny, params)
    assert result.restarts > 0
    temps = [row.temperature for row in result.rows]
    at_initial = sum(abs(temp - params.initial_temp) <= 1e-9 * params.initial_temp for temp in temps)
    assert at_initial == result.restarts + 1
    assert min(temps) >= params.restart_temp_ratio * params.initial_temp


def test_warm_start_bounds_the_result(synthetic):
    warm = random_chromosome(np.random.default_rng(6), chromosome_length(synthetic))
    with Evaluator(synthetic) as evaluator:
        warm_cost = evaluator.evaluate(warm).cost
    result = danneal.run(synthetic, DaParams(maxiter=20, local_search_budget=2), warm_start=warm)
    assert result.trace[0][1] == warm_cost
    assert result.best.cost <= warm_cost


@pytest.mark.slow
def test_reaches_exact_optimum_on_tiny_instances():
    dims = [(2, 1, 1, 1), (2, 2, 1, 1), (2, 2, 2, 1), (2, 2, 2, 2)]
    hits = 0
    for seed in range(20):
        instance = tiny_instance(3 + seed % 3, seed=200 + seed, dim_sizes=dims[seed % 4])
        optimum = solve_exact(instance).total_cost
        result = danneal.run(instance, DaParams(maxiter=2000, local_search_budget=50, seed=seed))
        hits += result.best.cost <= optimum + 1e-9
    assert hits >= 18
