import itertools

import dimod
import numpy as np
import pytest

from rko_route.models.errors import DomainError, QuboSizeError
from rko_route.models.instance import Node
from rko_route.models.qubo_dtos import QuboProblem
from rko_route.models.tour import CostMode, Tour
from rko_route.utils.exact import solve_exact
from rko_route.utils.qubo import (
    brute_force, build_qubo, decode_qubo_solution, default_penalty, encode_tour_assignment, ising_energy,
    load_qubo, qubit_count_estimate, qubo_energy, repair_tour, save_qubo, solve_sa, to_ising, to_qubo,
    variable_count
)
from rko_route.utils.rko import tour_cost
from tests.conftest import tiny_instance


def cyclic_tour(nodes, instance):
    total, feasible = tour_cost(nodes, instance, CostMode.cyclic)
    return Tour(tuple(nodes), total, feasible, CostMode.cyclic)


def test_qubit_estimate():
    assert qubit_count_estimate(50, 3, 10, 3) == 450_000
    assert qubit_count_estimate(1, 1, 1, 1) == 2
    with pytest.raises(DomainError):
        qubit_count_estimate(0, 1, 1, 1)


def test_variable_count():
    assert variable_count(2, (1, 1, 1, 1)) == 4
    assert variable_count(3, (2, 1, 1, 1)) == 18


def test_two_seam_toy_size():
    problem = build_qubo(tiny_instance(2, seed=0, dim_sizes=(1, 1, 1, 1)))
    assert problem.n_vars == 4
    assert problem.penalty == default_penalty(problem.instance)


def test_refuses_oversized_builds():
    instance = tiny_instance(4, seed=0, dim_sizes=(2, 2, 1, 1))
    with pytest.raises(QuboSizeError) as error:
        build_qubo(instance, max_vars=10)
    assert error.value.n_vars == 64
    assert error.value.estimate == qubit_count_estimate(4, 2, 1, 1)


def test_energy_of_encoded_tours_equals_cyclic_cost(three_seams):
    problem = build_qubo(three_seams)
    for order in itertools.permutations([1, 2, 3]):
        tour = cyclic_tour([Node(s) for s in order], three_seams)
        x = encode_tour_assignment(tour, problem)
        assert qubo_energy(x, problem) == pytest.approx(tour.total_cost, abs=1e-9)


def test_energy_matches_cost_with_features():
    instance = tiny_instance(3, seed=4, dim_sizes=(2, 1, 1, 1))
    problem = build_qubo(instance)
    rng = np.random.default_rng(0)
    for _ in range(50):
        order = rng.permutation(3) + 1
        nodes = [Node(int(s), int(rng.integers(2))) for s in order]
        x = encode_tour_assignment(cyclic_tour(nodes, instance), problem)
        assert qubo_energy(x, problem) == pytest.approx(tour_cost(nodes, instance, CostMode.cyclic)[0], abs=1e-9)


def test_violations_cost_more_than_any_tour(three_seams):
    problem = build_qubo(three_seams)
    assert qubo_energy(np.zeros(problem.n_vars), problem) == pytest.approx(2 * 3 * problem.penalty)


def test_energy_length_mismatch(three_seams):
    with pytest.raises(DomainError):
        qubo_energy(np.zeros(3), build_qubo(three_seams))


@pytest.mark.parametrize("make", [
    lambda: None,
    lambda: tiny_instance(3, seed=1, dim_sizes=(2, 1, 1, 1)),
    lambda: tiny_instance(2, seed=2, dim_sizes=(2, 2, 1, 1)),
    lambda: tiny_instance(3, seed=3, dim_sizes=(2, 1, 1, 1)),
])
def test_brute_force_matches_exact_optimum(make, three_seams):
    instance = make() or three_seams
    problem = build_qubo(instance)
    assert problem.n_vars <= 20
    solution = brute_force(problem)
    decoded = decode_qubo_solution(solution.assignment, problem)
    assert decoded.is_valid, decoded.error_text
    assert decoded.tour.feasible
    optimum = solve_exact(instance, CostMode.cyclic).total_cost
    assert decoded.tour.total_cost == pytest.approx(optimum, abs=1e-9)
    assert solution.energy == pytest.approx(optimum, abs=1e-9)


def test_ising_round_trip_preserves_energy(three_seams):
    problem = build_qubo(three_seams)
    ising = to_ising(problem)
    back = to_qubo(ising)
    rng = np.random.default_rng(1)
    for _ in range(200):
        x = rng.integers(0, 2, problem.n_vars)
        energy = qubo_energy(x, problem)
        assert ising_energy(2 * x - 1, ising) + ising.offset == pytest.approx(energy)
        assert qubo_energy(x, back) == pytest.approx(energy)


def test_ising_matches_every_assignment_of_a_random_model():
    rng = np.random.default_rng(7)
    problem = QuboProblem.empty(6, offset=float(rng.normal()))
    linear = rng.normal(size=6)
    quadratic = {(i, j): float(rng.normal()) for i, j in itertools.combinations(range(6), 2)}
    for i, weight in enumerate(linear):
        problem.add(i, i, float(weight))
    for (i, j), weight in quadratic.items():
        problem.add(i, j, weight)

    ising = to_ising(problem)
    assert problem.bqm.vartype is dimod.BINARY
    assert ising.bqm.vartype is dimod.SPIN
    for bits in itertools.product([0, 1], repeat=6):
        x = np.array(bits)
        expected = problem.offset + float(linear @ x) + sum(w * x[i] * x[j] for (i, j), w in quadratic.items())
        assert qubo_energy(x, problem) == pytest.approx(expected, abs=1e-9)
        assert ising_energy(2 * x - 1, ising) + ising.offset == pytest.approx(expected, abs=1e-9)


def test_simulated_annealing_finds_ground_state(three_seams):
    problem = build_qubo(three_seams)
    solution = solve_sa(problem, sweeps=2000, seed=0)
    decoded = decode_qubo_solution(solution.assignment, problem)
    assert decoded.is_valid
    assert decoded.tour.total_cost == pytest.approx(19.0)
    assert solution.energy == pytest.approx(qubo_energy(solution.assignment, problem))


@pytest.mark.parametrize("make", [
    lambda: None,
    lambda: tiny_instance(3, seed=1, dim_sizes=(2, 1, 1, 1)),
])
def test_simulated_annealing_ground_state_rate(make, three_seams):
    problem = build_qubo(make() or three_seams)
    ground = brute_force(problem).energy
    hits = sum(solve_sa(problem, sweeps=2000, seed=seed).energy <= ground + 1e-9 for seed in range(10))
    assert hits >= 9


def test_simulated_annealing_zero_sweeps_keeps_initial(three_seams):
    problem = build_qubo(three_seams)
    initial = np.ones(problem.n_vars)
    solution = solve_sa(problem, sweeps=0, initial=initial)
    np.testing.assert_array_equal(solution.assignment, initial)


def test_decode_reports_violations(three_seams):
    problem = build_qubo(three_seams)
    report = decode_qubo_solution(np.zeros(problem.n_vars), problem)
    assert not report.is_valid
    assert report.empty_steps == [0, 1, 2]
    assert report.unvisited_seams == [0, 1, 2]
    assert "no node" in report.error_text

    crowded = np.zeros(problem.n_vars)
    crowded[[problem.variable(Node(1), 0), problem.variable(Node(1), 1), problem.variable(Node(2), 1)]] = 1
    report = decode_qubo_solution(crowded, problem)
    assert report.crowded_steps == [1]
    assert report.repeated_seams == [0]
    assert report.empty_steps == [2]


def test_repair_gives_a_complete_tour(three_seams):
    problem = build_qubo(three_seams)
    x = np.zeros(problem.n_vars)
    x[problem.variable(Node(3), 1)] = 1
    tour = repair_tour(x, problem)
    assert [n.seam for n in tour.nodes] == [3, 1, 2]


def test_brute_force_limits():
    assert brute_force(QuboProblem.empty(0, offset=2.5)).energy == 2.5
    with pytest.raises(QuboSizeError):
        brute_force(QuboProblem.empty(25))


def test_file_round_trip(tmp_path, three_seams):
    problem = build_qubo(three_seams)
    path = tmp_path / "qubo.txt"
    save_qubo(problem, path)
    assert path.read_text().splitlines()[0] == "9"
    loaded = load_qubo(path, three_seams)
    assert loaded.terms() == problem.terms()
    assert loaded.offset == problem.offset
    assert loaded.penalty == problem.penalty
    solution = brute_force(loaded)
    assert decode_qubo_solution(solution.assignment, loaded).tour.total_cost == pytest.approx(19.0)


def test_load_rejects_mismatched_instance(tmp_path, three_seams, tiny):
    path = tmp_path / "qubo.txt"
    save_qubo(build_qubo(three_seams), path)
    with pytest.raises(DomainError):
        load_qubo(path, tiny)
