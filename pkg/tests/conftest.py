import itertools

import pytest

from rko_route.models.params import GeneratorParams
from rko_route.utils.instances import build_instance, generate_synthetic
from rko_route.utils.rko import tour_cost

# (from label, to label, cost); seam labels 10/20/30 are renumbered 1/2/3
THREE_SEAM_COSTS = [
    (0, 10, 1.0), (0, 20, 2.0), (0, 30, 3.0),
    (10, 20, 4.0), (10, 30, 5.0),
    (20, 10, 6.0), (20, 30, 7.0),
    (30, 10, 8.0), (30, 20, 9.0),
    (10, 0, 10.0), (20, 0, 11.0), (30, 0, 12.0),
]


def make_rows(table):
    return [((a, 0, 0, 0, 0), (b, 0, 0, 0, 0), value) for a, b, value in table]


@pytest.fixture
def three_seams():
    """Every pair present, one node per seam. Home-anchored optimum 1-2-3 costs 24, cyclic optimum 19."""
    return build_instance(make_rows(THREE_SEAM_COSTS), label="three")


# 1->3 is the cheapest first step but 3 only leaves at cost 10; 2->1 is missing
GREEDY_TRAP_COSTS = [
    (0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0), (1, 0, 1.0), (2, 0, 1.0), (3, 0, 1.0),
    (1, 2, 2.0), (1, 3, 1.0), (2, 3, 2.0), (3, 1, 10.0), (3, 2, 10.0),
]


@pytest.fixture
def greedy_trap():
    """Home-anchored optimum 1-2-3 costs 6; greedy only ever builds 1-3-2 (13), 2-3-1 or 3-1-2 (14)."""
    return build_instance(make_rows(GREEDY_TRAP_COSTS), label="trap")


def tiny_instance(n_seams: int, seed: int, dim_sizes=(2, 1, 1, 1), feasibility_rate: float = 1.0):
    return generate_synthetic(GeneratorParams(
        n_seams=n_seams, dim_sizes=dim_sizes, feasibility_rate=feasibility_rate, seed=seed
    ))


@pytest.fixture
def tiny():
    return tiny_instance(4, seed=3, dim_sizes=(2, 2, 1, 1))


@pytest.fixture
def synthetic():
    return generate_synthetic(GeneratorParams(n_seams=8, dim_sizes=(2, 2, 2, 1), feasibility_rate=0.8, seed=11))


def brute_optimum(instance, cost_mode):
    """Cheapest tour by plain enumeration of seam orders and node choices."""
    best = float("inf")
    choices = [list(instance.nodes_of_seam(seam)) for seam in range(1, instance.n_seams + 1)]
    for order in itertools.permutations(range(instance.n_seams)):
        for nodes in itertools.product(*(choices[s] for s in order)):
            best = min(best, tour_cost(nodes, instance, cost_mode)[0])
    return best
