import logging
import time
from concurrent.futures import ProcessPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np

from rko_route.models.instance import Instance, Node
from rko_route.models.params import GreedyParams
from rko_route.models.solver_dtos import GreedyResult
from rko_route.models.tour import Chromosome, CostMode, Tour
from rko_route.utils.rko import encode_tour, tour_cost


def shot_rng(seed: int, shot: int) -> np.random.Generator:
    """Per-shot stream keyed by (seed, shot), independent of execution order."""
    return np.random.default_rng([seed, shot])


def greedy_tour(instance: Instance, rng: np.random.Generator, node_space: Optional[Sequence[Node]] = None) -> Tour:
    """
    Nearest-feasible-neighbour tour from a uniformly random first node.
    Candidates are scanned by (cost, node), so ties go to the
    lexicographically smaller node. When no feasible edge reaches an
    unvisited seam, the smallest node of the lowest unvisited seam is taken
    at padding cost.
    """
    if node_space is None:
        node_space = instance.node_space()
    current = node_space[int(rng.integers(len(node_space)))]
    nodes = [current]
    visited = {current.seam}
    while len(nodes) < instance.n_seams:
        following = None
        for _, node in instance.successors(current):
            if node.seam != 0 and node.seam not in visited:
                following = node
                break
        if following is None:
            seam = min(s for s in range(1, instance.n_seams + 1) if s not in visited)
            following = Node(seam)
        nodes.append(following)
        visited.add(following.seam)
        current = following

    total, feasible = tour_cost(nodes, instance, CostMode.home_anchored)
    return Tour(nodes=tuple(nodes), total_cost=total, feasible=feasible)


def _run_shots(instance: Instance, seed: int, shots: range, started_at: float) -> List[Tuple[Tour, float]]:
    """Tours for ``shots`` with each one's finish time in seconds after ``started_at`` (a time.time() stamp)."""
    node_space = instance.node_space()
    finished = []
    for shot in shots:
        tour = greedy_tour(instance, shot_rng(seed, shot), node_space)
        finished.append((tour, time.time() - started_at))
    return finished


def incumbent_trace(events: Sequence[Tuple[float, float]]) -> List[Tuple[float, float]]:
    """(elapsed, cost) events in any order -> strictly improving (elapsed, best cost) points in time order."""
    trace: List[Tuple[float, float]] = []
    best_cost = np.inf
    for elapsed, cost in sorted(events):
        if cost < best_cost:
            best_cost = cost
            trace.append((elapsed, cost))
    return trace


def multi_shot_greedy(instance: Instance, params: GreedyParams, workers: int = 1) -> GreedyResult:
    # wall clock so shot times from worker processes share one origin
    started_at = time.time()
    if workers <= 1:
        finished = _run_shots(instance, params.seed, range(params.shots), started_at)
    else:
        bounds = np.linspace(0, params.shots, workers + 1).astype(int)
        chunks = [range(lo, hi) for lo, hi in zip(bounds, bounds[1:]) if hi > lo]
        finished = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for chunk in pool.map(_run_shots, [instance] * len(chunks), [params.seed] * len(chunks), chunks,
                                  [started_at] * len(chunks)):
                finished.extend(chunk)

    tours = [tour for tour, _ in finished]
    trace = incumbent_trace([(elapsed, tour.total_cost) for tour, elapsed in finished])
    costs = np.array([t.total_cost for t in tours])
    best = tours[int(np.argmin(costs))]
    result = GreedyResult(best=best, costs=costs, tours=tours, trace=trace)
    summary = result.summary()
    logging.info(f"Greedy: best {summary['best']:.4f}, median {summary['median']:.4f} over {summary['shots']} shots")
    return result


def greedy_warm_pool(result: GreedyResult, instance: Instance, size: int, seed: int = 0) -> List[Chromosome]:
    """Encode the cheapest distinct greedy tours; cycles through them with fresh noise to fill ``size``."""
    distinct = {}
    for tour in sorted(result.tours, key=lambda t: t.total_cost):
        distinct.setdefault(tour.nodes, tour)
    ranked = list(distinct.values())
    return [encode_tour(ranked[i % len(ranked)], instance, seed=seed + i) for i in range(size)]
