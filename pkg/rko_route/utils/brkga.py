import logging
import time
from typing import Dict, Optional, Sequence

import numpy as np

from rko_route.models.errors import DomainError
from rko_route.models.instance import Instance
from rko_route.models.params import BrkgaParams
from rko_route.models.solver_dtos import BrkgaResult, GenerationStat, Population
from rko_route.models.tour import Chromosome, CostMode
from rko_route.utils.rko import Evaluator, random_keys

# improvements smaller than this do not reset the patience counter
IMPROVEMENT_TOL = 1e-9


def make_streams(seed: int) -> Dict[str, np.random.Generator]:
    """Independent RNG streams per purpose, so results do not depend on evaluation order."""
    names = ("init", "mutants", "selection", "crossover", "restart")
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {name: np.random.default_rng(child) for name, child in zip(names, children)}


def _sorted(records, generation: int) -> Population:
    return Population(sorted(records, key=lambda r: r.cost), generation)


def init_population(
    params: BrkgaParams,
    warm_pool: Optional[Sequence[Chromosome]],
    evaluator: Evaluator,
    rng: np.random.Generator
) -> Population:
    warm_pool = list(warm_pool or [])
    if len(warm_pool) > params.population_size:
        raise DomainError(f"warm pool ({len(warm_pool)}) larger than population ({params.population_size})")
    length = evaluator.length
    for chromosome in warm_pool:
        if len(chromosome) != length:
            raise DomainError(f"warm chromosome has {len(chromosome)} keys, expected {length}")

    n_random = params.population_size - len(warm_pool)
    rows = [c.keys for c in warm_pool]
    if n_random:
        rows.append(random_keys(rng, (n_random, length)))
    keys = np.vstack(rows) if rows else np.empty((0, length))
    return _sorted(evaluator.evaluate_many(keys), 0)


def crossover(
    parents: np.ndarray,
    num_elite_parents: int,
    elite_inherit_prob: float,
    rng: np.random.Generator
) -> np.ndarray:
    """
    Parameterized uniform crossover. Rows [0, num_elite_parents) of
    ``parents`` are elite. Per key, the elite group is picked with
    probability ``elite_inherit_prob``, then a uniform member of the picked
    group supplies the key. With two parents this is the classic biased
    coin between the elite and the non-elite parent.
    """
    parents = np.atleast_2d(parents)
    n_parents, length = parents.shape
    if not 1 <= num_elite_parents < n_parents:
        raise DomainError(f"need 1 <= num_elite_parents < {n_parents}, got {num_elite_parents}")

    from_elite = rng.random(length) < elite_inherit_prob
    elite_pick = rng.integers(0, num_elite_parents, size=length)
    other_pick = rng.integers(num_elite_parents, n_parents, size=length)
    source = np.where(from_elite, elite_pick, other_pick)
    return parents[source, np.arange(length)]


def evolve_generation(
    population: Population,
    params: BrkgaParams,
    evaluator: Evaluator,
    streams: Dict[str, np.random.Generator]
) -> Population:
    p = params.population_size
    n_elite, n_mutants, n_offspring = params.n_elite, params.n_mutants, params.n_offspring
    elites = population.members[:n_elite]
    length = evaluator.length

    mutants = random_keys(streams["mutants"], (n_mutants, length))
    keys = population.keys
    selection = streams["selection"]
    elite_rows = selection.integers(0, n_elite, size=(n_offspring, params.num_elite_parents))
    other_rows = selection.integers(n_elite, p, size=(n_offspring, params.total_parents - params.num_elite_parents))
    offspring = np.empty((n_offspring, length))
    for k in range(n_offspring):
        parents = keys[np.concatenate([elite_rows[k], other_rows[k]])]
        offspring[k] = crossover(parents, params.num_elite_parents, params.elite_inherit_prob, streams["crossover"])

    fresh = evaluator.evaluate_many(np.vstack([mutants, offspring])) if n_mutants + n_offspring else []
    return _sorted(list(elites) + fresh, population.generation + 1)


def run(
    instance: Instance,
    params: BrkgaParams,
    warm_pool: Optional[Sequence[Chromosome]] = None,
    workers: int = 1,
    cost_mode: CostMode = CostMode.home_anchored
) -> BrkgaResult:
    start = time.perf_counter()
    streams = make_streams(params.seed)

    with Evaluator(instance, cost_mode, workers) as evaluator:
        population = init_population(params, warm_pool, evaluator, streams["init"])
        best = population.best
        result = BrkgaResult(best=best, initial_cost=best.cost)
        result.trace.append((time.perf_counter() - start, best.cost))
        logging.info(f"BRKGA start: p={params.population_size}, elite={params.n_elite}, "
                     f"mutants={params.n_mutants}, initial best {best.cost:.4f}")

        stall = 0
        for generation in range(1, params.max_generations + 1):
            population = evolve_generation(population, params, evaluator, streams)
            leader = population.best
            if leader.cost < best.cost - IMPROVEMENT_TOL:
                stall = 0
            else:
                stall += 1
            if leader.cost < best.cost:
                best = leader
                result.trace.append((time.perf_counter() - start, best.cost))
                logging.debug(f"generation {generation}: new best {best.cost:.4f}")
            result.history.append(GenerationStat(generation, best.cost, time.perf_counter() - start))

            if params.patience and stall >= params.patience:
                if result.restarts >= params.max_restarts:
                    result.stop_reason = "patience"
                    break
                result.restarts += 1
                stall = 0
                keys = random_keys(streams["restart"], (params.population_size, evaluator.length))
                population = _sorted(evaluator.evaluate_many(keys), population.generation)
                logging.info(f"BRKGA restart {result.restarts} at generation {generation}, incumbent {best.cost:.4f}")
                if population.best.cost < best.cost:
                    best = population.best
                    result.trace.append((time.perf_counter() - start, best.cost))

        result.best = best
        result.evaluations = evaluator.evaluations

    logging.info(f"BRKGA done after {len(result.history)} generations ({result.stop_reason}): "
                 f"best {best.cost:.4f}, restarts {result.restarts}")
    return result
