"""Dual annealing over the random-key hypercube.

Each iteration makes one generalized-simulated-annealing jump from the
current chromosome, accepts or rejects it, then refines the current point
with a budgeted coordinate pattern search. The decoded cost is piecewise
constant in the keys, so the refinement is derivative-free.
"""
import logging
import math
import time
from typing import Optional, Tuple

import numpy as np
from scipy.special import gammaln

from rko_route.models.errors import DomainError
from rko_route.models.instance import Instance
from rko_route.models.params import DaParams
from rko_route.models.solver_dtos import AnnealState, DaResult, DaTraceRow
from rko_route.models.tour import Chromosome, CostMode, FitnessRecord
from rko_route.utils.rko import Evaluator, random_keys

# displacements are clipped here before wrapping, as the tails are unbounded
TAIL_LIMIT = 1e8
MIN_STEP = 1e-4
BOLTZMANN = 1.0


def temperature(t: int, initial_temp: float, q_v: float) -> float:
    """T(t) = T(1) * (2^(q_v-1) - 1) / ((1+t)^(q_v-1) - 1)."""
    if t < 1:
        raise DomainError(f"iteration must be >= 1, got {t}")
    exponent = q_v - 1.0
    return initial_temp * math.expm1(exponent * math.log(2.0)) / math.expm1(exponent * math.log1p(t))


def acceptance_probability(delta_e: float, temp: float, q_a: float) -> float:
    """Generalized Metropolis rule; improving moves are always accepted."""
    if delta_e <= 0.0:
        return 1.0
    beta = 1.0 / (BOLTZMANN * temp)
    base = 1.0 - (1.0 - q_a) * beta * delta_e
    if base <= 0.0:
        return 0.0
    return min(1.0, max(0.0, base ** (1.0 / (1.0 - q_a))))


def visiting_displacement(temp: float, q_v: float, rng: np.random.Generator, size: int) -> np.ndarray:
    """Heavy-tailed per-coordinate step from the generalized visiting distribution."""
    exponent = q_v - 1.0
    # logs of the normalization factors; the raw factors overflow for q_v near 1
    log_factor1 = math.log(temp) / exponent
    log_factor2 = (4.0 - q_v) * math.log(exponent)
    log_factor3 = (2.0 - q_v) * math.log(2.0) / exponent
    log_factor4 = 0.5 * math.log(math.pi) + log_factor1 + log_factor2 - log_factor3 - math.log(3.0 - q_v)
    # pi(1-a)/sin(pi(1-a))/Gamma(2-a) == Gamma(a), positive for every q_v in (1, 3)
    log_factor6 = float(gammaln(1.0 / exponent - 0.5))
    sigma = math.exp(-exponent * (log_factor6 - log_factor4) / (3.0 - q_v))
    x = sigma * rng.standard_normal(size)
    y = rng.standard_normal(size)
    with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
        step = x / np.exp(exponent * np.log(np.abs(y)) / (3.0 - q_v))
    return np.clip(np.nan_to_num(step, nan=0.0, posinf=TAIL_LIMIT, neginf=-TAIL_LIMIT), -TAIL_LIMIT, TAIL_LIMIT)


def wrap_keys(x: np.ndarray) -> np.ndarray:
    """Periodic wrap of any real vector into (0, 1]."""
    wrapped = np.mod(x, 1.0)
    return np.where(wrapped <= 0.0, 1.0, wrapped)


def propose_jump(keys: np.ndarray, temp: float, q_v: float, rng: np.random.Generator) -> np.ndarray:
    return wrap_keys(keys + visiting_displacement(temp, q_v, rng, keys.size))


def local_search(
    record: FitnessRecord,
    evaluator: Evaluator,
    budget: int,
    rng: np.random.Generator,
    step: float = 0.25
) -> Tuple[FitnessRecord, int]:
    """
    Coordinate pattern search: try +/- step on each coordinate (random
    order), keep strict improvements, halve the step after a pass without
    one. Uses at most ``budget`` evaluations; never returns a worse point.
    """
    best = record
    used = 0
    size = best.chromosome.keys.size
    while used < budget and step >= MIN_STEP:
        improved = False
        for i in rng.permutation(size):
            for sign in (1.0, -1.0):
                if used >= budget:
                    return best, used
                keys = best.chromosome.keys.copy()
                keys[i] = wrap_keys(np.array([keys[i] + sign * step]))[0]
                candidate = evaluator.evaluate(keys)
                used += 1
                if candidate.cost < best.cost:
                    best = candidate
                    improved = True
                    break
        if not improved:
            step *= 0.5
    return best, used


def run(
    instance: Instance,
    params: DaParams,
    warm_start: Optional[Chromosome] = None,
    cost_mode: CostMode = CostMode.home_anchored
) -> DaResult:
    start = time.perf_counter()
    visit_seq, accept_seq, restart_seq, local_seq = np.random.SeedSequence(params.seed).spawn(4)
    visit_rng = np.random.default_rng(visit_seq)
    accept_rng = np.random.default_rng(accept_seq)
    restart_rng = np.random.default_rng(restart_seq)
    local_rng = np.random.default_rng(local_seq)
    restart_below = params.restart_temp_ratio * params.initial_temp

    with Evaluator(instance, cost_mode) as evaluator:
        first = warm_start.keys if warm_start is not None else random_keys(restart_rng, evaluator.length)
        current = evaluator.evaluate(first)
        state = AnnealState(current=current, incumbent=current)
        result = DaResult(best=current)
        result.trace.append((time.perf_counter() - start, current.cost))

        def keep_best(record: FitnessRecord) -> None:
            if record.cost < state.incumbent.cost:
                state.incumbent = record
                result.trace.append((time.perf_counter() - start, record.cost))

        # the schedule index restarts with the temperature; the iteration count does not
        schedule_index = 1
        for t in range(1, params.maxiter + 1):
            state.iteration = t
            state.temperature = temperature(schedule_index, params.initial_temp, params.q_v)
            if state.temperature < restart_below:
                result.restarts += 1
                schedule_index = 1
                state.temperature = params.initial_temp
                state.current = evaluator.evaluate(random_keys(restart_rng, evaluator.length))
                keep_best(state.current)
                logging.debug(f"dual annealing restart {result.restarts} at iteration {t}")

            candidate = evaluator.evaluate(propose_jump(state.current.chromosome.keys, state.temperature,
                                                        params.q_v, visit_rng))
            p_accept = acceptance_probability(candidate.cost - state.current.cost, state.temperature, params.q_a)
            if accept_rng.random() < p_accept:
                state.current = candidate
            keep_best(state.current)

            if params.local_search_budget:
                state.current, _ = local_search(state.current, evaluator, params.local_search_budget,
                                                local_rng, params.local_search_step)
                keep_best(state.current)

            result.rows.append(DaTraceRow(t, state.temperature, state.current.cost, state.incumbent.cost))
            schedule_index += 1

        result.best = state.incumbent
        result.evaluations = evaluator.evaluations

    logging.info(f"Dual annealing done after {params.maxiter} iterations: best {result.best.cost:.4f}, "
                 f"restarts {result.restarts}, evaluations {result.evaluations}")
    return result
