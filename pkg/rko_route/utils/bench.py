"""Benchmark harness: solver dispatch, time-to-target runs, scaling sweeps and comparison tables."""
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from rko_route.models.bench_dtos import SolverRun, SweepResult, TableRow, TttCdfPoint, TttRecord, TttReport
from rko_route.models.errors import CapabilityError, DomainError
from rko_route.models.instance import Instance, Node
from rko_route.models.params import GreedyParams, SolverName, SolverSpec, WarmstartSpec
from rko_route.models.solver_dtos import GreedyResult
from rko_route.models.tour import Chromosome, CostMode, Tour
from rko_route.utils import brkga, danneal
from rko_route.utils.config import build_params
from rko_route.utils.greedy import greedy_warm_pool, multi_shot_greedy
from rko_route.utils.qubo import build_qubo, decode_qubo_solution, repair_tour, solve_sa
from rko_route.utils.rko import decode, tour_cost

HIT_TOL = 1e-9
BASELINE = "greedy"
TRACELESS_SOLVERS = {"qubo-sa"}

SWEEP_COLUMNS = ["instance", "n_seams", "solver", "seed", "best_cost", "wall_seconds",
                 "is_valid", "error_text", "cost_mode", "feasible", "tour"]
TTT_COLUMNS = ["solver", "target", "prob", "time_seconds"]


def _greedy_stage(
    warmstart: WarmstartSpec, instance: Instance, size: int, workers: int
) -> Tuple[List[Chromosome], GreedyResult]:
    result = multi_shot_greedy(instance, GreedyParams(shots=warmstart.shots, seed=warmstart.seed), workers=workers)
    return greedy_warm_pool(result, instance, size, seed=warmstart.seed), result


def run_solver(
    spec: SolverSpec,
    instance: Instance,
    seed: Optional[int] = None,
    workers: int = 1,
    warm_pool: Optional[Sequence[Chromosome]] = None
) -> SolverRun:
    """Run one solver on a loaded instance. Wall time excludes instance loading.

    A spec with a ``warmstart`` stage and no explicit ``warm_pool`` first runs
    the greedy baseline and seeds the solver from its best tours; the stage's
    time and improvement trace count towards the run.
    """
    params = build_params(spec.solver, spec.params, seed)
    start = time.perf_counter()
    stage: Optional[GreedyResult] = None
    if spec.warmstart is not None and warm_pool is None:
        size = min(spec.warmstart.pool_size, params.population_size) if spec.solver == "brkga" else 1
        warm_pool, stage = _greedy_stage(spec.warmstart, instance, size, workers)
    stage_seconds = time.perf_counter() - start

    if spec.solver == "brkga":
        result = brkga.run(instance, params, warm_pool=warm_pool, workers=workers)
        run = SolverRun(spec.solver_id, result.tour, 0.0, result.trace, result=result, attributes={
            "generations": len(result.history),
            "initial_cost": result.initial_cost,
            "restarts": result.restarts,
            "stop_reason": result.stop_reason,
            "evaluations": result.evaluations,
        })
    elif spec.solver == "da":
        warm_start = min(warm_pool, key=lambda c: decode(c, instance).total_cost) if warm_pool else None
        result = danneal.run(instance, params, warm_start=warm_start)
        run = SolverRun(spec.solver_id, result.tour, 0.0, result.trace, result=result, attributes={
            "iterations": len(result.rows),
            "restarts": result.restarts,
            "evaluations": result.evaluations,
        })
    elif spec.solver == "greedy":
        result = multi_shot_greedy(instance, params, workers=workers)
        run = SolverRun(spec.solver_id, result.best, 0.0, result.trace, result=result,
                        attributes=result.summary())
    else:
        problem = build_qubo(instance, params.penalty, params.max_vars)
        solution = solve_sa(problem, params.sweeps, params.t_start, params.t_end, params.seed)
        report = decode_qubo_solution(solution.assignment, problem)
        if report.is_valid:
            tour = report.tour
        else:
            logging.warning(f"QUBO annealing ended infeasible ({report.error_text}); repairing the assignment")
            tour = repair_tour(solution.assignment, problem)
        run = SolverRun(spec.solver_id, tour, 0.0, supports_trace=False, result=report, attributes={
            "n_vars": problem.n_vars,
            "energy": solution.energy,
            "assignment_valid": report.is_valid,
            "error_text": report.error_text,
        })
    run.wall_seconds = time.perf_counter() - start
    if stage is not None:
        run.trace = stage.trace + [(t + stage_seconds, cost) for t, cost in run.trace]
        run.attributes.update(warmstart_cost=stage.best.total_cost, warmstart_shots=spec.warmstart.shots)
    return run


def first_hit(trace: Sequence[Tuple[float, float]], target: float) -> Optional[float]:
    for wall_seconds, cost in trace:
        if cost <= target + HIT_TOL:
            return wall_seconds
    return None


def empirical_cdf(records: Sequence[TttRecord], shots: int) -> List[TttCdfPoint]:
    """Sorted hit times with probability i/shots; a target never hit yields one zero-probability point."""
    points: List[TttCdfPoint] = []
    keys = sorted({(r.solver_id, r.target) for r in records})
    for solver_id, target in keys:
        times = sorted(r.time_to_hit for r in records
                       if r.solver_id == solver_id and r.target == target and r.hit)
        if not times:
            points.append(TttCdfPoint(solver_id, target, 0.0, 0.0))
            continue
        points.extend(TttCdfPoint(solver_id, target, (i + 1) / shots, t) for i, t in enumerate(times))
    return points


def run_ttt(
    spec: SolverSpec,
    instance: Instance,
    targets: Sequence[float],
    shots: int,
    seed: int = 0,
    workers: int = 1
) -> TttReport:
    """Independent runs with seeds seed, seed+1, ...; records when each run's incumbent first reaches each target."""
    if shots < 1:
        raise DomainError(f"shots must be >= 1, got {shots}")
    if spec.solver in TRACELESS_SOLVERS:
        raise CapabilityError(f"solver {spec.solver!r} does not record an improvement trace")

    report = TttReport()
    for shot in range(shots):
        run = run_solver(spec, instance, seed=seed + shot, workers=workers)
        if not run.supports_trace:
            raise CapabilityError(f"solver {spec.solver!r} does not record an improvement trace")
        for target in targets:
            hit_time = first_hit(run.trace, target)
            report.records.append(TttRecord(spec.solver_id, float(target), shot, hit_time is not None, hit_time))
        logging.debug(f"TTT shot {shot}: final cost {run.tour.total_cost:.4f}")
    report.cdf = empirical_cdf(report.records, shots)
    hits = sum(r.hit for r in report.records)
    logging.info(f"TTT {spec.solver_id}: {shots} shots x {len(targets)} targets, {hits} hits")
    return report


def _run_cell(label: str, instance: Instance, spec: SolverSpec, seed: int) -> SweepResult:
    try:
        run = run_solver(spec, instance, seed=seed)
        return SweepResult(label, instance.n_seams, spec.solver_id, seed, run.tour.total_cost,
                           run.wall_seconds, tour=run.tour)
    except Exception as e:
        logging.error(f"Sweep cell {label}/{spec.solver_id}/seed {seed} failed: {e}")
        return SweepResult(label, instance.n_seams, spec.solver_id, seed, math.nan, 0.0,
                           is_valid=False, error_text=str(e))


def run_sweep(
    instances: Sequence[Tuple[str, Instance]],
    specs: Sequence[SolverSpec],
    seeds: Sequence[int],
    workers: int = 1
) -> List[SweepResult]:
    """Every (instance, solver, seed) cell, in that order; a failed cell is recorded and the sweep continues."""
    cells = [(label, instance, spec, seed) for label, instance in instances for spec in specs for seed in seeds]
    if workers <= 1:
        results = [_run_cell(*cell) for cell in cells]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, *zip(*cells))) if cells else []
    failed = sum(not r.is_valid for r in results)
    logging.info(f"Sweep finished: {len(results)} cells, {failed} failed")
    return results


def compare_costs(greedy_best: float, other_best: float) -> Tuple[float, float]:
    delta = greedy_best - other_best
    return delta, delta / greedy_best * 100.0


def compare_table(results: Sequence[SweepResult], baseline: str = BASELINE) -> List[TableRow]:
    best: Dict[str, Dict[str, float]] = {}
    for r in results:
        if r.is_valid:
            per_solver = best.setdefault(r.instance, {})
            per_solver[r.solver] = min(per_solver.get(r.solver, math.inf), r.best_cost)

    if not best:
        raise DomainError("no valid sweep results to tabulate")
    rows = []
    for label, per_solver in best.items():
        if baseline not in per_solver:
            raise DomainError(f"instance {label!r} has no {baseline!r} baseline result")
        others = {k: v for k, v in per_solver.items() if k != baseline}
        if not others:
            raise DomainError(f"instance {label!r} has no solver to compare against {baseline!r}")
        best_solver = min(others, key=others.get)
        delta, delta_percent = compare_costs(per_solver[baseline], others[best_solver])
        rows.append(TableRow(label, per_solver[baseline], others, best_solver, others[best_solver],
                             delta, delta_percent))
    return rows


def render_table_markdown(rows: Sequence[TableRow], baseline: str = BASELINE) -> str:
    solvers = sorted({name for row in rows for name in row.solver_best})
    header = ["Instance", baseline, *solvers, "Δ", "Δ%"]
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for row in rows:
        cells = [row.instance, f"{row.greedy_best:.2f}"]
        for name in solvers:
            value = row.solver_best.get(name)
            cell = "-" if value is None else f"{value:.2f}"
            cells.append(f"**{cell}**" if name == row.best_solver else cell)
        cells += [f"{row.delta:.2f}", f"{row.delta_percent:.2f}%"]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def write_sweep_csv(results: Sequence[SweepResult], path: Union[str, Path]) -> pd.DataFrame:
    frame = pd.DataFrame([{
        "instance": r.instance,
        "n_seams": r.n_seams,
        "solver": r.solver,
        "seed": r.seed,
        "best_cost": r.best_cost,
        "wall_seconds": r.wall_seconds,
        "is_valid": r.is_valid,
        "error_text": r.error_text,
        "cost_mode": r.tour.cost_mode.value if r.tour else "",
        "feasible": r.tour.feasible if r.tour else "",
        "tour": json.dumps([list(n) for n in r.tour.nodes]) if r.tour else "",
    } for r in results], columns=SWEEP_COLUMNS)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    return frame


def read_sweep_csv(path: Union[str, Path]) -> List[SweepResult]:
    frame = pd.read_csv(path, keep_default_na=False)
    results = []
    for row in frame.to_dict(orient="records"):
        tour = None
        if row.get("tour"):
            nodes = tuple(Node(*values) for values in json.loads(row["tour"]))
            tour = Tour(nodes=nodes, total_cost=float(row["best_cost"]), feasible=str(row["feasible"]).lower() == "true",
                        cost_mode=CostMode(row["cost_mode"]))
        results.append(SweepResult(
            instance=str(row["instance"]),
            n_seams=int(row["n_seams"]),
            solver=str(row["solver"]),
            seed=int(row["seed"]),
            best_cost=float(row["best_cost"]) if row["best_cost"] != "" else math.nan,
            wall_seconds=float(row["wall_seconds"]),
            is_valid=str(row["is_valid"]).lower() == "true",
            error_text=str(row["error_text"]),
            tour=tour,
        ))
    return results


def recompute_cost(result: SweepResult, instance: Instance) -> float:
    total, _ = tour_cost(result.tour.nodes, instance, result.tour.cost_mode)
    return total


def write_ttt_csv(report: TttReport, path: Union[str, Path]) -> pd.DataFrame:
    frame = pd.DataFrame([{"solver": p.solver_id, "target": p.target, "prob": p.prob,
                           "time_seconds": p.time_seconds} for p in report.cdf], columns=TTT_COLUMNS)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    return frame


def _sample_params(solver: SolverName, rng: np.random.Generator) -> dict:
    if solver == "brkga":
        total_parents = int(rng.integers(2, 5))
        return {
            "population_size": int(rng.integers(50, 501)),
            "elite_percentage": float(rng.uniform(0.05, 0.49)),
            "mutants_percentage": float(rng.uniform(0.01, 0.3)),
            "elite_inherit_prob": float(rng.uniform(0.55, 0.95)),
            "total_parents": total_parents,
            "num_elite_parents": int(rng.integers(1, total_parents)),
            "patience": int(rng.integers(10, 101)),
            "num_generations": 100,
        }
    if solver == "da":
        return {
            "visit": float(rng.uniform(1.05, 2.95)),
            "accept": float(rng.uniform(-5.0, -0.05)),
            "initial_temp": float(np.exp(rng.uniform(np.log(100.0), np.log(50000.0)))),
            "restart_temp_ratio": float(np.exp(rng.uniform(np.log(1e-5), np.log(1e-3)))),
            "maxiter": 500,
        }
    raise DomainError(f"random search supports brkga and da, not {solver!r}")


def random_search(
    solver: SolverName,
    instance: Instance,
    trials: int,
    seed: int = 0,
    overrides: Optional[dict] = None,
    workers: int = 1
) -> Tuple[dict, float]:
    """Random hyperparameter search; ``overrides`` pin values (e.g. a smaller generation budget) in every trial."""
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    rng = np.random.default_rng(seed)
    best_params: dict = {}
    best_cost = math.inf
    for trial in range(trials):
        params = {**_sample_params(solver, rng), **(overrides or {}), "seed": seed + trial}
        run = run_solver(SolverSpec(solver=solver, params=params), instance, workers=workers)
        logging.info(f"Trial {trial}: cost {run.tour.total_cost:.4f}")
        if run.tour.total_cost < best_cost:
            best_cost = run.tour.total_cost
            best_params = build_params(solver, params).model_dump(by_alias=True, exclude_none=True)
    return best_params, best_cost
