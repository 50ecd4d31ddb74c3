import argparse
import json
import logging
from dataclasses import asdict
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from rko_route.models.errors import DomainError, InstanceValidationError
from rko_route.models.instance import Instance
from rko_route.models.params import GeneratorParams, QuboParams, RunConfig, SolverSpec, WarmstartSpec
from rko_route.models.tour import Chromosome
from rko_route.models.tour_report import TourReport
from rko_route.utils.bench import (
    compare_table, read_sweep_csv, render_table_markdown, run_solver, run_sweep, run_ttt,
    random_search, write_sweep_csv, write_ttt_csv
)
from rko_route.utils.config import load_params, load_solver_specs, read_json, write_json
from rko_route.utils.greedy import greedy_warm_pool
from rko_route.utils.hashing_utils import instance_fingerprint, keys_fingerprint
from rko_route.utils.instances import downsample, downsample_sweep, generate_synthetic, load_instance, save_instance
from rko_route.utils.qubo import (
    brute_force, build_qubo, decode_qubo_solution, load_qubo, qubit_count_estimate, save_qubo, solve_sa
)
from rko_route.utils.rko import alpha_grid, encode_tour, load_chromosomes, path_relink, save_chromosomes

SOLVERS = ["brkga", "da", "greedy", "qubo-sa"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rko_route", description="Random-key optimization for robot seam sequencing")
    parser.add_argument("--seed", type=int, default=None, help="Seed for every random choice of the subcommand")
    parser.add_argument("--workers", type=int, default=1, help="Worker processes (RKO_ROUTE_WORKERS overrides)")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    commands = parser.add_subparsers(dest="command", required=True)

    def add_instance_source(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("--instance", type=Path, help="Instance CSV")
        sub.add_argument("--seams", type=int, help="Generate a synthetic instance with this many seams instead")
        sub.add_argument("--dims", type=int, nargs=4, default=[2, 2, 2, 2], metavar=("D", "T", "C", "P"))
        sub.add_argument("--feasibility", type=float, default=0.8)
        sub.add_argument("--cost-scale", type=float, default=10.0)

    gen = commands.add_parser("gen", help="Write a synthetic instance")
    gen.add_argument("--seams", type=int, required=True)
    gen.add_argument("--dims", type=int, nargs=4, default=[2, 2, 2, 2], metavar=("D", "T", "C", "P"))
    gen.add_argument("--feasibility", type=float, default=0.8)
    gen.add_argument("--cost-scale", type=float, default=10.0)
    gen.add_argument("--out", type=Path, required=True)

    down = commands.add_parser("downsample", help="Keep a random subset of seams")
    down.add_argument("--instance", type=Path, required=True)
    down.add_argument("--keep", type=int, nargs="+", required=True, help="Seams to keep (several with --sweep)")
    down.add_argument("--sweep", action="store_true", help="Write seeds-per-size samples for every --keep value")
    down.add_argument("--seeds-per-size", type=int, default=10)
    down.add_argument("--out", type=Path, required=True, help="Instance CSV, or a directory with --sweep")

    solve = commands.add_parser("solve", help="Run one solver and write tour.json and trace.csv")
    add_instance_source(solve)
    solve.add_argument("--solver", choices=SOLVERS, default="brkga")
    solve.add_argument("--params", type=Path, help="Params JSON for the solver")
    solve.add_argument("--warmstart", type=Path, help="Warmstart chromosome pool")
    solve.add_argument("--shots", type=int, help="Greedy shots (overrides the params file)")
    solve.add_argument("--out", type=Path, default=Path("."))
    solve.add_argument("--pool-out", type=Path, help="Greedy only: write a warmstart pool here")
    solve.add_argument("--pool-size", type=int, default=100)

    relink = commands.add_parser("relink", help="Path relinking between two tours or chromosomes")
    relink.add_argument("--instance", type=Path, required=True)
    inputs = relink.add_mutually_exclusive_group(required=True)
    inputs.add_argument("--tours", type=Path, nargs=2, metavar=("TOUR_A", "TOUR_B"))
    inputs.add_argument("--chroms", type=Path, nargs=2, metavar=("CHROM_A", "CHROM_B"))
    relink.add_argument("--grid", type=int, default=11)
    relink.add_argument("--out", type=Path, default=Path("."))

    qubo = commands.add_parser("qubo", help="QUBO formulation tools")
    actions = qubo.add_subparsers(dest="action", required=True)
    estimate = actions.add_parser("estimate", help="Qubit count 2 * seams^2 * tools * config * position")
    estimate.add_argument("--seams", type=int, required=True)
    estimate.add_argument("--tools", type=int, required=True)
    estimate.add_argument("--config", type=int, required=True)
    estimate.add_argument("--position", type=int, required=True)
    estimate.add_argument("--max-vars", type=int, default=QuboParams().max_vars)
    for name in ("build", "solve-sa", "brute"):
        action = actions.add_parser(name)
        action.add_argument("--instance", type=Path, required=True)
        action.add_argument("--penalty", type=float)
        action.add_argument("--max-vars", type=int, default=QuboParams().max_vars)
        action.add_argument("--out", type=Path, default=Path("."))
        if name != "build":
            action.add_argument("--qubo", type=Path, help="Read this QUBO file instead of building one")
    actions.choices["solve-sa"].add_argument("--sweeps", type=int, default=QuboParams().sweeps)

    ttt = commands.add_parser("ttt", help="Time-to-target runs and empirical CDF")
    add_instance_source(ttt)
    ttt.add_argument("--solver", choices=SOLVERS, default="brkga")
    ttt.add_argument("--params", type=Path)
    ttt.add_argument("--specs", type=Path, help="JSON list of solver specs (replaces --solver/--params)")
    ttt.add_argument("--targets", type=float, nargs="+", required=True)
    ttt.add_argument("--shots", type=int, default=20)
    ttt.add_argument("--warm-shots", type=int, default=0,
                     help="Greedy warmstart stage for brkga/da with this many shots (0 = cold start)")
    ttt.add_argument("--out", type=Path, default=Path("."))

    sweep = commands.add_parser("sweep", help="Run every instance x solver x seed")
    sweep.add_argument("--instances", type=Path, nargs="+", required=True, help="Instance CSVs or directories of them")
    sweep.add_argument("--specs", type=Path, help="JSON list of solver specs")
    sweep.add_argument("--solvers", choices=SOLVERS, nargs="+", default=["greedy", "brkga"])
    sweep.add_argument("--seeds", type=int, nargs="+", default=[0])
    sweep.add_argument("--warm-shots", type=int, default=1000,
                       help="Greedy warmstart stage for brkga/da with this many shots (0 = cold start)")
    sweep.add_argument("--out", type=Path, default=Path("."))

    table = commands.add_parser("table", help="Baseline comparison table from sweep.csv")
    table.add_argument("--sweep", type=Path, required=True)
    table.add_argument("--out", type=Path, default=Path("."))

    tune = commands.add_parser("tune", help="Random hyperparameter search")
    add_instance_source(tune)
    tune.add_argument("--solver", choices=["brkga", "da"], default="brkga")
    tune.add_argument("--trials", type=int, default=20)
    tune.add_argument("--set", dest="overrides", nargs="*", default=[], metavar="KEY=VALUE",
                      help="Pin a parameter in every trial, e.g. num_generations=50")
    tune.add_argument("--out", type=Path, default=Path("params.json"))
    return parser


def _generator_params(args: argparse.Namespace) -> Optional[GeneratorParams]:
    if args.seams is None:
        return None
    return GeneratorParams(
        n_seams=args.seams,
        dim_sizes=tuple(args.dims),
        feasibility_rate=args.feasibility,
        cost_scale=args.cost_scale,
        seed=args.seed or 0,
    )


def resolve_instance(config: RunConfig) -> Instance:
    if config.instance_path is not None:
        return load_instance(config.instance_path)
    return generate_synthetic(config.generator)


def _run_config(args: argparse.Namespace, config: Dict, **extra) -> RunConfig:
    return RunConfig(
        subcommand=args.command,
        instance_path=args.instance,
        generator=_generator_params(args),
        seed=args.seed,
        workers=config['workers'],
        **extra
    )


def _solver_specs(args: argparse.Namespace) -> List[SolverSpec]:
    if args.specs is not None:
        return load_solver_specs(args.specs)
    solvers = [args.solver] if hasattr(args, "solver") else args.solvers
    raw = read_json(args.params) if getattr(args, "params", None) else {}
    warm_shots = getattr(args, "warm_shots", 0)
    return [SolverSpec(solver=s, params=raw,
                       warmstart=WarmstartSpec(shots=warm_shots) if warm_shots and s in ("brkga", "da") else None)
            for s in solvers]


def _write_trace(trace: Sequence, path: Path) -> None:
    frame = pd.DataFrame(trace, columns=["wall_seconds", "cost"])
    frame.index.name = "row"
    frame.to_csv(path)


def _write_history(result, path: Path) -> None:
    rows = getattr(result, "history", None) or getattr(result, "rows", None)
    if rows:
        pd.DataFrame([asdict(r) for r in rows]).to_csv(path, index=False)
    elif getattr(result, "costs", None) is not None:
        pd.DataFrame({"shot": np.arange(result.costs.size), "cost": result.costs}).to_csv(path, index=False)


def _load_pool(path: Path) -> List[Chromosome]:
    pool = {}
    for chromosome in load_chromosomes(path):
        pool.setdefault(keys_fingerprint(chromosome.keys), chromosome)
    if len(pool) < 1:
        raise DomainError(f"{path}: empty warmstart pool")
    logging.info(f"Loaded {len(pool)} distinct warmstart chromosomes from {path}")
    return list(pool.values())


def cli_gen(args: argparse.Namespace, config: Dict) -> int:
    instance = generate_synthetic(_generator_params(args))
    save_instance(instance, args.out)
    print(f"{args.out}: {instance.n_seams} seams, {len(instance.costs)} edges, fingerprint {instance_fingerprint(instance)}")
    return 0


def cli_downsample(args: argparse.Namespace, config: Dict) -> int:
    instance = load_instance(args.instance)
    seed = args.seed or 0
    if args.sweep:
        samples = downsample_sweep(instance, args.keep, args.seeds_per_size, base_seed=seed)
        for label, sample in samples:
            save_instance(sample, args.out / f"{label}.csv")
        print(f"{args.out}: {len(samples)} instances")
        return 0
    if len(args.keep) != 1:
        raise DomainError("give a single --keep value, or use --sweep")
    sample = downsample(instance, args.keep[0], seed)
    save_instance(sample, args.out)
    print(f"{args.out}: {sample.n_seams} seams")
    return 0


def cli_solve(args: argparse.Namespace, config: Dict) -> int:
    run_config = _run_config(
        args, config,
        solver=args.solver,
        params_path=args.params,
        warmstart_path=args.warmstart,
        output_dir=args.out,
        shots=args.shots,
        pool_out=args.pool_out,
        pool_size=args.pool_size,
    )
    instance = resolve_instance(run_config)
    params = load_params(run_config.solver, run_config.params_path, run_config.seed)
    raw = params.model_dump(by_alias=True, exclude_none=True)
    if run_config.shots is not None:
        if run_config.solver != "greedy":
            raise DomainError("--shots applies to the greedy solver only")
        raw["shots"] = run_config.shots
    warm_pool = _load_pool(run_config.warmstart_path) if run_config.warmstart_path else None

    run = run_solver(SolverSpec(solver=run_config.solver, params=raw), instance,
                     workers=run_config.workers, warm_pool=warm_pool)

    out = run_config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    report = TourReport.from_tour(
        run.tour, run.solver_id,
        seam_labels=list(instance.seam_ids),
        instance_fingerprint=instance_fingerprint(instance),
        seed=raw.get("seed"),
        wall_seconds=run.wall_seconds,
        attributes=run.attributes,
    )
    write_json(report.model_dump(mode="json"), out / "tour.json")
    if run.supports_trace:
        _write_trace(run.trace, out / "trace.csv")
        _write_history(run.result, out / "history.csv")

    if run_config.pool_out is not None:
        if run_config.solver != "greedy":
            raise DomainError("--pool-out needs --solver greedy")
        pool = greedy_warm_pool(run.result, instance, run_config.pool_size, seed=raw.get("seed", 0))
        save_chromosomes(pool, run_config.pool_out)
        logging.info(f"Wrote {len(pool)} warmstart chromosomes to {run_config.pool_out}")

    print(f"{run.solver_id}: cost {run.tour.total_cost:.4f}, feasible {run.tour.feasible}, "
          f"{run.wall_seconds:.2f}s -> {out / 'tour.json'}")
    return 0


def cli_relink(args: argparse.Namespace, config: Dict) -> int:
    instance = load_instance(args.instance)
    fingerprint = instance_fingerprint(instance)
    seed = args.seed or 0
    if args.tours:
        chromosomes = []
        for i, path in enumerate(args.tours):
            report = TourReport.model_validate(read_json(path))
            if report.instance_fingerprint and report.instance_fingerprint != fingerprint:
                raise InstanceValidationError(f"{path} was solved on a different instance")
            chromosomes.append(encode_tour(report.to_tour(), instance, seed=seed + i))
    else:
        chromosomes = [load_chromosomes(path)[0] for path in args.chroms]

    result = path_relink(chromosomes[0], chromosomes[1], alpha_grid(args.grid), instance)
    args.out.mkdir(parents=True, exist_ok=True)
    report = TourReport.from_tour(result.tour, "relink", seam_labels=list(instance.seam_ids),
                                  instance_fingerprint=fingerprint, seed=seed,
                                  attributes={"alpha": result.alpha, "costs": list(result.costs)})
    write_json(report.model_dump(mode="json"), args.out / "tour.json")
    print(f"alpha {result.alpha:.4f}, cost {result.cost:.4f}")
    return 0


def cli_qubo(args: argparse.Namespace, config: Dict) -> int:
    if args.action == "estimate":
        count = qubit_count_estimate(args.seams, args.tools, args.config, args.position)
        verdict = "within" if count <= args.max_vars else "over"
        print(f"{count} qubits ({verdict} cap {args.max_vars})")
        return 0

    instance = load_instance(args.instance)
    if getattr(args, "qubo", None):
        problem = load_qubo(args.qubo, instance)
    else:
        problem = build_qubo(instance, args.penalty, args.max_vars)

    args.out.mkdir(parents=True, exist_ok=True)
    if args.action == "build":
        save_qubo(problem, args.out / "qubo.txt")
        print(f"{args.out / 'qubo.txt'}: {problem.n_vars} variables, penalty {problem.penalty:.4f}")
        return 0

    if args.action == "solve-sa":
        solution = solve_sa(problem, sweeps=args.sweeps, seed=args.seed or 0)
    else:
        solution = brute_force(problem)
    decoded = decode_qubo_solution(solution.assignment, problem)
    print(f"energy {solution.energy:.4f}, valid {decoded.is_valid}"
          + (f", cost {decoded.tour.total_cost:.4f}" if decoded.is_valid else f": {decoded.error_text}"))
    if decoded.is_valid:
        report = TourReport.from_tour(decoded.tour, f"qubo-{args.action}", seam_labels=list(instance.seam_ids),
                                      instance_fingerprint=instance_fingerprint(instance), seed=args.seed,
                                      attributes={"energy": solution.energy, "n_vars": problem.n_vars})
        write_json(report.model_dump(mode="json"), args.out / "tour.json")
    return 0


def cli_ttt(args: argparse.Namespace, config: Dict) -> int:
    run_config = _run_config(args, config, output_dir=args.out)
    instance = resolve_instance(run_config)
    frames = []
    for spec in _solver_specs(args):
        report = run_ttt(spec, instance, args.targets, args.shots, seed=args.seed or 0, workers=run_config.workers)
        frames.append(write_ttt_csv(report, args.out / f"ttt-{spec.solver_id}.csv"))
    ttt = pd.concat(frames, ignore_index=True)
    ttt.to_csv(args.out / "ttt.csv", index=False)
    print(ttt.groupby(["solver", "target"])["prob"].max().to_string())
    return 0


def _instance_paths(paths: Sequence[Path]) -> List[Path]:
    found = []
    for path in paths:
        found.extend(sorted(path.glob("*.csv")) if path.is_dir() else [path])
    if not found:
        raise FileNotFoundError(f"no instance files in {[str(p) for p in paths]}")
    return found


def cli_sweep(args: argparse.Namespace, config: Dict) -> int:
    instances = [(path.stem, load_instance(path)) for path in _instance_paths(args.instances)]
    specs = _solver_specs(args)
    results = run_sweep(instances, specs, args.seeds, workers=config['workers'])
    write_sweep_csv(results, args.out / "sweep.csv")
    print(f"{args.out / 'sweep.csv'}: {len(results)} rows, {sum(not r.is_valid for r in results)} failed")
    return 0


def cli_table(args: argparse.Namespace, config: Dict) -> int:
    rows = compare_table(read_sweep_csv(args.sweep))
    text = render_table_markdown(rows)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "table.md").write_text(text)
    print(text)
    return 0


def _parse_overrides(items: Sequence[str]) -> Dict:
    overrides = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise DomainError(f"expected KEY=VALUE, got {item!r}")
        overrides[key] = json.loads(value)
    return overrides


def cli_tune(args: argparse.Namespace, config: Dict) -> int:
    run_config = _run_config(args, config, solver=args.solver)
    instance = resolve_instance(run_config)
    best_params, best_cost = random_search(args.solver, instance, args.trials, seed=args.seed or 0,
                                           overrides=_parse_overrides(args.overrides), workers=run_config.workers)
    write_json(best_params, args.out)
    print(f"best cost {best_cost:.4f} -> {args.out}")
    return 0


COMMANDS = {
    "gen": cli_gen,
    "downsample": cli_downsample,
    "solve": cli_solve,
    "relink": cli_relink,
    "qubo": cli_qubo,
    "ttt": cli_ttt,
    "sweep": cli_sweep,
    "table": cli_table,
    "tune": cli_tune,
}


def dispatch(args: argparse.Namespace, config: Dict) -> int:
    return COMMANDS[args.command](args, config)
