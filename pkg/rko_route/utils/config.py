import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional, Type, Union

from pydantic import BaseModel

from rko_route.models.params import BrkgaParams, DaParams, GreedyParams, QuboParams, SolverName, SolverSpec
from rko_route.utils.workers import resolve_workers

LOG_LEVEL_ENV = "RKO_ROUTE_LOG_LEVEL"

PARAMS_MODELS: Dict[str, Type[BaseModel]] = {
    "brkga": BrkgaParams,
    "da": DaParams,
    "greedy": GreedyParams,
    "qubo-sa": QuboParams,
}


def read_json(path: Union[str, Path]) -> Any:
    with open(path, 'r') as f:
        return json.load(f)


def write_json(data: Any, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        json.dump(data, f, indent=2)


def build_params(solver: SolverName, raw: Optional[Dict[str, Any]] = None, seed: Optional[int] = None) -> BaseModel:
    """Validate raw params for ``solver``; a given seed replaces the file's."""
    data = dict(raw or {})
    if seed is not None:
        data["seed"] = seed
    return PARAMS_MODELS[solver].model_validate(data)


def load_params(solver: SolverName, path: Optional[Union[str, Path]] = None, seed: Optional[int] = None) -> BaseModel:
    raw = read_json(path) if path is not None else {}
    return build_params(solver, raw, seed)


def load_solver_specs(path: Union[str, Path]) -> list:
    """A JSON list of {"solver", "params", "label"} objects, as used by ttt and sweep."""
    data = read_json(path)
    if isinstance(data, dict):
        data = [data]
    return [SolverSpec.model_validate(item) for item in data]


def load_config(workers: Optional[int] = None, log_level: Optional[str] = None, seed: Optional[int] = None) -> Dict[str, Any]:
    """Process config from command-line values and environment variables."""
    config = {
        'workers': resolve_workers(workers),
        'log_level': (log_level or os.environ.get(LOG_LEVEL_ENV) or 'INFO').upper(),
        'seed': seed,
    }
    logging.info(f"Using config: {json.dumps(config, indent=2)}")
    return config
