import logging
import os
from concurrent.futures import ProcessPoolExecutor
from typing import List, Optional

import numpy as np

from rko_route.models.instance import Instance
from rko_route.models.tour import CostMode, Tour

WORKERS_ENV = "RKO_ROUTE_WORKERS"

# per-process state installed by the pool initializer
_instance: Optional[Instance] = None
_cost_mode: CostMode = CostMode.home_anchored


def resolve_workers(requested: Optional[int] = None) -> int:
    """Worker count: RKO_ROUTE_WORKERS overrides the requested value."""
    env_value = os.environ.get(WORKERS_ENV)
    if env_value:
        try:
            return max(1, int(env_value))
        except ValueError:
            logging.warning(f"Ignoring invalid {WORKERS_ENV}={env_value!r}")
    return max(1, requested or 1)


def _install(instance: Instance, cost_mode: CostMode) -> None:
    global _instance, _cost_mode
    _instance = instance
    _cost_mode = cost_mode


def _decode_chunk(rows: np.ndarray) -> List[Tour]:
    from rko_route.utils.rko import decode_keys
    return [decode_keys(row, _instance, _cost_mode) for row in rows]


class DecodePool:
    """Decodes batches of key vectors, in-process or on a process pool.

    Results always come back in input order, so callers see the same
    output for any worker count.
    """

    def __init__(self, instance: Instance, cost_mode: CostMode = CostMode.home_anchored, workers: int = 1):
        self.instance = instance
        self.cost_mode = cost_mode
        self.workers = max(1, workers)
        self._executor: Optional[ProcessPoolExecutor] = None

    def __enter__(self) -> 'DecodePool':
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown()
            self._executor = None

    def decode(self, keys: np.ndarray) -> List[Tour]:
        from rko_route.utils.rko import decode_keys
        keys = np.atleast_2d(keys)
        if self.workers == 1 or len(keys) < 2 * self.workers:
            return [decode_keys(row, self.instance, self.cost_mode) for row in keys]

        if self._executor is None:
            logging.debug(f"Starting decode pool with {self.workers} workers")
            self._executor = ProcessPoolExecutor(
                max_workers=self.workers,
                initializer=_install,
                initargs=(self.instance, self.cost_mode)
            )
        tours: List[Tour] = []
        for chunk in self._executor.map(_decode_chunk, np.array_split(keys, self.workers)):
            tours.extend(chunk)
        return tours
