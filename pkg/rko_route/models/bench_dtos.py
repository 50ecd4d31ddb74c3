from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from rko_route.models.tour import Tour

# (wall_seconds since solver start, incumbent cost)
TracePoint = Tuple[float, float]


@dataclass
class SolverRun:
    solver_id: str
    tour: Tour
    wall_seconds: float
    trace: List[TracePoint] = field(default_factory=list)
    supports_trace: bool = True
    attributes: Dict[str, Any] = field(default_factory=dict)
    # solver-specific result object (BrkgaResult, DaResult, GreedyResult or QuboDecodeResult)
    result: Any = None


@dataclass
class TttRecord:
    solver_id: str
    target: float
    shot: int
    hit: bool
    time_to_hit: Optional[float] = None


@dataclass
class TttCdfPoint:
    solver_id: str
    target: float
    prob: float
    time_seconds: float


@dataclass
class TttReport:
    records: List[TttRecord] = field(default_factory=list)
    cdf: List[TttCdfPoint] = field(default_factory=list)


@dataclass
class SweepResult:
    instance: str
    n_seams: int
    solver: str
    seed: int
    best_cost: float
    wall_seconds: float
    is_valid: bool = True
    error_text: str = ""
    tour: Optional[Tour] = None


@dataclass
class TableRow:
    instance: str
    greedy_best: float
    solver_best: dict
    best_solver: str
    best_other: float
    delta: float
    delta_percent: float
