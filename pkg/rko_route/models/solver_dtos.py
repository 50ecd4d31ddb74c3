from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from rko_route.models.tour import FitnessRecord, Tour

TracePoint = Tuple[float, float]


@dataclass
class Population:
    members: List[FitnessRecord]
    generation: int = 0

    @property
    def keys(self) -> np.ndarray:
        return np.vstack([m.chromosome.keys for m in self.members])

    @property
    def best(self) -> FitnessRecord:
        return self.members[0]


@dataclass
class GenerationStat:
    generation: int
    best_cost: float
    wall_seconds: float


@dataclass
class BrkgaResult:
    best: FitnessRecord
    history: List[GenerationStat] = field(default_factory=list)
    trace: List[TracePoint] = field(default_factory=list)
    initial_cost: float = 0.0
    restarts: int = 0
    stop_reason: str = "max_generations"
    evaluations: int = 0

    @property
    def tour(self) -> Tour:
        return self.best.tour


@dataclass
class AnnealState:
    current: FitnessRecord
    incumbent: FitnessRecord
    iteration: int = 0
    temperature: float = 0.0


@dataclass
class DaTraceRow:
    iteration: int
    temperature: float
    current_cost: float
    incumbent_cost: float


@dataclass
class DaResult:
    best: FitnessRecord
    rows: List[DaTraceRow] = field(default_factory=list)
    trace: List[TracePoint] = field(default_factory=list)
    restarts: int = 0
    evaluations: int = 0

    @property
    def tour(self) -> Tour:
        return self.best.tour


@dataclass
class GreedyResult:
    best: Tour
    costs: np.ndarray
    tours: List[Tour] = field(default_factory=list)
    trace: List[TracePoint] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "best": float(self.costs.min()),
            "median": float(np.median(self.costs)),
            "shots": int(self.costs.size),
        }
