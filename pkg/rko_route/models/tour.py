from dataclasses import dataclass
from enum import Enum
from typing import List, Sequence, Tuple

import numpy as np

from rko_route.models.errors import DomainError
from rko_route.models.instance import Node


class CostMode(str, Enum):
    home_anchored = "home_anchored"
    cyclic = "cyclic"


@dataclass(frozen=True, eq=False)
class Chromosome:
    """Random-key vector; every key lies in (0, 1]."""
    keys: np.ndarray

    def __post_init__(self):
        keys = np.array(self.keys, dtype=float, copy=True).reshape(-1)
        if keys.size == 0:
            raise DomainError("chromosome has no keys")
        if not np.all((keys > 0.0) & (keys <= 1.0)):
            raise DomainError("chromosome keys must lie in (0, 1]")
        keys.flags.writeable = False
        object.__setattr__(self, 'keys', keys)

    def __len__(self) -> int:
        return self.keys.size

    def __eq__(self, other) -> bool:
        return isinstance(other, Chromosome) and np.array_equal(self.keys, other.keys)

    def __hash__(self) -> int:
        return hash(self.keys.tobytes())

    def to_list(self) -> List[float]:
        return [float(k) for k in self.keys]

    @classmethod
    def from_list(cls, values: Sequence[float]) -> 'Chromosome':
        return cls(np.asarray(values, dtype=float))


@dataclass(frozen=True)
class Tour:
    nodes: Tuple[Node, ...]
    total_cost: float
    feasible: bool
    cost_mode: CostMode = CostMode.home_anchored

    @property
    def seam_order(self) -> List[int]:
        """Dense seam indices in visiting order."""
        return [node.seam_index for node in self.nodes]

    def to_dict(self) -> dict:
        return {
            "nodes": [list(node) for node in self.nodes],
            "cost": self.total_cost,
            "feasible": self.feasible,
            "cost_mode": self.cost_mode.value,
        }


@dataclass(frozen=True)
class FitnessRecord:
    chromosome: Chromosome
    tour: Tour
    cost: float
    evaluation_index: int


@dataclass(frozen=True)
class MultiRobotSolution:
    tours: Tuple[Tour, ...]
    total_cost: float
    feasible: bool
    penalty: float = 0.0


@dataclass(frozen=True)
class RelinkResult:
    alpha: float
    chromosome: Chromosome
    cost: float
    tour: Tour
    costs: Tuple[float, ...] = ()
