from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import dimod
import numpy as np

from rko_route.models.instance import Instance, Node
from rko_route.models.tour import Tour


def empty_bqm(n_vars: int, offset: float = 0.0, vartype=dimod.BINARY) -> dimod.BinaryQuadraticModel:
    """Model over variables labelled 0..n_vars-1, all biases zero."""
    return dimod.BinaryQuadraticModel({i: 0.0 for i in range(n_vars)}, {}, offset, vartype)


@dataclass
class QuboProblem:
    """Routing QUBO: a BINARY model over integer labels 0..n_vars-1 plus the
    node/step index needed to decode assignments. The model's offset is the
    energy constant."""
    bqm: dimod.BinaryQuadraticModel
    penalty: float = 0.0
    index: Dict[Tuple[Node, int], int] = field(default_factory=dict)
    nodes: List[Node] = field(default_factory=list)
    n_steps: int = 0
    instance: Optional[Instance] = None

    @classmethod
    def empty(cls, n_vars: int, offset: float = 0.0, **kwargs) -> 'QuboProblem':
        return cls(bqm=empty_bqm(n_vars, offset), **kwargs)

    @property
    def n_vars(self) -> int:
        return self.bqm.num_variables

    @property
    def offset(self) -> float:
        return float(self.bqm.offset)

    def add(self, i: int, j: int, weight: float) -> None:
        # x_i^2 = x_i
        if i == j:
            self.bqm.add_linear(i, weight)
        else:
            self.bqm.add_quadratic(i, j, weight)

    def vectors(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(linear, rows, cols, quadratic) arrays in label order."""
        linear, (rows, cols, quadratic), _ = self.bqm.to_numpy_vectors(variable_order=list(range(self.n_vars)))
        return (np.asarray(linear, dtype=float), np.asarray(rows, dtype=np.int64),
                np.asarray(cols, dtype=np.int64), np.asarray(quadratic, dtype=float))

    def terms(self) -> List[Tuple[int, int, float]]:
        """Non-zero linear terms as (i, i, w) and every coupling as (i, j, w) with i < j, sorted."""
        entries = [(int(v), int(v), float(w)) for v, w in self.bqm.linear.items() if w != 0.0]
        entries += [(int(min(u, v)), int(max(u, v)), float(w)) for (u, v), w in self.bqm.quadratic.items()]
        return sorted(entries)

    def variable(self, node: Node, step: int) -> int:
        return self.index[(node, step)]


@dataclass
class IsingProblem:
    """SPIN model: energy = sum J_ij z_i z_j + sum h_i z_i + offset, z in {-1, +1}."""
    bqm: dimod.BinaryQuadraticModel

    @property
    def n_vars(self) -> int:
        return self.bqm.num_variables

    @property
    def offset(self) -> float:
        return float(self.bqm.offset)

    @property
    def fields(self) -> Dict[int, float]:
        return {int(v): float(h) for v, h in self.bqm.linear.items()}

    @property
    def couplings(self) -> Dict[Tuple[int, int], float]:
        return {(int(u), int(v)): float(j) for (u, v), j in self.bqm.quadratic.items()}


@dataclass
class QuboSolution:
    assignment: np.ndarray
    energy: float


@dataclass
class QuboDecodeResult:
    is_valid: bool
    error_text: str
    tour: Optional[Tour] = None
    empty_steps: List[int] = field(default_factory=list)
    crowded_steps: List[int] = field(default_factory=list)
    unvisited_seams: List[int] = field(default_factory=list)
    repeated_seams: List[int] = field(default_factory=list)
