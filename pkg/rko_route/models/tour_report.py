from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from rko_route.models.instance import Node
from rko_route.models.tour import CostMode, Tour


class TourReport(BaseModel):
    """
    Represents the result of one solver run, written as ``tour.json``.

    Attributes:
        solver: Solver id that produced the tour (brkga, da, greedy, qubo-sa or a sweep label).
        nodes: Ordered node quintuples [seam, direction, tool, config, position]; seams are dense 1..n_seams.
        seam_labels: Original seam label for each dense seam index, so nodes can be mapped back to the input file.
        cost: Total tour cost in seconds.
        feasible: False if any transition of the tour had to be padded.
        cost_mode: home_anchored or cyclic.
        instance_fingerprint: Digest of the instance the tour belongs to.
        seed: Seed the run was started with.
        wall_seconds: Solver wall time, excluding instance loading.
        attributes: Solver-specific extras (generations, restarts, evaluations...).
    """

    solver: str
    nodes: List[List[int]]
    seam_labels: List[int] = Field(default_factory=list)
    cost: float
    feasible: bool
    cost_mode: CostMode = CostMode.home_anchored
    instance_fingerprint: str = ""
    seed: Optional[int] = None
    wall_seconds: float = 0.0
    attributes: Dict[str, Any] = Field(default_factory=dict)

    @classmethod
    def from_tour(cls, tour: Tour, solver: str, **kwargs) -> 'TourReport':
        return cls(
            solver=solver,
            nodes=[list(node) for node in tour.nodes],
            cost=tour.total_cost,
            feasible=tour.feasible,
            cost_mode=tour.cost_mode,
            **kwargs
        )

    def to_tour(self) -> Tour:
        return Tour(
            nodes=tuple(Node(*values) for values in self.nodes),
            total_cost=self.cost,
            feasible=self.feasible,
            cost_mode=self.cost_mode,
        )
