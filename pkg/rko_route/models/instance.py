import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterator, List, NamedTuple, Tuple

from rko_route.models.errors import DomainError

FEATURES = ("direction", "tool", "config", "position")
NUM_FEATURES = len(FEATURES)
# seam block + one block per categorical feature
NUM_BLOCKS = 1 + NUM_FEATURES


class Node(NamedTuple):
    """One way of processing one seam: (seam, direction, tool, config, position).

    Seam 0 is the robot's home. Real seams are numbered 1..n_seams, so the
    dense index used by chromosomes is ``node.seam - 1``.
    """
    seam: int
    direction: int = 0
    tool: int = 0
    config: int = 0
    position: int = 0

    @property
    def features(self) -> Tuple[int, int, int, int]:
        return (self.direction, self.tool, self.config, self.position)

    @property
    def seam_index(self) -> int:
        return self.seam - 1


HOME = Node(0, 0, 0, 0, 0)

Edge = Tuple[Node, Node]


@dataclass(frozen=True)
class Instance:
    n_seams: int
    dim_sizes: Tuple[int, int, int, int]
    costs: Dict[Edge, float]
    padding_cost: float
    seam_ids: Tuple[int, ...]
    home: Node = HOME
    label: str = ""
    max_cost: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, 'max_cost', max(self.costs.values()) if self.costs else 0.0)

    def check_node(self, node: Node) -> None:
        if not 0 <= node.seam <= self.n_seams:
            raise DomainError(f"seam {node.seam} outside 0..{self.n_seams}")
        for name, value, size in zip(FEATURES, node.features, self.dim_sizes):
            if not 0 <= value < size:
                raise DomainError(f"{name} {value} outside 0..{size - 1} for node {tuple(node)}")

    def cost(self, from_node: Node, to_node: Node) -> float:
        """Stored cost of the transition, or the padding cost if it is infeasible."""
        self.check_node(from_node)
        self.check_node(to_node)
        return self.costs.get((from_node, to_node), self.padding_cost)

    def edge(self, from_node: Node, to_node: Node) -> Tuple[float, bool]:
        # unchecked lookup for decoder hot loops
        value = self.costs.get((from_node, to_node))
        if value is None:
            return self.padding_cost, False
        return value, True

    @property
    def node_space_size(self) -> int:
        size = 1
        for d in self.dim_sizes:
            size *= d
        return self.n_seams * size

    def nodes_of_seam(self, seam: int) -> Iterator[Node]:
        for features in itertools.product(*(range(d) for d in self.dim_sizes)):
            yield Node(seam, *features)

    def node_space(self) -> List[Node]:
        """All non-home nodes in lexicographic order."""
        return [node for seam in range(1, self.n_seams + 1) for node in self.nodes_of_seam(seam)]

    @cached_property
    def _successors(self) -> Dict[Node, List[Tuple[float, Node]]]:
        table: Dict[Node, List[Tuple[float, Node]]] = {}
        for (a, b), value in self.costs.items():
            table.setdefault(a, []).append((value, b))
        for edges in table.values():
            edges.sort()
        return table

    def successors(self, node: Node) -> List[Tuple[float, Node]]:
        """Present outgoing edges of ``node`` sorted by (cost, target node)."""
        return self._successors.get(node, [])
