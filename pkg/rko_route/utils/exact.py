from typing import List, Optional

import numpy as np

from rko_route.models.errors import DomainError
from rko_route.models.instance import Instance, Node
from rko_route.models.tour import CostMode, Tour
from rko_route.utils.rko import tour_cost

MAX_EXACT_SEAMS = 12
MAX_EXACT_NODES = 4000


def _cost_matrix(instance: Instance, nodes: List[Node]) -> np.ndarray:
    position = {node: k for k, node in enumerate(nodes)}
    matrix = np.full((len(nodes), len(nodes)), instance.padding_cost)
    for (a, b), value in instance.costs.items():
        if a in position and b in position:
            matrix[position[a], position[b]] = value
    return matrix


def _held_karp(matrix: np.ndarray, groups: List[np.ndarray], start: np.ndarray, n: int):
    full = (1 << n) - 1
    size = matrix.shape[0]
    best = np.full((1 << n, size), np.inf)
    parent = np.full((1 << n, size), -1, dtype=np.int64)
    for s in range(n):
        best[1 << s, groups[s]] = start[groups[s]]

    for mask in range(1, full + 1):
        row = best[mask]
        if not np.isfinite(row).any():
            continue
        for s in range(n):
            bit = 1 << s
            if mask & bit:
                continue
            candidates = row[:, None] + matrix[:, groups[s]]
            choice = np.argmin(candidates, axis=0)
            values = candidates[choice, np.arange(groups[s].size)]
            target = best[mask | bit]
            better = values < target[groups[s]]
            target[groups[s][better]] = values[better]
            parent[mask | bit, groups[s][better]] = choice[better]
    return best[full], parent


def _walk_back(parent: np.ndarray, last: int, n: int, seam_of: np.ndarray) -> List[int]:
    mask = (1 << n) - 1
    path = [last]
    while True:
        previous = parent[mask, path[-1]]
        mask &= ~(1 << seam_of[path[-1]])
        if previous < 0 or mask == 0:
            break
        path.append(int(previous))
    return path[::-1]


def solve_exact(instance: Instance, cost_mode: CostMode = CostMode.home_anchored) -> Tour:
    """Exact minimum-cost tour over all seam orders and feature choices (Held-Karp)."""
    n = instance.n_seams
    nodes = [instance.home] + instance.node_space()
    if n > MAX_EXACT_SEAMS or len(nodes) > MAX_EXACT_NODES:
        raise DomainError(f"exact search limited to {MAX_EXACT_SEAMS} seams / {MAX_EXACT_NODES} nodes")

    matrix = _cost_matrix(instance, nodes)
    seam_of = np.array([node.seam - 1 for node in nodes])
    groups = [np.flatnonzero(seam_of == s) for s in range(n)]

    best_path: Optional[List[int]] = None
    best_cost = np.inf
    if cost_mode == CostMode.home_anchored:
        finals, parent = _held_karp(matrix, groups, matrix[0], n)
        totals = finals + matrix[:, 0]
        last = int(np.argmin(totals))
        best_path = _walk_back(parent, last, n, seam_of)
    else:
        # a cycle can be rotated to start in the first seam
        for first in groups[0]:
            start = np.full(len(nodes), np.inf)
            start[first] = 0.0
            finals, parent = _held_karp(matrix, groups, start, n)
            totals = finals + matrix[:, first]
            last = int(np.argmin(totals))
            if totals[last] < best_cost:
                best_cost = float(totals[last])
                best_path = _walk_back(parent, last, n, seam_of)

    tour_nodes = tuple(nodes[k] for k in best_path)
    total, feasible = tour_cost(tour_nodes, instance, cost_mode)
    return Tour(nodes=tour_nodes, total_cost=total, feasible=feasible, cost_mode=cost_mode)
