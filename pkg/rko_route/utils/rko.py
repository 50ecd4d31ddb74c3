import json
import logging
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from rko_route.models.errors import DomainError
from rko_route.models.instance import NUM_BLOCKS, NUM_FEATURES, Instance, Node
from rko_route.models.tour import (
    Chromosome, CostMode, FitnessRecord, MultiRobotSolution, RelinkResult, Tour,
)
from rko_route.utils.workers import DecodePool

# smallest key allowed after interpolation; keeps keys inside (0, 1]
MIN_KEY = np.nextafter(0.0, 1.0)
BIN_MARGIN = 1e-3

CollisionPenalty = Callable[[Sequence[Tour]], float]


def random_keys(rng: np.random.Generator, shape) -> np.ndarray:
    """Uniform keys in (0, 1]."""
    return 1.0 - rng.random(shape)


def random_chromosome(rng: np.random.Generator, length: int) -> Chromosome:
    return Chromosome(random_keys(rng, length))


def decode_permutation(keys) -> np.ndarray:
    """0-based indices that sort ``keys`` ascending; ties keep index order."""
    keys = np.asarray(keys, dtype=float)
    if keys.size == 0:
        raise DomainError("cannot decode an empty key vector")
    return np.argsort(keys, kind='stable')


def decode_categorical(keys, cardinality: int) -> np.ndarray:
    """Map each key to the 0-based k with key in (k/C, (k+1)/C]."""
    if cardinality < 1:
        raise DomainError(f"cardinality must be >= 1, got {cardinality}")
    keys = np.asarray(keys, dtype=float)
    values = np.ceil(keys * cardinality).astype(np.int64) - 1
    return np.clip(values, 0, cardinality - 1)


def chromosome_length(instance: Instance) -> int:
    return NUM_BLOCKS * instance.n_seams


def tour_cost(
    nodes: Sequence[Node],
    instance: Instance,
    cost_mode: CostMode = CostMode.home_anchored
) -> Tuple[float, bool]:
    """Total cost of a node sequence and whether every edge was feasible."""
    if not nodes:
        raise DomainError("cannot cost an empty tour")
    if cost_mode == CostMode.home_anchored:
        path = [instance.home, *nodes, instance.home]
    else:
        path = [*nodes, nodes[0]]

    total = 0.0
    feasible = True
    for a, b in zip(path, path[1:]):
        value, present = instance.edge(a, b)
        total += value
        feasible = feasible and present
    return total, feasible


def decode_keys(
    keys: np.ndarray,
    instance: Instance,
    cost_mode: CostMode = CostMode.home_anchored
) -> Tour:
    n = instance.n_seams
    if keys.size != NUM_BLOCKS * n:
        raise DomainError(f"chromosome length {keys.size} != {NUM_BLOCKS} x {n} seams")

    blocks = keys.reshape(NUM_BLOCKS, n)
    order = decode_permutation(blocks[0])
    # features are bound to seam identity, then read out in visit order
    features = [decode_categorical(blocks[k + 1], instance.dim_sizes[k]) for k in range(NUM_FEATURES)]
    nodes = tuple(
        Node(int(s) + 1, int(features[0][s]), int(features[1][s]), int(features[2][s]), int(features[3][s]))
        for s in order
    )
    total, feasible = tour_cost(nodes, instance, cost_mode)
    return Tour(nodes=nodes, total_cost=total, feasible=feasible, cost_mode=cost_mode)


def decode(
    chromosome: Chromosome,
    instance: Instance,
    cost_mode: CostMode = CostMode.home_anchored
) -> Tour:
    return decode_keys(chromosome.keys, instance, cost_mode)


def _bin_keys(values: np.ndarray, cardinality: int, noise: Optional[np.random.Generator]) -> np.ndarray:
    # key in (v/C, (v+1)/C]; centre of the bin when no noise is requested.
    # noisy keys keep BIN_MARGIN of the bin width clear of both edges
    width = 1.0 / cardinality
    upper = (values + 1) * width
    if noise is None:
        return upper - width / 2.0
    return upper - width * (BIN_MARGIN + (1.0 - 2.0 * BIN_MARGIN) * noise.random(values.shape))


def encode_warmstart(
    permutation: Sequence[int],
    features: Optional[np.ndarray] = None,
    seed: Optional[int] = None,
    dim_sizes: Optional[Sequence[int]] = None
) -> Chromosome:
    """
    Build a chromosome that decodes to ``permutation`` (0-based visit order).

    Position k of the visit order gets a key in the k-th chunk of (0, 1],
    so sorting recovers the order. ``features`` has one row per feature
    and one column per seam (seam-bound, not visit-ordered); each value is
    encoded as a key inside its bin. ``seed=None`` places every key at the
    centre of its chunk or bin.
    """
    order = np.asarray(permutation, dtype=np.int64)
    n = order.size
    if n == 0 or not np.array_equal(np.sort(order), np.arange(n)):
        raise DomainError(f"not a permutation of 0..{n - 1}: {list(permutation)}")

    noise = None if seed is None else np.random.default_rng(seed)
    seam_keys = np.empty(n)
    seam_keys[order] = _bin_keys(np.arange(n), n, noise)
    if features is None:
        return Chromosome(seam_keys)

    features = np.asarray(features, dtype=np.int64)
    if dim_sizes is None or features.shape != (NUM_FEATURES, n):
        raise DomainError(f"features must have shape ({NUM_FEATURES}, {n}) and come with dim_sizes")
    blocks = [seam_keys]
    for values, cardinality in zip(features, dim_sizes):
        if values.min() < 0 or values.max() >= cardinality:
            raise DomainError(f"feature value outside 0..{cardinality - 1}")
        blocks.append(_bin_keys(values, cardinality, noise))
    return Chromosome(np.concatenate(blocks))


def encode_tour(tour: Tour, instance: Instance, seed: Optional[int] = None) -> Chromosome:
    """Warmstart chromosome that decodes back to ``tour``."""
    order = [node.seam_index for node in tour.nodes]
    features = np.zeros((NUM_FEATURES, instance.n_seams), dtype=np.int64)
    for node in tour.nodes:
        features[:, node.seam_index] = node.features
    return encode_warmstart(order, features, seed=seed, dim_sizes=instance.dim_sizes)


def alpha_grid(size: int) -> np.ndarray:
    if size < 2:
        raise DomainError(f"relink grid needs at least the two endpoints, got size {size}")
    return np.linspace(0.0, 1.0, size)


def path_relink(
    x1: Chromosome,
    x2: Chromosome,
    grid: Sequence[float],
    instance: Instance,
    cost_mode: CostMode = CostMode.home_anchored
) -> RelinkResult:
    """Scan X(a) = (1 - a) X1 + a X2 over ``grid`` and keep the cheapest decode."""
    if len(x1) != len(x2):
        raise DomainError(f"chromosome lengths differ: {len(x1)} vs {len(x2)}")
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0 or grid.min() < 0.0 or grid.max() > 1.0 or 0.0 not in grid or 1.0 not in grid:
        raise DomainError("relink grid must lie in [0, 1] and contain both 0 and 1")

    best: Optional[RelinkResult] = None
    costs = []
    for alpha in grid:
        keys = np.maximum((1.0 - alpha) * x1.keys + alpha * x2.keys, MIN_KEY)
        chromosome = Chromosome(keys)
        tour = decode(chromosome, instance, cost_mode)
        costs.append(tour.total_cost)
        if best is None or tour.total_cost < best.cost:
            best = RelinkResult(alpha=float(alpha), chromosome=chromosome, cost=tour.total_cost, tour=tour)
    logging.info(f"Path relinking over {grid.size} points: best cost {best.cost:.4f} at alpha={best.alpha:.4f}")
    return RelinkResult(best.alpha, best.chromosome, best.cost, best.tour, tuple(costs))


def decode_multi_robot(
    chromosome: Chromosome,
    n_robots: int,
    instance: Instance,
    collision_penalty: Optional[CollisionPenalty] = None
) -> MultiRobotSolution:
    """
    Decode n_seams + v keys (optionally followed by the four feature blocks)
    into one home-anchored tour per robot. Keys are sorted, rotated so the
    largest robot key comes last, and each robot key closes the run of seams
    before it.
    """
    if n_robots < 1:
        raise DomainError(f"need at least one robot, got {n_robots}")
    n = instance.n_seams
    head = n + n_robots
    keys = chromosome.keys
    if keys.size not in (head, head + NUM_FEATURES * n):
        raise DomainError(f"multi-robot chromosome needs {head} or {head + NUM_FEATURES * n} keys, got {keys.size}")

    if keys.size == head:
        features = np.zeros((NUM_FEATURES, n), dtype=np.int64)
    else:
        blocks = keys[head:].reshape(NUM_FEATURES, n)
        features = np.array([decode_categorical(blocks[k], instance.dim_sizes[k]) for k in range(NUM_FEATURES)])

    order = decode_permutation(keys[:head])
    robot_keys = keys[n:head]
    last_robot = n + int(np.argmax(robot_keys))
    shift = int(np.flatnonzero(order == last_robot)[0]) + 1
    order = np.roll(order, -shift)

    runs: List[List[Node]] = [[] for _ in range(n_robots)]
    current: List[Node] = []
    for index in order:
        index = int(index)
        if index >= n:
            runs[index - n] = current
            current = []
        else:
            current.append(Node(index + 1, *(int(f[index]) for f in features)))

    tours = []
    for nodes in runs:
        if nodes:
            total, feasible = tour_cost(nodes, instance, CostMode.home_anchored)
        else:
            total, feasible = 0.0, True
        tours.append(Tour(nodes=tuple(nodes), total_cost=total, feasible=feasible))

    penalty = collision_penalty(tours) if collision_penalty else 0.0
    return MultiRobotSolution(
        tours=tuple(tours),
        total_cost=sum(t.total_cost for t in tours) + penalty,
        feasible=all(t.feasible for t in tours),
        penalty=penalty,
    )


class Evaluator:
    """Decodes chromosomes into FitnessRecords and counts evaluations."""

    def __init__(self, instance: Instance, cost_mode: CostMode = CostMode.home_anchored, workers: int = 1):
        self.instance = instance
        self.cost_mode = cost_mode
        self.evaluations = 0
        self.pool = DecodePool(instance, cost_mode, workers)

    def __enter__(self) -> 'Evaluator':
        return self

    def __exit__(self, *exc) -> None:
        self.pool.close()

    @property
    def length(self) -> int:
        return chromosome_length(self.instance)

    def _record(self, keys: np.ndarray, tour: Tour) -> FitnessRecord:
        self.evaluations += 1
        return FitnessRecord(Chromosome(keys), tour, tour.total_cost, self.evaluations)

    def evaluate(self, keys: Union[np.ndarray, Chromosome]) -> FitnessRecord:
        if isinstance(keys, Chromosome):
            keys = keys.keys
        return self._record(keys, decode_keys(keys, self.instance, self.cost_mode))

    def evaluate_many(self, keys: np.ndarray) -> List[FitnessRecord]:
        keys = np.atleast_2d(keys)
        return [self._record(row, tour) for row, tour in zip(keys, self.pool.decode(keys))]


def save_chromosomes(chromosomes: Sequence[Chromosome], path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        json.dump([c.to_list() for c in chromosomes], f, indent=2)


def load_chromosomes(path: Union[str, Path]) -> List[Chromosome]:
    """Read a JSON array of key arrays, or one chromosome per line of whitespace-separated keys."""
    text = Path(path).read_text()
    stripped = text.lstrip()
    if stripped.startswith('['):
        data = json.loads(stripped)
        if data and not isinstance(data[0], list):
            data = [data]
        return [Chromosome.from_list(row) for row in data]
    return [Chromosome.from_list([float(v) for v in line.replace(',', ' ').split()])
            for line in text.splitlines() if line.strip()]
