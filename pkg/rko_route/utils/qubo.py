import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import dimod
import numpy as np
from scipy import sparse

from rko_route.models.errors import DomainError, QuboSizeError
from rko_route.models.instance import Instance, Node
from rko_route.models.qubo_dtos import IsingProblem, QuboDecodeResult, QuboProblem, QuboSolution
from rko_route.models.tour import CostMode, Tour
from rko_route.utils.rko import tour_cost

DEFAULT_MAX_VARS = 50_000
MAX_BRUTE_FORCE_VARS = 24
_BRUTE_FORCE_CHUNK = 1 << 16


def qubit_count_estimate(n_seams: int, n_tools: int, n_config: int, n_position: int) -> int:
    """2 * n_seams^2 * n_tools * n_config * n_position (leading 2 = binary direction)."""
    values = (n_seams, n_tools, n_config, n_position)
    if any(v < 1 for v in values):
        raise DomainError(f"all counts must be >= 1, got {values}")
    return 2 * n_seams ** 2 * n_tools * n_config * n_position


def variable_count(n_seams: int, dim_sizes: Sequence[int]) -> int:
    """One-hot variable count for n_seams timesteps over the full node space."""
    return n_seams * n_seams * math.prod(dim_sizes)


def default_penalty(instance: Instance) -> float:
    return 2.0 * instance.n_seams * instance.max_cost


def build_qubo(instance: Instance, penalty: Optional[float] = None, max_vars: int = DEFAULT_MAX_VARS) -> QuboProblem:
    """
    One-hot routing QUBO: x[node][step] = 1 iff ``node`` occupies tour
    position ``step``. The cost term couples consecutive steps (the last
    step wraps to the first); two penalty terms force exactly one node per
    step and exactly one visit per seam. Missing edges cost the padding.
    """
    penalty = default_penalty(instance) if penalty is None else penalty
    if penalty <= 0:
        raise DomainError(f"penalty must be > 0, got {penalty}")
    n = instance.n_seams
    n_vars = variable_count(n, instance.dim_sizes)
    if n_vars > max_vars:
        _, n_t, n_c, n_p = instance.dim_sizes
        raise QuboSizeError(n_vars, max_vars, qubit_count_estimate(n, n_t, n_c, n_p))

    nodes = instance.node_space()
    m = len(nodes)
    problem = QuboProblem.empty(n_vars, penalty=penalty, nodes=nodes, n_steps=n, instance=instance)
    for step in range(n):
        for k, node in enumerate(nodes):
            problem.index[(node, step)] = step * m + k

    # travel cost between consecutive steps
    weights = np.full((m, m), instance.padding_cost)
    position = {node: k for k, node in enumerate(nodes)}
    for (a, b), value in instance.costs.items():
        if a in position and b in position:
            weights[position[a], position[b]] = value
    for step in range(n):
        following = (step + 1) % n
        for u in range(m):
            for v in range(m):
                problem.add(step * m + u, following * m + v, float(weights[u, v]))

    # P * (1 - sum x)^2 = P - P * sum x + 2P * sum_{i<j} x_i x_j
    def one_hot(variables: List[int]) -> None:
        problem.bqm.offset += penalty
        for a, i in enumerate(variables):
            problem.add(i, i, -penalty)
            for j in variables[a + 1:]:
                problem.add(i, j, 2.0 * penalty)

    for step in range(n):
        one_hot([step * m + k for k in range(m)])
    for seam in range(1, n + 1):
        members = [k for k, node in enumerate(nodes) if node.seam == seam]
        one_hot([step * m + k for step in range(n) for k in members])

    logging.info(f"Built QUBO: {n_vars} variables, {problem.bqm.num_interactions} couplings, penalty {penalty:.4f}")
    return problem


def _check_length(assignment: np.ndarray, n_vars: int) -> np.ndarray:
    assignment = np.asarray(assignment, dtype=float).reshape(-1)
    if assignment.size != n_vars:
        raise DomainError(f"assignment has {assignment.size} bits, problem has {n_vars} variables")
    return assignment


def model_energies(bqm: dimod.BinaryQuadraticModel, samples: np.ndarray) -> np.ndarray:
    """Energies of a (k, n_vars) sample matrix, columns in label order."""
    samples = np.atleast_2d(samples)
    if bqm.num_variables == 0:
        return np.full(samples.shape[0], float(bqm.offset))
    labels = list(range(bqm.num_variables))
    return np.asarray(bqm.energies((samples.astype(np.int8), labels)), dtype=float)


def qubo_energy(assignment, problem: QuboProblem) -> float:
    x = _check_length(assignment, problem.n_vars)
    return float(model_energies(problem.bqm, x)[0])


def to_ising(problem: QuboProblem) -> IsingProblem:
    """Substitute x = (z + 1) / 2."""
    return IsingProblem(problem.bqm.change_vartype(dimod.SPIN, inplace=False))


def to_qubo(ising: IsingProblem) -> QuboProblem:
    """Substitute z = 2x - 1."""
    return QuboProblem(bqm=ising.bqm.change_vartype(dimod.BINARY, inplace=False))


def ising_energy(spins, ising: IsingProblem) -> float:
    """Energy of a +/-1 spin vector, without the constant offset."""
    z = _check_length(spins, ising.n_vars)
    return float(model_energies(ising.bqm, z)[0]) - ising.offset


def encode_tour_assignment(tour: Tour, problem: QuboProblem) -> np.ndarray:
    x = np.zeros(problem.n_vars, dtype=np.int8)
    for step, node in enumerate(tour.nodes):
        x[problem.variable(node, step)] = 1
    return x


def decode_qubo_solution(assignment, problem: QuboProblem) -> QuboDecodeResult:
    x = _check_length(assignment, problem.n_vars).astype(np.int8)
    if problem.instance is None or not problem.nodes:
        raise DomainError("QUBO has no instance attached; rebuild it from the instance to decode")
    m = len(problem.nodes)
    grid = x.reshape(problem.n_steps, m)

    result = QuboDecodeResult(is_valid=False, error_text="")
    visits: Dict[int, int] = {}
    chosen = []
    for step in range(problem.n_steps):
        active = np.flatnonzero(grid[step])
        if active.size == 0:
            result.empty_steps.append(step)
        elif active.size > 1:
            result.crowded_steps.append(step)
        for k in active:
            seam = problem.nodes[k].seam
            visits[seam] = visits.get(seam, 0) + 1
        if active.size == 1:
            chosen.append(problem.nodes[active[0]])

    n = problem.instance.n_seams
    result.unvisited_seams = [s - 1 for s in range(1, n + 1) if visits.get(s, 0) == 0]
    result.repeated_seams = [s - 1 for s in range(1, n + 1) if visits.get(s, 0) > 1]

    problems = []
    if result.empty_steps:
        problems.append(f"no node at steps {result.empty_steps}")
    if result.crowded_steps:
        problems.append(f"several nodes at steps {result.crowded_steps}")
    if result.unvisited_seams:
        problems.append(f"seams never visited {result.unvisited_seams}")
    if result.repeated_seams:
        problems.append(f"seams visited more than once {result.repeated_seams}")
    if problems:
        result.error_text = "; ".join(problems)
        return result

    total, feasible = tour_cost(chosen, problem.instance, CostMode.cyclic)
    result.tour = Tour(nodes=tuple(chosen), total_cost=total, feasible=feasible, cost_mode=CostMode.cyclic)
    result.is_valid = True
    return result


def repair_tour(assignment, problem: QuboProblem) -> Tour:
    """Best-effort tour from any assignment: seams in order of first activation, missing ones appended."""
    x = _check_length(assignment, problem.n_vars).astype(np.int8)
    if problem.instance is None:
        raise DomainError("QUBO has no instance attached; rebuild it from the instance to decode")
    grid = x.reshape(problem.n_steps, len(problem.nodes))
    placed = set()
    nodes = []
    for step in range(problem.n_steps):
        for k in np.flatnonzero(grid[step]):
            node = problem.nodes[k]
            if node.seam not in placed:
                placed.add(node.seam)
                nodes.append(node)
    nodes.extend(Node(s) for s in range(1, problem.instance.n_seams + 1) if s not in placed)
    total, feasible = tour_cost(nodes, problem.instance, CostMode.cyclic)
    return Tour(nodes=tuple(nodes), total_cost=total, feasible=feasible, cost_mode=CostMode.cyclic)


def _symmetric_couplings(problem: QuboProblem) -> Tuple[np.ndarray, sparse.csr_matrix]:
    diagonal, r, c, w = problem.vectors()
    coupling = sparse.coo_matrix(
        (np.concatenate([w, w]), (np.concatenate([r, c]), np.concatenate([c, r]))),
        shape=(problem.n_vars, problem.n_vars)
    ).tocsr()
    return diagonal, coupling


def default_temperatures(problem: QuboProblem) -> Tuple[float, float]:
    """Hot start accepts the largest single-flip change half the time; cold end rejects the smallest 99%."""
    diagonal, coupling = _symmetric_couplings(problem)
    spread = np.abs(diagonal) + np.asarray(abs(coupling).sum(axis=1)).reshape(-1)
    magnitudes = np.abs(np.concatenate([diagonal, coupling.data]))
    magnitudes = magnitudes[magnitudes > 0]
    if magnitudes.size == 0:
        return 1.0, 1e-3
    hot = float(spread.max()) / math.log(2.0)
    cold = float(magnitudes.min()) / math.log(100.0)
    return hot, min(cold, hot)


def solve_sa(
    problem: QuboProblem,
    sweeps: int = 1000,
    t_start: Optional[float] = None,
    t_end: Optional[float] = None,
    seed: int = 0,
    initial: Optional[np.ndarray] = None
) -> QuboSolution:
    """Single-bit-flip Metropolis sweeps under a geometric temperature schedule; returns the best state seen."""
    rng = np.random.default_rng(seed)
    n = problem.n_vars
    x = rng.integers(0, 2, size=n).astype(float) if initial is None else _check_length(initial, n).copy()
    energy = qubo_energy(x, problem)
    best_x, best_energy = x.copy(), energy
    if sweeps == 0 or n == 0:
        return QuboSolution(best_x.astype(np.int8), best_energy)

    hot, cold = default_temperatures(problem)
    t_start = t_start or hot
    t_end = t_end or cold
    temps = np.geomspace(t_start, t_end, sweeps)

    diagonal, coupling = _symmetric_couplings(problem)
    indptr, indices, data = coupling.indptr, coupling.indices, coupling.data
    field = coupling @ x
    for temp in temps:
        order = rng.permutation(n)
        thresholds = rng.random(n)
        for step, i in enumerate(order):
            sign = 1.0 - 2.0 * x[i]
            delta = sign * (diagonal[i] + field[i])
            if delta <= 0.0 or thresholds[step] < math.exp(-delta / temp):
                x[i] += sign
                lo, hi = indptr[i], indptr[i + 1]
                field[indices[lo:hi]] += sign * data[lo:hi]
                energy += delta
                if energy < best_energy - 1e-12:
                    best_energy = energy
                    best_x = x.copy()

    best_energy = qubo_energy(best_x, problem)
    logging.info(f"QUBO simulated annealing: {sweeps} sweeps, best energy {best_energy:.4f}")
    return QuboSolution(best_x.astype(np.int8), best_energy)


def brute_force(problem: QuboProblem) -> QuboSolution:
    """Exact minimum over all 2^n_vars assignments; the lowest index wins ties."""
    n = problem.n_vars
    if n > MAX_BRUTE_FORCE_VARS:
        raise QuboSizeError(n, MAX_BRUTE_FORCE_VARS, n)
    if n == 0:
        return QuboSolution(np.zeros(0, dtype=np.int8), problem.offset)

    shifts = np.arange(n, dtype=np.int64)
    best_index, best_energy = 0, np.inf
    total = 1 << n
    for lo in range(0, total, _BRUTE_FORCE_CHUNK):
        index = np.arange(lo, min(total, lo + _BRUTE_FORCE_CHUNK), dtype=np.int64)
        energies = model_energies(problem.bqm, (index[:, None] >> shifts) & 1)
        k = int(np.argmin(energies))
        if energies[k] < best_energy:
            best_energy = float(energies[k])
            best_index = int(index[k])

    assignment = ((best_index >> shifts) & 1).astype(np.int8)
    return QuboSolution(assignment, qubo_energy(assignment, problem))


def save_qubo(problem: QuboProblem, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [str(problem.n_vars), f"# offset {problem.offset!r}", f"# penalty {problem.penalty!r}"]
    lines += [f"{i} {j} {w!r}" for i, j, w in problem.terms()]
    path.write_text("\n".join(lines) + "\n")


def load_qubo(path: Union[str, Path], instance: Optional[Instance] = None) -> QuboProblem:
    """Read the sparse text format; pass the instance to restore the variable index for decoding."""
    problem: Optional[QuboProblem] = None
    offset = penalty = 0.0
    for line_number, line in enumerate(Path(path).read_text().splitlines(), start=1):
        text = line.strip()
        if not text:
            continue
        if text.startswith('#'):
            parts = text[1:].split()
            if len(parts) == 2 and parts[0] == "offset":
                offset = float(parts[1])
            elif len(parts) == 2 and parts[0] == "penalty":
                penalty = float(parts[1])
            continue
        tokens = text.split()
        if problem is None:
            problem = QuboProblem.empty(int(tokens[0]))
            continue
        if len(tokens) != 3:
            raise DomainError(f"line {line_number}: expected 'i j weight', got {text!r}")
        i, j = int(tokens[0]), int(tokens[1])
        if not (0 <= i < problem.n_vars and 0 <= j < problem.n_vars):
            raise DomainError(f"line {line_number}: variable index outside 0..{problem.n_vars - 1}")
        problem.add(i, j, float(tokens[2]))
    if problem is None:
        raise DomainError(f"{path}: missing n_vars header")
    problem.bqm.offset = offset
    problem.penalty = penalty

    if instance is not None:
        if variable_count(instance.n_seams, instance.dim_sizes) != problem.n_vars:
            raise DomainError("QUBO variable count does not match the instance")
        nodes = instance.node_space()
        problem.nodes = nodes
        problem.n_steps = instance.n_seams
        problem.instance = instance
        for step in range(instance.n_seams):
            for k, node in enumerate(nodes):
                problem.index[(node, step)] = step * len(nodes) + k
    return problem
