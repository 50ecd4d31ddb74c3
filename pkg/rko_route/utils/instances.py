import logging
import math
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from rko_route.models.errors import DomainError, GeneratorError, InstanceParseError, InstanceValidationError
from rko_route.models.instance import HOME, NUM_FEATURES, Edge, Instance, Node
from rko_route.models.params import GeneratorParams

HEADER = ["s_from", "d_from", "t_from", "c_from", "p_from",
          "s_to", "d_to", "t_to", "c_to", "p_to", "cost"]
NUM_COLUMNS = len(HEADER)
PADDING_FACTOR = 10.0

DIMS_COMMENT = "# dim_sizes"
SEPARATORS = r"[,\s|]+"

# (from node, to node, cost) with seams given as original labels
LabelRow = Tuple[Tuple[int, ...], Tuple[int, ...], float]


def padding_cost_for(n_seams: int, max_cost: float) -> float:
    return n_seams * max_cost * PADDING_FACTOR


def build_instance(
    rows: Sequence[LabelRow],
    dim_sizes: Optional[Tuple[int, int, int, int]] = None,
    label: str = ""
) -> Instance:
    """Build an Instance from rows keyed by original seam labels (label 0 is home)."""
    if not rows:
        raise InstanceValidationError("no rows")

    labels = sorted(({row[0][0] for row in rows} | {row[1][0] for row in rows}) - {0})
    if not labels:
        raise InstanceValidationError("no seams besides home")
    dense = {seam: i + 1 for i, seam in enumerate(labels)}
    dense[0] = 0

    if dim_sizes is None:
        maxima = [0] * NUM_FEATURES
        for from_node, to_node, _ in rows:
            for node in (from_node, to_node):
                for k in range(NUM_FEATURES):
                    maxima[k] = max(maxima[k], node[k + 1])
        dim_sizes = tuple(m + 1 for m in maxima)

    costs: Dict[Edge, float] = {}
    for from_node, to_node, value in rows:
        a = Node(dense[from_node[0]], *from_node[1:])
        b = Node(dense[to_node[0]], *to_node[1:])
        for node in (a, b):
            if node.seam == 0 and node != HOME:
                raise InstanceValidationError(f"home seam 0 must be (0,0,0,0,0), got {tuple(node)}")
            if any(f >= d for f, d in zip(node.features, dim_sizes)):
                raise InstanceValidationError(f"node {tuple(node)} outside dim_sizes {tuple(dim_sizes)}")
        costs[(a, b)] = float(value)

    max_cost = max(costs.values())
    return Instance(
        n_seams=len(labels),
        dim_sizes=tuple(dim_sizes),
        costs=costs,
        padding_cost=padding_cost_for(len(labels), max_cost),
        seam_ids=tuple(labels),
        label=label,
    )


def _parse_row(tokens: List[str], line_number: int) -> LabelRow:
    if len(tokens) != NUM_COLUMNS:
        raise InstanceParseError(f"expected {NUM_COLUMNS} columns, found {len(tokens)}", line_number)
    try:
        coords = [int(token) for token in tokens[:10]]
        value = float(tokens[10])
    except ValueError as e:
        raise InstanceParseError(f"malformed value ({e})", line_number) from None
    if any(c < 0 for c in coords):
        raise InstanceParseError("node coordinates must be non-negative", line_number)
    if not math.isfinite(value) or value <= 0.0:
        raise InstanceValidationError(f"line {line_number}: cost must be finite and > 0, got {tokens[10]}")
    return tuple(coords[:5]), tuple(coords[5:]), value


def _parse_dims(text: str, line_number: int) -> Tuple[int, int, int, int]:
    tokens = text[len(DIMS_COMMENT):].split()
    try:
        dims = tuple(int(t) for t in tokens)
    except ValueError:
        raise InstanceParseError(f"malformed dim_sizes comment {text!r}", line_number) from None
    if len(dims) != NUM_FEATURES or any(d < 1 for d in dims):
        raise InstanceParseError(f"dim_sizes needs {NUM_FEATURES} positive sizes, got {text!r}", line_number)
    return dims


def _read_table(path: Path) -> pd.Series:
    """Tokens of every physical line, blank and comment lines included, indexed by line number."""
    lines = pd.Series(path.read_text(encoding='utf-8').splitlines(), dtype=object)
    lines.index += 1
    return lines.str.strip().str.split(SEPARATORS, regex=True)


def load_instance(path: Union[str, Path]) -> Instance:
    """Load a delimiter-separated cost table (comma, whitespace or '|')."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"instance file not found: {path}")
    rows: List[LabelRow] = []
    seen = set()
    dim_sizes = None
    for line_number, cells in _read_table(path).items():
        tokens = [t for t in cells if t]
        if not tokens or tokens[0] == HEADER[0]:
            continue
        if tokens[0].startswith('#'):
            if " ".join(tokens).startswith(DIMS_COMMENT):
                dim_sizes = _parse_dims(" ".join(tokens), line_number)
            continue
        row = _parse_row(tokens, line_number)
        pair = (row[0], row[1])
        if pair in seen:
            raise InstanceValidationError(f"line {line_number}: duplicate (from, to) pair {pair}")
        seen.add(pair)
        rows.append(row)

    instance = build_instance(rows, dim_sizes=dim_sizes, label=path.stem)
    logging.info(f"Loaded instance {path.name}: {instance.n_seams} seams, dims {instance.dim_sizes}, "
                 f"{len(instance.costs)} feasible edges")
    return instance


def canonical_rows(instance: Instance) -> List[Tuple]:
    """Cost rows with original seam labels, sorted by the 10 node coordinates."""
    def original(node: Node) -> Tuple[int, ...]:
        label = 0 if node.seam == 0 else instance.seam_ids[node.seam - 1]
        return (label,) + node.features

    rows = [original(a) + original(b) + (value,) for (a, b), value in instance.costs.items()]
    rows.sort(key=lambda row: row[:10])
    return rows


def canonical_text(instance: Instance) -> str:
    lines = [f"{DIMS_COMMENT} " + " ".join(str(d) for d in instance.dim_sizes), ",".join(HEADER)]
    for row in canonical_rows(instance):
        lines.append(",".join(str(v) for v in row[:10]) + f",{row[10]!r}")
    return "\n".join(lines) + "\n"


def save_instance(instance: Instance, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_text(instance), encoding='utf-8')


def cost(instance: Instance, from_node: Node, to_node: Node) -> float:
    return instance.cost(from_node, to_node)


def downsample(instance: Instance, keep: int, seed: int) -> Instance:
    """Keep a uniformly random subset of ``keep`` seams (home always kept)."""
    if not 1 <= keep <= instance.n_seams:
        raise DomainError(f"keep must be in 1..{instance.n_seams}, got {keep}")

    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(instance.n_seams, size=keep, replace=False))
    remap = {0: 0}
    for new_index, old_index in enumerate(chosen):
        remap[int(old_index) + 1] = new_index + 1

    costs: Dict[Edge, float] = {}
    for (a, b), value in instance.costs.items():
        if a.seam in remap and b.seam in remap:
            costs[(a._replace(seam=remap[a.seam]), b._replace(seam=remap[b.seam]))] = value
    if not costs:
        raise InstanceValidationError(f"downsample to {keep} seams left no feasible edges")

    max_cost = max(costs.values())
    return Instance(
        n_seams=keep,
        dim_sizes=instance.dim_sizes,
        costs=costs,
        padding_cost=padding_cost_for(keep, max_cost),
        seam_ids=tuple(instance.seam_ids[int(i)] for i in chosen),
        label=f"{instance.label}-k{keep}-s{seed}",
    )


def downsample_sweep(
    instance: Instance,
    keeps: Iterable[int],
    seeds_per_size: int = 10,
    base_seed: int = 0
) -> List[Tuple[str, Instance]]:
    sweep = []
    for keep in keeps:
        for i in range(seeds_per_size):
            seed = base_seed + i
            sample = downsample(instance, keep, seed)
            sweep.append((sample.label, sample))
    logging.info(f"Down-sampled {len(sweep)} instances from {instance.label or 'instance'}")
    return sweep


def _streams(seed: int) -> Tuple[np.random.Generator, np.random.Generator]:
    geometry, witness = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(geometry), np.random.default_rng(witness)


def witness_tour(params: GeneratorParams) -> List[Node]:
    """The feasible home-anchored tour whose edges generate_synthetic always keeps."""
    _, rng = _streams(params.seed)
    order = rng.permutation(params.n_seams) + 1
    features = [rng.integers(0, d, size=params.n_seams) for d in params.dim_sizes]
    return [Node(int(s), *(int(f[s - 1]) for f in features)) for s in order]


def generate_synthetic(params: GeneratorParams) -> Instance:
    """
    Random instance: seams are 3-D segments, travel is Euclidean at unit speed,
    entering a seam costs its process time scaled per (tool, config, position),
    and switching tool adds a fixed change time. Each cross-seam pair is then
    dropped with probability 1 - feasibility_rate, except the edges of one
    random witness tour, so at least one feasible tour always exists.
    """
    rng, _ = _streams(params.seed)
    n = params.n_seams
    n_d, n_t, n_c, n_p = params.dim_sizes
    scale = params.cost_scale

    starts = rng.uniform(0.0, scale, size=(n, 3))
    ends = rng.uniform(0.0, scale, size=(n, 3))
    process = 0.5 * np.linalg.norm(ends - starts, axis=1) + rng.uniform(0.02, 0.1, size=n) * scale
    jitter = rng.normal(0.0, 0.02 * scale, size=(n, n_d, 3))
    jitter[:, :2, :] = 0.0
    factors = 1.0 + 0.25 * rng.random(size=(n, n_t, n_c, n_p))
    tool_change = 0.05 * scale

    nodes = [HOME]
    for s in range(n):
        for d in range(n_d):
            for t in range(n_t):
                for c in range(n_c):
                    for p in range(n_p):
                        nodes.append(Node(s + 1, d, t, c, p))
    size = len(nodes)

    entry = np.zeros((size, 3))
    exit_ = np.zeros((size, 3))
    proc = np.zeros(size)
    tools = np.zeros(size, dtype=int)
    seams = np.zeros(size, dtype=int)
    for k, node in enumerate(nodes[1:], start=1):
        s = node.seam - 1
        forward = node.direction % 2 == 0
        entry[k] = (starts[s] if forward else ends[s]) + jitter[s, node.direction]
        exit_[k] = (ends[s] if forward else starts[s]) + jitter[s, node.direction]
        proc[k] = process[s] * factors[s, node.tool, node.config, node.position]
        tools[k] = node.tool
        seams[k] = node.seam

    def cost_row(i: int) -> np.ndarray:
        row = np.linalg.norm(entry - exit_[i], axis=1) + proc + tool_change * (tools != tools[i])
        return np.maximum(row, 1e-3)

    position = {node: k for k, node in enumerate(nodes)}
    costs: Dict[Edge, float] = {}
    for i in range(size):
        row = cost_row(i)
        keep = (rng.random(size) < params.feasibility_rate) & (seams != seams[i])
        for j in np.flatnonzero(keep):
            costs[(nodes[i], nodes[j])] = float(row[j])

    witness = [HOME] + witness_tour(params) + [HOME]
    for a, b in zip(witness, witness[1:]):
        if (a, b) not in costs:
            costs[(a, b)] = float(cost_row(position[a])[position[b]])

    max_cost = max(costs.values())
    instance = Instance(
        n_seams=n,
        dim_sizes=params.dim_sizes,
        costs=costs,
        padding_cost=padding_cost_for(n, max_cost),
        seam_ids=tuple(range(1, n + 1)),
        label=f"synthetic-n{n}-s{params.seed}",
    )
    missing = [(a, b) for a, b in zip(witness, witness[1:]) if instance.costs.get((a, b)) is None]
    if missing:
        raise GeneratorError(f"witness tour lost edges {missing[:3]} for seed {params.seed}")
    logging.info(f"Generated {instance.label}: {len(costs)} feasible edges of {size * (size - 1)} pairs")
    return instance
