from pathlib import Path
from typing import Any, Dict, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

SolverName = Literal["brkga", "da", "greedy", "qubo-sa"]


class BrkgaParams(BaseModel):
    """BRKGA hyperparameters.

    Config files use the hyperparameter table column names
    (elite_percentage, mutants_percentage, num_generations, ...); the
    descriptive field names are accepted as well.
    """
    model_config = ConfigDict(populate_by_name=True, extra='forbid')

    population_size: int = Field(default=200, ge=2)
    elite_fraction: float = Field(default=0.2, gt=0.0, lt=0.5, alias='elite_percentage')
    mutant_fraction: float = Field(default=0.15, ge=0.0, lt=1.0, alias='mutants_percentage')
    elite_inherit_prob: float = Field(default=0.7, gt=0.5, le=1.0)
    total_parents: int = Field(default=2, ge=2)
    num_elite_parents: int = Field(default=1, ge=1)
    max_generations: int = Field(default=200, ge=0, alias='num_generations')
    patience: Optional[int] = Field(default=None, ge=1)
    max_restarts: int = Field(default=0, ge=0)
    seed: int = 0

    @model_validator(mode='after')
    def check_bounds(self) -> 'BrkgaParams':
        if self.num_elite_parents >= self.total_parents:
            raise ValueError(
                f"num_elite_parents ({self.num_elite_parents}) must be < total_parents ({self.total_parents})"
            )
        if self.n_elite + self.n_mutants > self.population_size:
            raise ValueError(
                f"elite ({self.n_elite}) + mutants ({self.n_mutants}) exceed population_size ({self.population_size})"
            )
        return self

    @property
    def n_elite(self) -> int:
        return max(1, int(self.population_size * self.elite_fraction))

    @property
    def n_mutants(self) -> int:
        return int(self.population_size * self.mutant_fraction)

    @property
    def n_offspring(self) -> int:
        return self.population_size - self.n_elite - self.n_mutants


class DaParams(BaseModel):
    """Dual-annealing hyperparameters (maxiter, seed, visit, accept, initial_temp, restart_temp_ratio)."""
    model_config = ConfigDict(populate_by_name=True, extra='forbid')

    maxiter: int = Field(default=1000, ge=1)
    q_v: float = Field(default=2.62, gt=1.0, lt=3.0, alias='visit')
    q_a: float = Field(default=-5.0, lt=1.0, alias='accept')
    initial_temp: float = Field(default=5230.0, gt=0.0)
    restart_temp_ratio: float = Field(default=2e-5, gt=0.0, lt=1.0)
    local_search_budget: int = Field(default=20, ge=0)
    local_search_step: float = Field(default=0.25, gt=0.0, le=0.5)
    seed: int = 0


class GreedyParams(BaseModel):
    model_config = ConfigDict(extra='forbid')

    shots: int = Field(default=10_000, ge=1)
    seed: int = 0


class GeneratorParams(BaseModel):
    """Synthetic instance parameters. Geometry: seams are 3-D segments in a cube
    of side ``cost_scale`` travelled at unit speed."""
    model_config = ConfigDict(extra='forbid')

    n_seams: int = Field(ge=1)
    dim_sizes: Tuple[int, int, int, int] = (2, 2, 2, 2)
    feasibility_rate: float = Field(default=0.8, gt=0.0, le=1.0)
    cost_scale: float = Field(default=10.0, gt=0.0)
    seed: int = Field(default=0, ge=0, lt=2 ** 64)

    @model_validator(mode='after')
    def check_dims(self) -> 'GeneratorParams':
        if any(d < 1 for d in self.dim_sizes):
            raise ValueError(f"dim_sizes must all be >= 1, got {self.dim_sizes}")
        return self


class QuboParams(BaseModel):
    model_config = ConfigDict(extra='forbid')

    penalty: Optional[float] = Field(default=None, gt=0.0)
    max_vars: int = Field(default=50_000, ge=1)
    sweeps: int = Field(default=1000, ge=0)
    t_start: Optional[float] = Field(default=None, gt=0.0)
    t_end: Optional[float] = Field(default=None, gt=0.0)
    seed: int = 0


class WarmstartSpec(BaseModel):
    """Greedy stage run before an RKO solver; its best distinct tours seed the population."""
    model_config = ConfigDict(extra='forbid')

    shots: int = Field(default=1000, ge=1)
    pool_size: int = Field(default=100, ge=1)
    seed: int = 0


class SolverSpec(BaseModel):
    """A solver choice plus its raw params, as used by solve, ttt and sweep."""
    model_config = ConfigDict(extra='forbid')

    solver: SolverName
    params: Dict[str, Any] = Field(default_factory=dict)
    label: Optional[str] = None
    warmstart: Optional[WarmstartSpec] = None

    @model_validator(mode='after')
    def check_warmstart(self) -> 'SolverSpec':
        if self.warmstart is not None and self.solver not in ("brkga", "da"):
            raise ValueError(f"warmstart applies to brkga and da, not {self.solver!r}")
        return self

    @property
    def solver_id(self) -> str:
        return self.label or self.solver


class RunConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    subcommand: str
    instance_path: Optional[Path] = None
    generator: Optional[GeneratorParams] = None
    solver: SolverName = "brkga"
    params_path: Optional[Path] = None
    warmstart_path: Optional[Path] = None
    output_dir: Path = Path(".")
    seed: Optional[int] = None
    workers: int = Field(default=1, ge=1)
    shots: Optional[int] = Field(default=None, ge=1)
    pool_out: Optional[Path] = None
    pool_size: int = Field(default=100, ge=1)

    @model_validator(mode='after')
    def check_instance_source(self) -> 'RunConfig':
        if (self.instance_path is None) == (self.generator is None):
            raise ValueError("exactly one instance source is required: --instance or generator params")
        return self
