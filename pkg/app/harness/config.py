import json
from enum import Enum
from typing import Dict, Optional

from pydantic import BaseModel, Field, field_validator, model_validator


class EnvironmentKind(str, Enum):
    ADVERSARIAL_SIGNS = "adversarial-signs"
    SCALE_JUMP = "scale-jump"
    IID_BERNSTEIN_QUADRATIC = "iid-bernstein-quadratic"
    EXPERT_BERNOULLI = "expert-bernoulli"
    SIMPLEX_LINEAR = "simplex-linear"


EXPERT_KINDS = {EnvironmentKind.SCALE_JUMP, EnvironmentKind.EXPERT_BERNOULLI}


class Algorithm(str, Enum):
    SQUINT_C = "squint+c"
    SQUINT_L = "squint+l"
    METAGRAD_C = "metagrad+c"
    METAGRAD_L = "metagrad+l"
    METAGRAD_C_REDUCED = "metagrad+c-reduced"
    METAGRAD_L_REDUCED = "metagrad+l-reduced"
    HEDGE = "hedge"
    OGD_ADANORM = "ogd-adanorm"


EXPERT_ALGORITHMS = {Algorithm.SQUINT_C, Algorithm.SQUINT_L, Algorithm.HEDGE}
CLIPPED_ALGORITHMS = {Algorithm.SQUINT_C, Algorithm.METAGRAD_C, Algorithm.METAGRAD_C_REDUCED}


class EnvironmentSpec(BaseModel):
    """A reproducible loss stream."""
    kind: EnvironmentKind
    size: int = Field(ge=1, description="Number of experts K, or dimension d")
    horizon: int = Field(ge=1, description="Number of rounds T")
    seed: int = Field(default=0, ge=0, description="Seed of the PCG64 generator")
    scale_jumps: Optional[Dict[int, float]] = Field(
        default=None,
        description="Map of round to loss multiplier; the latest listed round <= t applies to round t",
    )
    base_scale: float = Field(default=1.0, gt=0, description="Overall loss multiplier")
    radius: float = Field(default=1.0, gt=0, description="Radius of the ball domain")
    bias: float = Field(default=0.1, ge=0.0, le=0.5, description="Advantage of the best expert or direction")

    @field_validator("scale_jumps")
    @classmethod
    def _check_jumps(cls, jumps: Optional[Dict[int, float]]) -> Optional[Dict[int, float]]:
        if jumps is None:
            return None
        for round_index, multiplier in jumps.items():
            if round_index < 1:
                raise ValueError(f"scale jump rounds start at 1, got {round_index}")
            if not multiplier > 0:
                raise ValueError(f"scale jump multipliers must be positive, got {multiplier}")
        return dict(sorted(jumps.items()))

    @model_validator(mode="after")
    def _check_size(self) -> "EnvironmentSpec":
        if (self.kind in EXPERT_KINDS or self.kind == EnvironmentKind.SIMPLEX_LINEAR) and self.size < 2:
            raise ValueError(f"{self.kind.value} needs size >= 2, got {self.size}")
        return self

    @property
    def is_experts(self) -> bool:
        return self.kind in EXPERT_KINDS


class Tolerances(BaseModel):
    bound: float = Field(default=1e-9, ge=0, description="Allowed negative slack of the regret bounds")
    potential: float = Field(default=1e-9, ge=0)
    clipping: float = Field(default=1e-9, ge=0)
    ball: float = Field(default=1e-10, ge=0)
    hedge: float = Field(default=0.1, ge=0, description="Relative tolerance of the classical Hedge bound")


class ExperimentConfig(BaseModel):
    """One learner on one environment."""
    name: str
    algorithm: Algorithm
    environment: EnvironmentSpec
    initial_scale: Optional[float] = Field(default=None, gt=0, description="Input scale B of the clipped variants")
    hedge_range: Optional[float] = Field(
        default=None, gt=0, description="Loss range given to Hedge; the true range when omitted"
    )
    track_potential: bool = Field(default=False, description="Evaluate the potential every round")
    random_comparators: int = Field(
        default=20, ge=0, description="Random domain points scored next to the offline comparator in OCO runs"
    )
    tolerances: Tolerances = Field(default_factory=Tolerances)

    @model_validator(mode="after")
    def _check_scale(self) -> "ExperimentConfig":
        if self.algorithm in CLIPPED_ALGORITHMS and self.initial_scale is None:
            raise ValueError(f"{self.algorithm.value} needs initial_scale")
        return self

    @property
    def label(self) -> str:
        if self.algorithm == Algorithm.HEDGE and self.hedge_range is None:
            return "hedge-oracle"
        return self.algorithm.value

    def with_seed(self, seed: int) -> "ExperimentConfig":
        environment = self.environment.model_copy(update={"seed": seed})
        return self.model_copy(update={"environment": environment})


def load_config(path: str) -> ExperimentConfig:
    """Load and validate an experiment config from a JSON file."""
    with open(path, "r") as f:
        return ExperimentConfig.model_validate(json.load(f))
