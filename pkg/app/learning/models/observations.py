from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ComparatorError, DimensionMismatchError, ObservationError

ArrayLike = Union[Sequence[float], np.ndarray]

DISTRIBUTION_TOLERANCE = 1e-12
DOMAIN_TOLERANCE = 1e-9


class Setting(str, Enum):
    EXPERTS = "experts"
    OCO = "oco"


def _as_finite_vector(values: ArrayLike, what: str) -> np.ndarray:
    vector = np.asarray(values, dtype=float)
    if vector.ndim != 1:
        raise ObservationError(f"{what} must be a 1-d vector, got shape {vector.shape}")
    if not np.all(np.isfinite(vector)):
        raise ObservationError(f"{what} has non-finite entries: {vector.tolist()}")
    return vector


def as_loss_vector(values: ArrayLike, num_experts: Optional[int] = None) -> np.ndarray:
    """Validate an expert loss vector and return it as a float array."""
    losses = _as_finite_vector(values, "loss vector")
    if losses.size < 2:
        raise ObservationError(f"need at least 2 experts, got {losses.size}")
    if num_experts is not None and losses.size != num_experts:
        raise DimensionMismatchError(num_experts, losses.size, "loss vector")
    return losses


def as_gradient(values: ArrayLike, dimension: Optional[int] = None) -> np.ndarray:
    """Validate a gradient and return it as a float array."""
    gradient = _as_finite_vector(values, "gradient")
    if gradient.size < 1:
        raise ObservationError("gradient must have at least one entry")
    if dimension is not None and gradient.size != dimension:
        raise DimensionMismatchError(dimension, gradient.size, "gradient")
    return gradient


def as_observation(values: ArrayLike, setting: Setting, size: int) -> np.ndarray:
    if setting == Setting.EXPERTS:
        return as_loss_vector(values, size)
    return as_gradient(values, size)


class ComparatorKind(str, Enum):
    EXPERT = "expert"
    DISTRIBUTION = "distribution"
    POINT = "point"


@dataclass(frozen=True)
class ComparatorSpec:
    """A fixed comparator: a single expert, a distribution over experts, or a point."""
    kind: ComparatorKind
    vector: np.ndarray
    expert: Optional[int] = None

    @classmethod
    def single_expert(cls, index: int, num_experts: int) -> "ComparatorSpec":
        if not 0 <= index < num_experts:
            raise ComparatorError(f"expert index {index} out of range for {num_experts} experts")
        vector = np.zeros(num_experts)
        vector[index] = 1.0
        return cls(ComparatorKind.EXPERT, vector, expert=index)

    @classmethod
    def distribution(cls, weights: ArrayLike) -> "ComparatorSpec":
        vector = np.asarray(weights, dtype=float)
        if vector.ndim != 1 or np.any(vector < 0) or not np.all(np.isfinite(vector)):
            raise ComparatorError(f"distribution must be a nonnegative vector, got {vector.tolist()}")
        if abs(vector.sum() - 1.0) > DISTRIBUTION_TOLERANCE:
            raise ComparatorError(f"distribution sums to {vector.sum()!r}, not 1")
        return cls(ComparatorKind.DISTRIBUTION, vector)

    @classmethod
    def uniform(cls, num_experts: int) -> "ComparatorSpec":
        return cls(ComparatorKind.DISTRIBUTION, np.full(num_experts, 1.0 / num_experts))

    @classmethod
    def point(cls, u: ArrayLike, domain=None) -> "ComparatorSpec":
        vector = np.asarray(u, dtype=float)
        if vector.ndim != 1 or not np.all(np.isfinite(vector)):
            raise ComparatorError(f"comparator point must be a finite vector, got {vector.tolist()}")
        if domain is not None and domain.distance(vector) > DOMAIN_TOLERANCE:
            raise ComparatorError(
                f"comparator point lies {domain.distance(vector):.3e} outside the domain"
            )
        return cls(ComparatorKind.POINT, vector)

    @property
    def size(self) -> int:
        return int(self.vector.size)

    @property
    def label(self) -> str:
        if self.kind == ComparatorKind.EXPERT:
            return f"expert-{self.expert}"
        return self.kind.value
