from abc import ABC, abstractmethod
from typing import Any, Dict, Optional, Sequence

import numpy as np

from .errors import DimensionMismatchError

DISTANCE_TOLERANCE = 1e-10


class DomainOracle(ABC):
    """
    A bounded convex prediction domain.

    Subclasses supply the Euclidean projection and the exact minimizer of a
    linear function; distance and its subgradient follow from the projection.
    ``center`` and ``enclosing_radius`` describe the smallest ball around the
    centre that contains the domain.
    """

    def __init__(self, dimension: int):
        if dimension < 1:
            raise ValueError(f"Dimension must be at least 1, got {dimension}")
        self.dimension = dimension

    @property
    @abstractmethod
    def kind(self) -> str:
        pass

    @property
    @abstractmethod
    def center(self) -> np.ndarray:
        pass

    @property
    @abstractmethod
    def enclosing_radius(self) -> float:
        pass

    @property
    def diameter(self) -> float:
        """Diameter of the enclosing ball."""
        return 2.0 * self.enclosing_radius

    @abstractmethod
    def project(self, point: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def linear_minimizer(self, gradient: np.ndarray) -> np.ndarray:
        """argmin over the domain of <gradient, u>."""
        pass

    def _check(self, point: np.ndarray) -> np.ndarray:
        point = np.asarray(point, dtype=float)
        if point.size != self.dimension:
            raise DimensionMismatchError(self.dimension, point.size, "point")
        return point

    def distance(self, point: np.ndarray) -> float:
        point = self._check(point)
        return float(np.linalg.norm(point - self.project(point)))

    def contains(self, point: np.ndarray, tolerance: float = DISTANCE_TOLERANCE) -> bool:
        return self.distance(point) <= tolerance

    def distance_subgradient(self, point: np.ndarray) -> np.ndarray:
        """(u − Π(u))/‖u − Π(u)‖ outside the domain, zero inside."""
        point = self._check(point)
        offset = point - self.project(point)
        norm = float(np.linalg.norm(offset))
        if norm <= DISTANCE_TOLERANCE:
            return np.zeros(self.dimension)
        return offset / norm

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "dimension": self.dimension}


class Ball(DomainOracle):
    def __init__(self, dimension: int, radius: float = 1.0, center: Optional[Sequence[float]] = None):
        super().__init__(dimension)
        if not radius > 0:
            raise ValueError(f"Radius must be positive, got {radius}")
        self.radius = float(radius)
        self._center = np.zeros(dimension) if center is None else self._check(center).copy()

    @property
    def kind(self) -> str:
        return "ball"

    @property
    def center(self) -> np.ndarray:
        return self._center

    @property
    def enclosing_radius(self) -> float:
        return self.radius

    def project(self, point: np.ndarray) -> np.ndarray:
        point = self._check(point)
        offset = point - self._center
        norm = float(np.linalg.norm(offset))
        if norm <= self.radius:
            return point.copy()
        return self._center + offset * (self.radius / norm)

    def distance(self, point: np.ndarray) -> float:
        point = self._check(point)
        return max(0.0, float(np.linalg.norm(point - self._center)) - self.radius)

    def linear_minimizer(self, gradient: np.ndarray) -> np.ndarray:
        gradient = self._check(gradient)
        norm = float(np.linalg.norm(gradient))
        if norm == 0.0:
            return self._center.copy()
        return self._center - gradient * (self.radius / norm)

    def to_dict(self) -> Dict[str, Any]:
        return {**super().to_dict(), "radius": self.radius, "center": self._center.tolist()}


class Box(DomainOracle):
    def __init__(self, lower: Sequence[float], upper: Sequence[float]):
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        super().__init__(lower.size)
        if upper.size != lower.size:
            raise DimensionMismatchError(lower.size, upper.size, "upper bound")
        if np.any(upper < lower):
            raise ValueError(f"Box bounds are inverted: lower {lower.tolist()}, upper {upper.tolist()}")
        self.lower = lower
        self.upper = upper

    @property
    def kind(self) -> str:
        return "box"

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def enclosing_radius(self) -> float:
        return float(np.linalg.norm(0.5 * (self.upper - self.lower)))

    def project(self, point: np.ndarray) -> np.ndarray:
        return np.clip(self._check(point), self.lower, self.upper)

    def linear_minimizer(self, gradient: np.ndarray) -> np.ndarray:
        gradient = self._check(gradient)
        return np.where(gradient > 0, self.lower, self.upper)

    def to_dict(self) -> Dict[str, Any]:
        return {**super().to_dict(), "lower": self.lower.tolist(), "upper": self.upper.tolist()}


def euclidean_proj_simplex(v: np.ndarray, s: float = 1.0) -> np.ndarray:
    """
    Euclidean projection onto {w : Σ w_i = s, w_i ≥ 0} by sorting, O(n log n).
    """
    n = v.size
    if v.sum() == s and np.all(v >= 0):
        return v.copy()
    u = np.sort(v)[::-1]
    cssv = np.cumsum(u)
    rho = np.nonzero(u * np.arange(1, n + 1) > (cssv - s))[0][-1]
    theta = (cssv[rho] - s) / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


class Simplex(DomainOracle):
    """The probability simplex in R^d."""

    def __init__(self, dimension: int):
        super().__init__(dimension)
        if dimension < 2:
            raise ValueError(f"Simplex needs at least 2 coordinates, got {dimension}")

    @property
    def kind(self) -> str:
        return "simplex"

    @property
    def center(self) -> np.ndarray:
        return np.full(self.dimension, 1.0 / self.dimension)

    @property
    def enclosing_radius(self) -> float:
        # distance from the barycentre to a vertex
        return float(np.sqrt((self.dimension - 1) / self.dimension))

    def project(self, point: np.ndarray) -> np.ndarray:
        return euclidean_proj_simplex(self._check(point))

    def linear_minimizer(self, gradient: np.ndarray) -> np.ndarray:
        vertex = np.zeros(self.dimension)
        vertex[int(np.argmin(self._check(gradient)))] = 1.0
        return vertex


def build_domain(kind: str, dimension: int, radius: float = 1.0) -> DomainOracle:
    if kind == "ball":
        return Ball(dimension, radius)
    if kind == "box":
        return Box(-radius * np.ones(dimension), radius * np.ones(dimension))
    if kind == "simplex":
        return Simplex(dimension)
    raise ValueError(f"Unknown domain kind: {kind}")
