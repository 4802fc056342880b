"""
Reproducible loss streams for the benchmark harness.

Every stream is drawn up front from ``numpy.random.PCG64(seed)`` so that a
config and a seed determine the trace on every platform. Each round's losses
are multiplied by the scale-jump schedule: the multiplier of the latest listed
round ≤ t applies to round t, and 1 before the first listed round.
"""
import math
from abc import ABC, abstractmethod
from typing import Dict, Optional

import numpy as np

from app.learning.models.domains import Ball, DomainOracle, Simplex
from app.learning.models.observations import Setting

from .config import EnvironmentKind, EnvironmentSpec


def default_scale_jumps(horizon: int) -> Dict[int, float]:
    return {math.ceil(horizon / 3): 10.0, math.ceil(2 * horizon / 3): 100.0}


def scale_multipliers(horizon: int, jumps: Optional[Dict[int, float]]) -> np.ndarray:
    """Per-round multipliers m_1..m_T of a piecewise-constant schedule."""
    multipliers = np.ones(horizon)
    for round_index, multiplier in sorted((jumps or {}).items()):
        if round_index <= horizon:
            multipliers[round_index - 1:] = multiplier
    return multipliers


class Environment(ABC):
    """
    A finite stream of losses over ``spec.horizon`` rounds.

    Experts environments hand out loss vectors; OCO environments hand out the
    gradient at the point the learner played.
    """

    def __init__(self, spec: EnvironmentSpec):
        self.spec = spec
        self.rng = np.random.Generator(np.random.PCG64(spec.seed))
        jumps = spec.scale_jumps
        if jumps is None and spec.kind == EnvironmentKind.SCALE_JUMP:
            jumps = default_scale_jumps(spec.horizon)
        self.multipliers = spec.base_scale * scale_multipliers(spec.horizon, jumps)

    @property
    def horizon(self) -> int:
        return self.spec.horizon

    @property
    def size(self) -> int:
        return self.spec.size

    @property
    @abstractmethod
    def setting(self) -> Setting:
        pass

    @property
    def domain(self) -> Optional[DomainOracle]:
        return None

    @property
    def is_linear(self) -> bool:
        return True

    @abstractmethod
    def observe(self, t: int, point: np.ndarray) -> np.ndarray:
        """Loss vector (experts) or gradient at ``point`` (oco) of round t, 1-based."""
        pass

    @abstractmethod
    def loss(self, t: int, point: np.ndarray) -> float:
        """f_t(point); the mixture loss <point, ℓ_t> for experts."""
        pass

    def _check_round(self, t: int) -> int:
        if not 1 <= t <= self.horizon:
            raise ValueError(f"Round {t} is outside 1..{self.horizon}")
        return t - 1

    def to_dict(self):
        return {**self.spec.model_dump(mode="json"), "setting": self.setting.value}


class ExpertEnvironment(Environment):
    """Experts stream backed by a T×K loss matrix."""

    def __init__(self, spec: EnvironmentSpec):
        super().__init__(spec)
        self.losses = self.multipliers[:, None] * self._draw_losses()

    @abstractmethod
    def _draw_losses(self) -> np.ndarray:
        pass

    @property
    def setting(self) -> Setting:
        return Setting.EXPERTS

    @property
    def loss_range(self) -> float:
        """max_t (max_k ℓ_{t,k} − min_k ℓ_{t,k})."""
        return float(np.max(self.losses.max(axis=1) - self.losses.min(axis=1)))

    def observe(self, t: int, point: np.ndarray) -> np.ndarray:
        return self.losses[self._check_round(t)].copy()

    def loss(self, t: int, point: np.ndarray) -> float:
        return float(np.asarray(point, dtype=float) @ self.losses[self._check_round(t)])

    def cumulative_losses(self, rounds: Optional[int] = None) -> np.ndarray:
        rounds = self.horizon if rounds is None else rounds
        return self.losses[:rounds].sum(axis=0)


class ScaleJumpExperts(ExpertEnvironment):
    """Uniform losses in [0, 1]; expert 0 is shrunk by (1 − bias)."""

    def _draw_losses(self) -> np.ndarray:
        losses = self.rng.uniform(0.0, 1.0, size=(self.horizon, self.size))
        losses[:, 0] *= 1.0 - self.spec.bias
        return losses


class BernoulliExperts(ExpertEnvironment):
    """Bernoulli losses with means evenly spread over [½ − bias, ½ + bias]."""

    def _draw_losses(self) -> np.ndarray:
        means = np.linspace(0.5 - self.spec.bias, 0.5 + self.spec.bias, self.size)
        return (self.rng.uniform(0.0, 1.0, size=(self.horizon, self.size)) < means).astype(float)


class LinearEnvironment(Environment):
    """Linear losses f_t(w) = <g_t, w> on a fixed domain."""

    def __init__(self, spec: EnvironmentSpec):
        super().__init__(spec)
        self.gradients = self.multipliers[:, None] * self._draw_gradients()

    @abstractmethod
    def _draw_gradients(self) -> np.ndarray:
        pass

    @property
    def setting(self) -> Setting:
        return Setting.OCO

    def observe(self, t: int, point: np.ndarray) -> np.ndarray:
        return self.gradients[self._check_round(t)].copy()

    def loss(self, t: int, point: np.ndarray) -> float:
        return float(self.gradients[self._check_round(t)] @ np.asarray(point, dtype=float))

    def cumulative_gradient(self, rounds: Optional[int] = None) -> np.ndarray:
        rounds = self.horizon if rounds is None else rounds
        return self.gradients[:rounds].sum(axis=0)


class AdversarialSigns(LinearEnvironment):
    """Random sign gradients ±1/√d, each coordinate +1 with probability ½ + bias."""

    def __init__(self, spec: EnvironmentSpec):
        self._domain = Ball(spec.size, spec.radius)
        super().__init__(spec)

    @property
    def domain(self) -> DomainOracle:
        return self._domain

    def _draw_gradients(self) -> np.ndarray:
        positive = self.rng.uniform(0.0, 1.0, size=(self.horizon, self.size)) < 0.5 + self.spec.bias
        return np.where(positive, 1.0, -1.0) / math.sqrt(self.size)


class SimplexLinear(LinearEnvironment):
    """Nonnegative losses U[0, 1] + bias on every coordinate but the first."""

    def __init__(self, spec: EnvironmentSpec):
        self._domain = Simplex(spec.size)
        super().__init__(spec)

    @property
    def domain(self) -> DomainOracle:
        return self._domain

    def _draw_gradients(self) -> np.ndarray:
        gradients = self.rng.uniform(0.0, 1.0, size=(self.horizon, self.size))
        gradients[:, 1:] += self.spec.bias
        return gradients


class BernsteinQuadratic(Environment):
    """
    f_t(w) = (m_t/2)·‖w − x_t‖² on the ball, x_t = μ + noise.

    μ has norm radius/2 along the diagonal and every noise coordinate is
    uniform in ±radius/(2√d), so x_t stays inside the ball. Strong convexity
    makes the stream satisfy the Bernstein condition.
    """

    def __init__(self, spec: EnvironmentSpec):
        super().__init__(spec)
        self._domain = Ball(spec.size, spec.radius)
        half_width = 0.5 * spec.radius / math.sqrt(spec.size)
        self.mean = np.full(spec.size, half_width)
        self.targets = self.mean + self.rng.uniform(-half_width, half_width, size=(self.horizon, self.size))

    @property
    def setting(self) -> Setting:
        return Setting.OCO

    @property
    def domain(self) -> DomainOracle:
        return self._domain

    @property
    def is_linear(self) -> bool:
        return False

    def observe(self, t: int, point: np.ndarray) -> np.ndarray:
        index = self._check_round(t)
        return self.multipliers[index] * (np.asarray(point, dtype=float) - self.targets[index])

    def loss(self, t: int, point: np.ndarray) -> float:
        index = self._check_round(t)
        offset = np.asarray(point, dtype=float) - self.targets[index]
        return 0.5 * float(self.multipliers[index]) * float(offset @ offset)

    def sum_gradient(self, point: np.ndarray, rounds: Optional[int] = None) -> np.ndarray:
        """∇ Σ_{t≤rounds} f_t at ``point``."""
        rounds = self.horizon if rounds is None else rounds
        weights = self.multipliers[:rounds]
        return weights.sum() * np.asarray(point, dtype=float) - weights @ self.targets[:rounds]

    def smoothness(self, rounds: Optional[int] = None) -> float:
        rounds = self.horizon if rounds is None else rounds
        return float(self.multipliers[:rounds].sum())


ENVIRONMENTS = {
    EnvironmentKind.ADVERSARIAL_SIGNS: AdversarialSigns,
    EnvironmentKind.SCALE_JUMP: ScaleJumpExperts,
    EnvironmentKind.IID_BERNSTEIN_QUADRATIC: BernsteinQuadratic,
    EnvironmentKind.EXPERT_BERNOULLI: BernoulliExperts,
    EnvironmentKind.SIMPLEX_LINEAR: SimplexLinear,
}


def build_environment(spec: EnvironmentSpec) -> Environment:
    return ENVIRONMENTS[spec.kind](spec)
