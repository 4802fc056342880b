"""
Running a ball learner on an arbitrary bounded convex domain.

The inner learner works on the ball centred at the domain's centre whose
diameter is that of the domain's enclosing ball; its coordinates are offsets
from that centre. Each round the outer learner plays the Euclidean projection
of the inner prediction and feeds back ½(g̊ + ‖g̊‖·s) with s a subgradient of
the distance to the domain at the inner prediction.
"""
from dataclasses import replace
from typing import Any, Dict, Tuple

import numpy as np

from app.learning.models.domains import DomainOracle
from app.learning.models.observations import Setting, as_gradient

from .base import LearnerConfig, OnlineLearner, RoundDiagnostics
from .metagrad_c import MetaGradC
from .restart import InnerKind, RestartSupervisor


def surrogate_gradient(domain: DomainOracle, inner_point: np.ndarray, true_gradient: np.ndarray) -> np.ndarray:
    subgradient = domain.distance_subgradient(inner_point)
    return 0.5 * (true_gradient + float(np.linalg.norm(true_gradient)) * subgradient)


def surrogate_loss(domain: DomainOracle, true_gradient: np.ndarray, point: np.ndarray) -> float:
    """ℓ̊(u) = ½(<g̊, u> + ‖g̊‖·d(u))."""
    return 0.5 * (float(true_gradient @ point) + float(np.linalg.norm(true_gradient)) * domain.distance(point))


def reduce_to_ball_round(
    domain: DomainOracle, inner: OnlineLearner, true_gradient: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Play one reduced round.

    ``true_gradient`` must have been evaluated at the returned played point.
    Returns (played point, surrogate gradient fed to ``inner``).
    """
    inner_point = domain.center + inner.predict()
    played = domain.project(inner_point)
    gradient = surrogate_gradient(domain, inner_point, true_gradient)
    inner.update(gradient)
    return played, gradient


class BallReduction(OnlineLearner):
    """MetaGrad+C or MetaGrad+L on ``config.domain`` through the enclosing ball."""

    def __init__(self, config: LearnerConfig, inner_algorithm: str = "metagrad+c"):
        if config.domain is None:
            raise ValueError("the reduction needs a domain")
        if inner_algorithm not in {"metagrad+c", "metagrad+l"}:
            raise ValueError(f"Unsupported inner algorithm for the reduction: {inner_algorithm}")
        self.inner_algorithm = inner_algorithm
        super().__init__(config)
        self._require_setting(Setting.OCO)
        if config.domain.dimension != config.size:
            raise ValueError(f"Domain dimension {config.domain.dimension} does not match size {config.size}")
        self.domain = config.domain
        self.inner = self._new_inner()

    def _new_inner(self) -> OnlineLearner:
        config = replace(self.config, domain=None, diameter=self.config.domain.diameter)
        if self.inner_algorithm == "metagrad+l":
            return RestartSupervisor(config, InnerKind.METAGRAD)
        return MetaGradC(config)

    @property
    def learner_type(self) -> str:
        return f"{self.inner_algorithm}-reduced"

    def inner_point(self) -> np.ndarray:
        return self.domain.center + self.inner.predict()

    def predict(self) -> np.ndarray:
        return self.domain.project(self.inner_point())

    def update(self, observation: np.ndarray) -> np.ndarray:
        true_gradient = as_gradient(observation, self.size)
        played, _ = reduce_to_ball_round(self.domain, self.inner, true_gradient)
        self.ledger.record(played, true_gradient, 1.0)
        return self.predict()

    def reset(self) -> None:
        self.inner = self._new_inner()
        self.ledger = type(self.ledger)(self.setting, self.size)

    def diagnostics(self, with_potential: bool = False) -> RoundDiagnostics:
        return self.inner.diagnostics(with_potential)

    def to_dict(self) -> Dict[str, Any]:
        return {**super().to_dict(), "domain": self.domain.to_dict(), "inner": self.inner.to_dict()}
