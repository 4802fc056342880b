import math
from typing import Any, Dict

import numpy as np

from app.learning.models.domains import Ball
from app.learning.models.observations import Setting, as_gradient
from app.learning.models.scale import CompensatedSum, ScaleTracker

from .base import LearnerConfig, OnlineLearner, RoundDiagnostics


class OGDAdaNorm(OnlineLearner):
    """
    Projected online gradient descent with η_t = D / √(2 Σ_{s≤t} ‖g_s‖²).

    No step is taken while every gradient so far has been zero.
    """

    def __init__(self, config: LearnerConfig):
        super().__init__(config)
        self._require_setting(Setting.OCO)
        self.domain = config.domain if config.domain is not None else Ball(config.size, 0.5 * config.diameter)
        self._start()

    def _start(self) -> None:
        self.point = self.domain.center.copy()
        self.squared_norms = CompensatedSum()
        self.tracker = ScaleTracker()

    @property
    def learner_type(self) -> str:
        return "ogd-adanorm"

    @property
    def diameter(self) -> float:
        return self.domain.diameter

    def predict(self) -> np.ndarray:
        return self.point.copy()

    def update(self, observation: np.ndarray) -> np.ndarray:
        gradient = as_gradient(observation, self.size)
        norm = float(np.linalg.norm(gradient))
        self.tracker.observe_scale(self.diameter * norm)
        self.ledger.record(self.point, gradient, 1.0)
        self.squared_norms.add(norm * norm)
        if self.squared_norms.value > 0:
            step = self.diameter / math.sqrt(2.0 * self.squared_norms.value)
            self.point = self.domain.project(self.point - step * gradient)
        return self.predict()

    def reset(self) -> None:
        self._start()
        self.ledger = type(self.ledger)(self.setting, self.size)

    def diagnostics(self, with_potential: bool = False) -> RoundDiagnostics:
        return RoundDiagnostics(magnitude=self.tracker.last_observed, scale=self.tracker.current_max)

    def to_dict(self) -> Dict[str, Any]:
        return {**super().to_dict(), "domain": self.domain.to_dict(), "sum_squared_norms": self.squared_norms.value}
