from typing import Any, Dict

import numpy as np

from app.learning.models.observations import Setting
from app.learning.models.squint import SquintState, squint_potential, squint_round

from .base import LearnerConfig, OnlineLearner, RoundDiagnostics


class SquintC(OnlineLearner):
    """Squint with clipped losses and a known input scale B."""

    def __init__(self, config: LearnerConfig):
        super().__init__(config)
        self._require_setting(Setting.EXPERTS)
        if config.initial_scale is None:
            raise ValueError("squint+c needs an initial scale")
        self.state = SquintState.create(config.size, config.initial_scale, self._uniform_prior())

    @property
    def learner_type(self) -> str:
        return "squint+c"

    def predict(self) -> np.ndarray:
        return self.state.prediction.copy()

    def update(self, observation: np.ndarray) -> np.ndarray:
        return squint_round(self.state, observation, self.ledger).copy()

    def reset(self) -> None:
        self.state = SquintState.create(self.size, self.config.initial_scale, self._uniform_prior())
        self.ledger = type(self.ledger)(self.setting, self.size)

    def diagnostics(self, with_potential: bool = False) -> RoundDiagnostics:
        return RoundDiagnostics(
            magnitude=self.state.scale.last_observed,
            scale=self.state.scale.current_max,
            potential=squint_potential(self.state) if with_potential else None,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {**super().to_dict(), "state": self.state.to_dict()}
