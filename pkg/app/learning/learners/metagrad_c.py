from typing import Any, Dict, Optional

import numpy as np

from app.learning.models.metagrad import MetaGradState, metagrad_potential, metagrad_round
from app.learning.models.observations import Setting
from app.learning.models.projection import BallProjector

from .base import LearnerConfig, OnlineLearner, RoundDiagnostics


class MetaGradC(OnlineLearner):
    """MetaGrad with clipped gradients on the centred ball of diameter D."""

    def __init__(self, config: LearnerConfig, projector: Optional[BallProjector] = None):
        super().__init__(config)
        self._require_setting(Setting.OCO)
        if config.initial_scale is None:
            raise ValueError("metagrad+c needs an initial scale")
        self._projector = projector if projector is not None else BallProjector(config.diameter)
        self.state = self._fresh_state()

    def _fresh_state(self) -> MetaGradState:
        return MetaGradState.create(
            self.size, self.config.diameter, self.config.initial_scale, self._projector
        )

    @property
    def learner_type(self) -> str:
        return "metagrad+c"

    def predict(self) -> np.ndarray:
        return self.state.prediction.copy()

    def update(self, observation: np.ndarray) -> np.ndarray:
        return metagrad_round(self.state, observation, self.ledger).copy()

    def reset(self) -> None:
        self.state = self._fresh_state()
        self.ledger = type(self.ledger)(self.setting, self.size)

    def diagnostics(self, with_potential: bool = False) -> RoundDiagnostics:
        return RoundDiagnostics(
            magnitude=self.state.scale.last_observed,
            scale=self.state.scale.current_max,
            active_slaves=len(self.state.active),
            potential=metagrad_potential(self.state),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {**super().to_dict(), "state": self.state.to_dict()}
