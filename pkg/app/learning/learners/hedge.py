import math
from typing import Any, Dict

import numpy as np
from scipy import special

from app.learning.models.observations import Setting, as_loss_vector
from app.learning.models.scale import CompensatedSum, ScaleTracker

from .base import LearnerConfig, OnlineLearner, RoundDiagnostics


class Hedge(OnlineLearner):
    """
    Exponential weights with the fixed rate √(8 ln K / T) / L.

    Needs the horizon T and a loss range L up front; with the true range this
    is the classical tuning with regret at most L·√(T/2 · ln K).
    """

    def __init__(self, config: LearnerConfig):
        super().__init__(config)
        self._require_setting(Setting.EXPERTS)
        if config.horizon is None or config.horizon < 1:
            raise ValueError(f"hedge needs a positive horizon, got {config.horizon}")
        if config.loss_range is None or not config.loss_range > 0:
            raise ValueError(f"hedge needs a positive loss range, got {config.loss_range}")
        self.learning_rate = math.sqrt(8.0 * math.log(config.size) / config.horizon) / config.loss_range
        self._start()

    def _start(self) -> None:
        self.log_prior = np.log(self._uniform_prior())
        self.cumulative_loss = CompensatedSum(np.zeros(self.size))
        self.tracker = ScaleTracker()

    @property
    def learner_type(self) -> str:
        return "hedge"

    def predict(self) -> np.ndarray:
        return special.softmax(self.log_prior - self.learning_rate * self.cumulative_loss.value)

    def update(self, observation: np.ndarray) -> np.ndarray:
        loss = as_loss_vector(observation, self.size)
        played = self.predict()
        self.tracker.observe_scale(float(np.max(np.abs(float(played @ loss) - loss))))
        self.ledger.record(played, loss, 1.0)
        self.cumulative_loss.add(loss)
        return self.predict()

    def reset(self) -> None:
        self._start()
        self.ledger = type(self.ledger)(self.setting, self.size)

    def diagnostics(self, with_potential: bool = False) -> RoundDiagnostics:
        return RoundDiagnostics(magnitude=self.tracker.last_observed, scale=self.tracker.current_max)

    def to_dict(self) -> Dict[str, Any]:
        return {**super().to_dict(), "learning_rate": self.learning_rate, "loss_range": self.config.loss_range}
