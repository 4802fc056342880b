import logging
from dataclasses import asdict, dataclass, replace
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np

from app.learning.models.observations import Setting, as_observation
from app.learning.models.scale import ScaleTracker

from .base import LearnerConfig, OnlineLearner, RoundDiagnostics
from .metagrad_c import MetaGradC
from .squint_c import SquintC

logger = logging.getLogger(__name__)


class InnerKind(str, Enum):
    SQUINT = "squint"
    METAGRAD = "metagrad"


@dataclass(frozen=True)
class RestartEvent:
    round: int
    old_scale: float
    new_scale: float


class RestartSupervisor(OnlineLearner):
    """
    Scale-free wrapper around Squint+C or MetaGrad+C.

    Plays the default point until the first nonzero b_t at round τ, then runs
    the inner learner with B = B_τ from round τ+1. After every inner round it
    restarts the inner learner from scratch with the current B_t whenever
    B_t / B_τ > Σ_{s≤t} b_s/B_s, the sum running over all rounds since the
    start. The triggering round belongs to the old epoch.
    """

    def __init__(self, config: LearnerConfig, inner_kind: InnerKind = InnerKind.SQUINT):
        self.inner_kind = InnerKind(inner_kind)
        super().__init__(config)
        expected = Setting.EXPERTS if self.inner_kind == InnerKind.SQUINT else Setting.OCO
        self._require_setting(expected)
        self._start()

    def _start(self) -> None:
        self.global_tracker = ScaleTracker()
        self.inner: Optional[OnlineLearner] = None
        self.epoch_start_scale: Optional[float] = None
        self.epoch_count = 0
        self.restart_events: List[RestartEvent] = []
        self._restarted_last_round = False

    @property
    def learner_type(self) -> str:
        return f"{self.inner_kind.value}+l"

    @property
    def restart_rounds(self) -> List[int]:
        return [event.round for event in self.restart_events]

    def _default_prediction(self) -> np.ndarray:
        if self.inner_kind == InnerKind.SQUINT:
            return self._uniform_prior()
        return np.zeros(self.size)

    def predict(self) -> np.ndarray:
        if self.inner is None:
            return self._default_prediction()
        return self.inner.predict()

    def _magnitude(self, played: np.ndarray, observation: np.ndarray) -> float:
        if self.inner_kind == InnerKind.SQUINT:
            return float(np.max(np.abs(float(played @ observation) - observation)))
        return self.config.diameter * float(np.linalg.norm(observation))

    def _new_inner(self, scale: float) -> OnlineLearner:
        config = replace(self.config, initial_scale=scale)
        if self.inner_kind == InnerKind.SQUINT:
            return SquintC(config)
        return MetaGradC(config)

    def update(self, observation: np.ndarray) -> np.ndarray:
        observation = as_observation(observation, self.setting, self.size)
        played = self.predict()
        clip_ratio = self.global_tracker.observe_scale(self._magnitude(played, observation))
        self.ledger.record(played, observation, clip_ratio)
        self._restarted_last_round = False

        if self.inner is None:
            if self.global_tracker.initialized:
                self.epoch_start_scale = self.global_tracker.current_max
                self.inner = self._new_inner(self.epoch_start_scale)
                self.epoch_count = 1
                logger.debug("round %d: first signal, starting with B=%.6g", self.rounds, self.epoch_start_scale)
            return self.predict()

        self.inner.update(observation)
        current = self.global_tracker.current_max
        if current / self.epoch_start_scale > self.global_tracker.sum_ratio:
            event = RestartEvent(self.rounds, self.epoch_start_scale, current)
            self.restart_events.append(event)
            logger.info("round %d: restarting with B=%.6g (was %.6g)", event.round, event.new_scale, event.old_scale)
            self.epoch_start_scale = current
            self.inner = self._new_inner(current)
            self.epoch_count += 1
            self._restarted_last_round = True
        return self.predict()

    def reset(self) -> None:
        self._start()
        self.ledger = type(self.ledger)(self.setting, self.size)

    def diagnostics(self, with_potential: bool = False) -> RoundDiagnostics:
        inner = self.inner.diagnostics(with_potential) if self.inner is not None else None
        return RoundDiagnostics(
            magnitude=self.global_tracker.last_observed,
            scale=self.global_tracker.current_max,
            active_slaves=inner.active_slaves if inner is not None else (
                0 if self.inner_kind == InnerKind.METAGRAD else None
            ),
            potential=inner.potential if inner is not None else None,
            restart=self._restarted_last_round,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            **super().to_dict(),
            "epoch_start_scale": self.epoch_start_scale,
            "epoch_count": self.epoch_count,
            "restarts": [asdict(event) for event in self.restart_events],
            "global_scale": self.global_tracker.to_dict(),
            "inner": self.inner.to_dict() if self.inner is not None else None,
        }
