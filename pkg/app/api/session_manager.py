import logging
import uuid
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

from app.harness.config import EXPERT_ALGORITHMS
from app.learning.learners.base import LearnerConfig, OnlineLearner, walk_learners
from app.learning.learners.pool import LearnerPool
from app.learning.learners.restart import RestartSupervisor
from app.learning.models.domains import build_domain
from app.learning.models.observations import Setting

logger = logging.getLogger(__name__)

EXPERT_ALGORITHM_NAMES = {algorithm.value for algorithm in EXPERT_ALGORITHMS}


@dataclass
class LearnerSession:
    algorithm: str
    learner: OnlineLearner


class SessionManager:
    def __init__(self):
        """Initialize the session manager."""
        self.sessions: Dict[str, LearnerSession] = {}
        self.learner_pool = LearnerPool()

    def create_session(
        self,
        algorithm: str,
        size: int,
        prior: Optional[List[float]] = None,
        diameter: float = 2.0,
        initial_scale: Optional[float] = None,
        domain: Optional[str] = None,
        loss_range: Optional[float] = None,
        horizon: Optional[int] = None,
    ) -> str:
        """Create a new learner session."""
        if algorithm not in self.learner_pool.learner_classes:
            raise ValueError(f"Unknown algorithm: {algorithm}")
        setting = Setting.EXPERTS if algorithm in EXPERT_ALGORITHM_NAMES else Setting.OCO
        config = LearnerConfig(
            setting=setting.value,
            size=size,
            initial_scale=initial_scale,
            prior=prior,
            diameter=diameter,
            domain=build_domain(domain, size, 0.5 * diameter) if domain is not None else None,
            loss_range=loss_range,
            horizon=horizon,
        )
        learner = self.learner_pool.create_learner(algorithm, config)

        session_id = str(uuid.uuid4())
        self.sessions[session_id] = LearnerSession(algorithm, learner)
        logger.info("created session %s running %s (%s, size %d)", session_id, algorithm, setting.value, size)
        return session_id

    def _get(self, session_id: str) -> LearnerSession:
        return self.sessions[session_id]

    @staticmethod
    def _restart_rounds(learner: OnlineLearner) -> List[int]:
        for current in walk_learners(learner):
            if isinstance(current, RestartSupervisor):
                return list(current.restart_rounds)
        return []

    def get_session_state(self, session_id: str) -> Dict[str, Any]:
        session = self._get(session_id)
        learner = session.learner
        diagnostics = learner.diagnostics()
        return {
            "session_id": session_id,
            "algorithm": session.algorithm,
            "setting": learner.setting.value,
            "round": learner.rounds,
            "prediction": learner.predict().tolist(),
            "b_t": diagnostics.magnitude,
            "B_t": diagnostics.scale,
            "restarts": self._restart_rounds(learner),
            "active_slaves": diagnostics.active_slaves,
        }

    def submit_round(self, session_id: str, observation: List[float]) -> Dict[str, Any]:
        """Feed one observation and return the next prediction with the round's statistics."""
        learner = self._get(session_id).learner
        prediction = learner.update(observation)
        diagnostics = learner.diagnostics(with_potential=True)
        return {
            "round": learner.rounds,
            "prediction": prediction.tolist(),
            "b_t": diagnostics.magnitude,
            "B_t": diagnostics.scale,
            "restart": diagnostics.restart,
            "active_slaves": diagnostics.active_slaves,
            "potential": diagnostics.potential,
        }

    def get_snapshot(self, session_id: str) -> Dict[str, Any]:
        session = self._get(session_id)
        return {"session_id": session_id, "algorithm": session.algorithm, **session.learner.to_dict()}

    def delete_session(self, session_id: str) -> None:
        del self.sessions[session_id]
        logger.info("deleted session %s", session_id)

    def get_available_algorithms(self) -> List[str]:
        return self.learner_pool.available()
