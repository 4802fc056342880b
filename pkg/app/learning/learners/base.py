from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, Iterator, List, Optional

import numpy as np

from app.learning.models.domains import DomainOracle
from app.learning.models.ledger import RegretLedger
from app.learning.models.observations import Setting


@dataclass
class LearnerConfig:
    """Configuration for an online learner."""
    setting: str  # experts, oco
    size: int  # number of experts K, or dimension d
    initial_scale: Optional[float] = None  # input B; restarted learners infer it
    prior: Optional[List[float]] = None  # experts only, uniform if omitted
    diameter: float = 2.0  # D of the centred ball (oco only)
    domain: Optional[DomainOracle] = None  # oco domain when it is not the centred ball
    loss_range: Optional[float] = None  # hedge only
    horizon: Optional[int] = None  # hedge only


@dataclass
class RoundDiagnostics:
    """Per-round statistics a learner reports alongside its prediction."""
    magnitude: float  # b_t
    scale: float  # B_t
    active_slaves: Optional[int] = None
    potential: Optional[float] = None
    restart: bool = False


class OnlineLearner(ABC):
    """
    Base interface for all round-based learners (Squint, MetaGrad, baselines).

    ``predict`` returns the point or distribution for the coming round;
    ``update`` consumes the loss vector (experts) or the gradient at the last
    prediction (oco) and returns the next prediction. Every update is also
    recorded in ``self.ledger``.
    """

    def __init__(self, config: LearnerConfig):
        self.config = config
        self._validate_config()
        self.ledger = RegretLedger(self.setting, config.size)

    @abstractmethod
    def predict(self) -> np.ndarray:
        pass

    @abstractmethod
    def update(self, observation: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def reset(self) -> None:
        """Cold restart with the construction parameters."""
        pass

    @property
    @abstractmethod
    def learner_type(self) -> str:
        """Return the algorithm name (e.g. 'squint+l', 'hedge')"""
        pass

    @abstractmethod
    def diagnostics(self, with_potential: bool = False) -> RoundDiagnostics:
        pass

    @property
    def setting(self) -> Setting:
        return Setting(self.config.setting)

    @property
    def size(self) -> int:
        return self.config.size

    @property
    def rounds(self) -> int:
        return self.ledger.rounds

    def to_dict(self) -> Dict[str, Any]:
        return {
            "learner_type": self.learner_type,
            "setting": self.setting.value,
            "size": self.size,
            "rounds": self.rounds,
            "prediction": self.predict().tolist(),
        }

    def _validate_config(self) -> None:
        """Validate the learner configuration."""
        if self.config.setting not in {Setting.EXPERTS.value, Setting.OCO.value}:
            raise ValueError(f"Invalid setting: {self.config.setting}")
        minimum = 2 if self.config.setting == Setting.EXPERTS.value else 1
        if self.config.size < minimum:
            raise ValueError(f"Size must be at least {minimum} for {self.config.setting}, got {self.config.size}")
        if self.config.initial_scale is not None and not self.config.initial_scale > 0:
            raise ValueError(f"Initial scale must be positive, got {self.config.initial_scale}")
        if not self.config.diameter > 0:
            raise ValueError(f"Diameter must be positive, got {self.config.diameter}")
        if self.config.prior is not None:
            prior = np.asarray(self.config.prior, dtype=float)
            if prior.size != self.config.size:
                raise ValueError(f"Prior has {prior.size} entries for {self.config.size} experts")
            if np.any(prior <= 0) or abs(prior.sum() - 1.0) > 1e-12:
                raise ValueError(f"Prior must be positive and sum to 1, got {prior.tolist()}")

    def _require_setting(self, setting: Setting) -> None:
        if self.setting != setting:
            raise ValueError(f"{self.learner_type} needs the {setting.value} setting, got {self.setting.value}")

    def _uniform_prior(self) -> np.ndarray:
        if self.config.prior is None:
            return np.full(self.size, 1.0 / self.size)
        return np.asarray(self.config.prior, dtype=float)


def walk_learners(learner: OnlineLearner) -> Iterator[OnlineLearner]:
    """The learner and every learner it wraps."""
    yield learner
    inner = getattr(learner, "inner", None)
    if inner is not None:
        yield from walk_learners(inner)
