from functools import partial
from typing import Callable, Dict, List

from .base import LearnerConfig, OnlineLearner
from .hedge import Hedge
from .metagrad_c import MetaGradC
from .ogd import OGDAdaNorm
from .reduction import BallReduction
from .restart import InnerKind, RestartSupervisor
from .squint_c import SquintC

LearnerFactory = Callable[[LearnerConfig], OnlineLearner]


class LearnerPool:
    """
    Registry of learner factories keyed by algorithm name.
    """

    def __init__(self):
        self.learner_classes: Dict[str, LearnerFactory] = {
            "squint+c": SquintC,
            "squint+l": partial(RestartSupervisor, inner_kind=InnerKind.SQUINT),
            "metagrad+c": MetaGradC,
            "metagrad+l": partial(RestartSupervisor, inner_kind=InnerKind.METAGRAD),
            "metagrad+c-reduced": partial(BallReduction, inner_algorithm="metagrad+c"),
            "metagrad+l-reduced": partial(BallReduction, inner_algorithm="metagrad+l"),
            "hedge": Hedge,
            "ogd-adanorm": OGDAdaNorm,
        }

    def register_learner_class(self, name: str, factory: LearnerFactory) -> None:
        """Register a new learner factory."""
        self.learner_classes[name] = factory

    def create_learner(self, name: str, config: LearnerConfig) -> OnlineLearner:
        if name not in self.learner_classes:
            raise ValueError(f"Unknown algorithm: {name}")
        return self.learner_classes[name](config)

    def available(self) -> List[str]:
        return sorted(self.learner_classes)
