"""
MetaGrad with clipped gradients on the centred ball.

Slaves live on the exponential grid η_i = 2^{-i}/(5B) with prior
1/((i+1)(i+2)). A slave wakes once D·Σ‖ḡ_s‖ + B_t reaches 1/η and is dropped
when the running scale pushes η above 1/(5B_t). The master mixes the active
slaves with weights proportional to η·w^η.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
from scipy import special

from .ledger import RegretLedger
from .observations import as_gradient
from .projection import BallProjector
from .scale import CompensatedSum, ScaleTracker

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LearningRateGrid:
    """The grid η_i = 2^{-i}/(5B), i = 0, 1, ..., materialized on demand."""
    base_scale: float

    def __post_init__(self):
        if not (self.base_scale > 0 and math.isfinite(self.base_scale)):
            raise ValueError(f"Grid base scale must be positive and finite, got {self.base_scale}")

    def eta(self, index: int) -> float:
        return math.ldexp(1.0, -index) / (5.0 * self.base_scale)

    @staticmethod
    def prior(index: int) -> float:
        return 1.0 / ((index + 1) * (index + 2))

    @staticmethod
    def tail_mass(first_index: int) -> float:
        """Σ_{i ≥ first_index} prior(i)."""
        return 1.0 / (first_index + 1)

    def lowest_admissible(self, scale: float) -> int:
        """Smallest i with η_i ≤ 1/(5·scale), i.e. scale·2^{-i} ≤ B."""
        if scale <= self.base_scale:
            return 0
        index = max(0, math.ceil(math.log2(scale / self.base_scale)))
        while index > 0 and math.ldexp(scale, -(index - 1)) <= self.base_scale:
            index -= 1
        while math.ldexp(scale, -index) > self.base_scale:
            index += 1
        return index

    def highest_awake(self, horizon: float) -> int:
        """Largest i with η_i ≥ 1/horizon, i.e. horizon·2^{-i} ≥ 5B; -1 if none."""
        threshold = 5.0 * self.base_scale
        if horizon < threshold:
            return -1
        index = max(0, math.floor(math.log2(horizon / threshold)))
        while math.ldexp(horizon, -index) < threshold:
            index -= 1
        while math.ldexp(horizon, -(index + 1)) >= threshold:
            index += 1
        return index


def surrogate_value(instantaneous_regret: float, eta: float) -> float:
    """f̄ = −η r̄ + (η r̄)²; never below −1/4."""
    scaled = eta * instantaneous_regret
    return -scaled + scaled * scaled


@dataclass
class SlaveState:
    index: int
    eta: float
    wake_time: int
    mean: np.ndarray
    unprojected: np.ndarray
    gram: np.ndarray
    log_weight: float
    surrogate_history: List[float] = field(default_factory=list, repr=False)

    @classmethod
    def wake(cls, grid: LearningRateGrid, index: int, dimension: int, round_index: int) -> "SlaveState":
        return cls(
            index=index,
            eta=grid.eta(index),
            wake_time=round_index,
            mean=np.zeros(dimension),
            unprojected=np.zeros(dimension),
            gram=np.zeros((dimension, dimension)),
            log_weight=math.log(grid.prior(index)),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "index": self.index,
            "eta": self.eta,
            "wake_time": self.wake_time,
            "mean": self.mean.tolist(),
            "unprojected": self.unprojected.tolist(),
            "gram": self.gram.tolist(),
            "log_weight": self.log_weight,
        }


@dataclass
class MetaGradState:
    grid: LearningRateGrid
    dimension: int
    diameter: float
    scale: ScaleTracker
    projector: BallProjector
    active: List[SlaveState] = field(default_factory=list)
    prediction: Optional[np.ndarray] = None
    lowest_index: int = 0
    highest_index: int = -1
    evicted: int = 0
    evicted_weight: float = 0.0
    _wake_sum: CompensatedSum = field(default_factory=CompensatedSum, repr=False)
    _gram_trace: CompensatedSum = field(default_factory=CompensatedSum, repr=False)

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError(f"Dimension must be at least 1, got {self.dimension}")
        if not self.diameter > 0:
            raise ValueError(f"Diameter must be positive, got {self.diameter}")
        if self.prediction is None:
            self.prediction = np.zeros(self.dimension)

    @classmethod
    def create(
        cls,
        dimension: int,
        diameter: float,
        initial_scale: float,
        projector: Optional[BallProjector] = None,
    ) -> "MetaGradState":
        state = cls(
            grid=LearningRateGrid(initial_scale),
            dimension=dimension,
            diameter=diameter,
            scale=ScaleTracker(initial_scale=initial_scale),
            projector=projector if projector is not None else BallProjector(diameter),
        )
        update_active_set(state)
        return state

    @property
    def rounds(self) -> int:
        return self.scale.rounds

    @property
    def wake_sum(self) -> float:
        """D·Σ‖ḡ_s‖."""
        return self._wake_sum.value

    @property
    def cumulative_clipped_gram_trace(self) -> float:
        """Σ‖ḡ_s‖²."""
        return self._gram_trace.value

    @property
    def active_etas(self) -> List[float]:
        return [slave.eta for slave in self.active]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "base_scale": self.grid.base_scale,
            "dimension": self.dimension,
            "diameter": self.diameter,
            "rounds": self.rounds,
            "wake_sum": self.wake_sum,
            "cumulative_clipped_gram_trace": self.cumulative_clipped_gram_trace,
            "lowest_index": self.lowest_index,
            "highest_index": self.highest_index,
            "evicted": self.evicted,
            "evicted_weight": self.evicted_weight,
            "prediction": self.prediction.tolist(),
            "scale": self.scale.to_dict(),
            "active": [slave.to_dict() for slave in self.active],
        }


def update_active_set(state: MetaGradState) -> None:
    """
    Bring the active set in line with the statistics through the current round.

    Grid points with D·Σ‖ḡ‖ + B_t ≥ 1/η and η ≤ 1/(5B_t) serve the next round.
    Slaves pushed out by scale growth are dropped for good along with their
    weight. The dropped weight is not folded back into the prior term, so
    :func:`metagrad_potential` only decreases on eviction. The dropped mass is
    kept in ``evicted_weight``.
    """
    lowest = state.grid.lowest_admissible(state.scale.current_max)
    highest = state.grid.highest_awake(state.wake_sum + state.scale.current_max)

    kept = []
    for slave in state.active:
        if slave.index < lowest:
            state.evicted += 1
            state.evicted_weight += math.exp(slave.log_weight)
            logger.info(
                "round %d: evicting slave eta=%.3e (index %d) with weight %.3e after scale grew to %.3e",
                state.rounds, slave.eta, slave.index, math.exp(slave.log_weight), state.scale.current_max,
            )
        else:
            kept.append(slave)
    state.active = kept

    for index in range(max(lowest, state.highest_index + 1), highest + 1):
        logger.debug("round %d: waking slave index %d", state.rounds, index)
        state.active.append(SlaveState.wake(state.grid, index, state.dimension, state.rounds))

    state.lowest_index = lowest
    state.highest_index = max(state.highest_index, highest)


def slave_update(
    slave: SlaveState,
    master_pred: np.ndarray,
    clipped_grad: np.ndarray,
    projector: BallProjector,
) -> SlaveState:
    """
    One second-order step for a single slave, in place.

    The surrogate loss is charged at the slave's mean before the step. The new
    mean is the Mahalanobis projection of
    mean − η Σ ḡ (1 + 2η <mean − master, ḡ>) with Σ = (I/D² + 2η²·gram)^{-1}.
    """
    if not np.any(clipped_grad):
        return slave

    eta = slave.eta
    penalty = surrogate_value(float((master_pred - slave.mean) @ clipped_grad), eta)
    slave.log_weight -= penalty
    slave.surrogate_history.append(penalty)

    slave.gram = slave.gram + np.outer(clipped_grad, clipped_grad)
    metric = projector.diagonalize(slave.gram)
    step = metric.apply_inverse_metric(clipped_grad, eta)
    factor = 1.0 + 2.0 * eta * float((slave.mean - master_pred) @ clipped_grad)
    slave.unprojected = slave.mean - eta * factor * step
    slave.mean = metric.project(slave.unprojected, eta)
    return slave


def master_predict(state: MetaGradState) -> np.ndarray:
    """η·w-weighted mean of the active slaves; the origin when none is active."""
    if not state.active:
        return np.zeros(state.dimension)
    log_weights = np.array([math.log(slave.eta) + slave.log_weight for slave in state.active])
    weights = special.softmax(log_weights)
    means = np.vstack([slave.mean for slave in state.active])
    return weights @ means


def metagrad_round(state: MetaGradState, gradient, ledger: Optional[RegretLedger] = None) -> np.ndarray:
    """Consume the gradient at ``state.prediction`` and return the next prediction."""
    gradient = as_gradient(gradient, state.dimension)
    played = state.prediction
    gradient_norm = float(np.linalg.norm(gradient))

    clip_ratio = state.scale.observe_scale(state.diameter * gradient_norm)
    clipped = clip_ratio * gradient
    for slave in state.active:
        slave_update(slave, played, clipped, state.projector)

    clipped_norm = clip_ratio * gradient_norm
    state._wake_sum.add(state.diameter * clipped_norm)
    state._gram_trace.add(clipped_norm * clipped_norm)

    if ledger is not None:
        ledger.record(played, gradient, clip_ratio)

    update_active_set(state)
    state.prediction = master_predict(state)
    return state.prediction


def metagrad_potential(state: MetaGradState) -> float:
    """Prior mass of admissible sleeping grid points plus the active slaves' weights."""
    first_sleeping = max(state.highest_index + 1, state.lowest_index)
    return LearningRateGrid.tail_mass(first_sleeping) + float(
        sum(math.exp(slave.log_weight) for slave in state.active)
    )
