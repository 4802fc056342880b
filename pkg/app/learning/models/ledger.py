from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from .errors import DimensionMismatchError
from .observations import ComparatorSpec, Setting
from .scale import CompensatedSum


@dataclass
class LedgerTotals:
    """Cumulative regret statistics against one comparator."""
    regret: float
    clipped_regret: float
    variance: float
    clipped_variance: float


@dataclass
class LedgerSeries:
    """Per-round prefix sums of the ledger statistics (index t-1 holds round t)."""
    regret: np.ndarray
    clipped_regret: np.ndarray
    variance: np.ndarray
    clipped_variance: np.ndarray


class RegretLedger:
    """
    Regret accounting for a single learner.

    Every round stores the played point (or distribution), the unclipped
    observation and the clip ratio, so any comparator can be evaluated after
    the fact. Expert mode also keeps incremental per-expert totals R^k, R̄^k,
    V^k and V̄^k; in OCO mode incremental totals are kept for comparators
    registered with :meth:`track`.

    Instantaneous regret is the linearized r_t = <played_t - c, obs_t>, which
    is the true regret for expert losses and the pseudo-regret for OCO.
    Against a distribution ρ the variance is the ρ-average of the per-expert
    variances, not the square of the averaged increment.
    """

    def __init__(self, setting: Setting, size: int):
        self.setting = Setting(setting)
        self.size = size
        self._played: List[np.ndarray] = []
        self._observations: List[np.ndarray] = []
        self._clip_ratios: List[float] = []
        self._tracked: Dict[str, ComparatorSpec] = {}
        self._tracked_totals: Dict[str, Dict[str, CompensatedSum]] = {}
        if self.setting == Setting.EXPERTS:
            self._expert_totals = {
                key: CompensatedSum(np.zeros(size))
                for key in ("regret", "clipped_regret", "variance", "clipped_variance")
            }

    @property
    def rounds(self) -> int:
        return len(self._played)

    def track(self, name: str, comparator: ComparatorSpec) -> None:
        """Maintain incremental totals against ``comparator`` from the next round on."""
        self._check_comparator(comparator)
        self._tracked[name] = comparator
        self._tracked_totals[name] = {
            key: CompensatedSum() for key in ("regret", "clipped_regret", "variance", "clipped_variance")
        }

    def record(self, played: np.ndarray, observation: np.ndarray, clip_ratio: float = 1.0) -> None:
        played = np.array(played, dtype=float)
        observation = np.array(observation, dtype=float)
        if played.size != self.size:
            raise DimensionMismatchError(self.size, played.size, "played point")
        if observation.size != self.size:
            raise DimensionMismatchError(self.size, observation.size, "observation")

        self._played.append(played)
        self._observations.append(observation)
        self._clip_ratios.append(float(clip_ratio))

        if self.setting == Setting.EXPERTS:
            increments = float(played @ observation) - observation
            clipped = clip_ratio * increments
            self._expert_totals["regret"].add(increments)
            self._expert_totals["clipped_regret"].add(clipped)
            self._expert_totals["variance"].add(increments * increments)
            self._expert_totals["clipped_variance"].add(clipped * clipped)

        for name, comparator in self._tracked.items():
            increment = float((played - comparator.vector) @ observation)
            clipped = clip_ratio * increment
            totals = self._tracked_totals[name]
            totals["regret"].add(increment)
            totals["clipped_regret"].add(clipped)
            totals["variance"].add(increment * increment)
            totals["clipped_variance"].add(clipped * clipped)

    # Expert-mode per-expert totals

    @property
    def cumulative_regret(self) -> np.ndarray:
        return self._expert_totals["regret"].value

    @property
    def cumulative_clipped_regret(self) -> np.ndarray:
        return self._expert_totals["clipped_regret"].value

    @property
    def cumulative_variance(self) -> np.ndarray:
        return self._expert_totals["variance"].value

    @property
    def cumulative_clipped_variance(self) -> np.ndarray:
        return self._expert_totals["clipped_variance"].value

    def totals(self, comparator: ComparatorSpec, name: Optional[str] = None) -> LedgerTotals:
        """Incrementally maintained totals against ``comparator``."""
        self._check_comparator(comparator)
        if self.setting == Setting.EXPERTS:
            weights = comparator.vector
            return LedgerTotals(
                regret=float(weights @ self.cumulative_regret),
                clipped_regret=float(weights @ self.cumulative_clipped_regret),
                variance=float(weights @ self.cumulative_variance),
                clipped_variance=float(weights @ self.cumulative_clipped_variance),
            )
        if name is None:
            name = next((key for key, spec in self._tracked.items() if spec is comparator), None)
        if name not in self._tracked_totals:
            raise KeyError(f"comparator {comparator.label} is not tracked by this ledger")
        totals = self._tracked_totals[name]
        return LedgerTotals(**{key: acc.value for key, acc in totals.items()})

    # Recomputation from the stored history

    def played_history(self) -> np.ndarray:
        return np.vstack(self._played) if self._played else np.zeros((0, self.size))

    def observation_history(self) -> np.ndarray:
        return np.vstack(self._observations) if self._observations else np.zeros((0, self.size))

    def clip_ratio_history(self) -> np.ndarray:
        return np.asarray(self._clip_ratios, dtype=float)

    def series(self, comparator: ComparatorSpec) -> LedgerSeries:
        self._check_comparator(comparator)
        if not self._played:
            raise ValueError("ledger has no completed rounds")
        played = self.played_history()
        observations = self.observation_history()
        ratios = self.clip_ratio_history()

        if self.setting == Setting.EXPERTS:
            per_expert = np.einsum("tk,tk->t", played, observations)[:, None] - observations
            clipped = ratios[:, None] * per_expert
            weights = comparator.vector
            increments = per_expert @ weights
            clipped_increments = clipped @ weights
            squares = (per_expert ** 2) @ weights
            clipped_squares = (clipped ** 2) @ weights
        else:
            increments = np.einsum("td,td->t", played - comparator.vector, observations)
            clipped_increments = ratios * increments
            squares = increments ** 2
            clipped_squares = clipped_increments ** 2

        return LedgerSeries(
            regret=np.cumsum(increments),
            clipped_regret=np.cumsum(clipped_increments),
            variance=np.cumsum(squares),
            clipped_variance=np.cumsum(clipped_squares),
        )

    def regret_vs(self, comparator: ComparatorSpec) -> float:
        """Cumulative (pseudo-)regret against ``comparator`` recomputed from the history."""
        return float(self.series(comparator).regret[-1])

    def _check_comparator(self, comparator: ComparatorSpec) -> None:
        if comparator.size != self.size:
            raise DimensionMismatchError(self.size, comparator.size, "comparator")
