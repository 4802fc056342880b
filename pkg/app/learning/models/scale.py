import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Union

import numpy as np

from .errors import ObservationError

Number = Union[float, np.ndarray]


class CompensatedSum:
    """
    Running sum with Neumaier compensation.

    Works for scalars and for numpy arrays of a fixed shape; the compensation
    term is carried elementwise.
    """

    def __init__(self, initial: Number = 0.0):
        self._sum = np.array(initial, dtype=float)
        self._compensation = np.zeros_like(self._sum)

    def add(self, value: Number) -> None:
        value = np.asarray(value, dtype=float)
        total = self._sum + value
        big_first = np.abs(self._sum) >= np.abs(value)
        self._compensation = self._compensation + np.where(
            big_first, (self._sum - total) + value, (value - total) + self._sum
        )
        self._sum = total

    @property
    def value(self) -> Number:
        result = self._sum + self._compensation
        if result.ndim == 0:
            return float(result)
        return result

    def copy(self) -> "CompensatedSum":
        clone = CompensatedSum()
        clone._sum = self._sum.copy()
        clone._compensation = self._compensation.copy()
        return clone


@dataclass
class ScaleTracker:
    """
    Running Lipschitz estimates for one learner.

    ``initial_scale`` is the input B (so B_0 = B). Passing ``None`` defers the
    initial scale to the first nonzero magnitude, which is how the restart
    supervisor tracks scale from round one.
    """
    initial_scale: Optional[float] = None
    current_max: float = 0.0
    previous_max: float = 0.0
    last_observed: float = 0.0
    clip_ratio: float = 1.0
    rounds: int = 0
    _sum_ratio: CompensatedSum = field(default_factory=CompensatedSum, repr=False)
    _sum_squares: CompensatedSum = field(default_factory=CompensatedSum, repr=False)
    previous_sum_ratio: float = 0.0
    previous_sum_squares: float = 0.0

    def __post_init__(self):
        if self.initial_scale is not None:
            if not math.isfinite(self.initial_scale) or self.initial_scale <= 0:
                raise ValueError(f"Initial scale must be positive and finite, got {self.initial_scale}")
            self.current_max = float(self.initial_scale)
            self.previous_max = float(self.initial_scale)

    @property
    def initialized(self) -> bool:
        return self.initial_scale is not None

    @property
    def sum_ratio(self) -> float:
        """Σ_{s≤t} b_s/B_s."""
        return self._sum_ratio.value

    @property
    def sum_squares(self) -> float:
        """Σ_{s≤t} b_s²."""
        return self._sum_squares.value

    def observe_scale(self, magnitude: float) -> float:
        """
        Record this round's magnitude b_t and return the clip ratio B_{t-1}/B_t.

        Before the initial scale is known, zero magnitudes leave every
        statistic at zero and the first nonzero magnitude becomes B.
        """
        magnitude = float(magnitude)
        if not math.isfinite(magnitude) or magnitude < 0:
            raise ObservationError(f"scale magnitude must be finite and nonnegative, got {magnitude}")

        self.rounds += 1
        self.previous_sum_ratio = self.sum_ratio
        self.previous_sum_squares = self.sum_squares
        self.last_observed = magnitude
        self._sum_squares.add(magnitude * magnitude)

        if not self.initialized:
            self.clip_ratio = 1.0
            if magnitude > 0:
                self.initial_scale = magnitude
                self.previous_max = magnitude
                self.current_max = magnitude
                self._sum_ratio.add(1.0)
            return self.clip_ratio

        self.previous_max = self.current_max
        self.current_max = max(self.previous_max, magnitude)
        self.clip_ratio = self.previous_max / self.current_max
        self._sum_ratio.add(magnitude / self.current_max)
        return self.clip_ratio

    def clip_loss(self, raw: np.ndarray) -> np.ndarray:
        """Scale a loss vector or gradient by the current clip ratio."""
        return np.asarray(raw, dtype=float) * self.clip_ratio

    def to_dict(self) -> Dict[str, Any]:
        return {
            "initial_scale": self.initial_scale,
            "current_max": self.current_max,
            "previous_max": self.previous_max,
            "last_observed": self.last_observed,
            "clip_ratio": self.clip_ratio,
            "sum_ratio": self.sum_ratio,
            "sum_squares": self.sum_squares,
            "rounds": self.rounds,
        }
