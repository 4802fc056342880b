"""
Squint with clipped losses.

The learner keeps per-expert clipped regret R̄^k and clipped variance V̄^k and
weighs expert k by π_k ∫₀^{1/(2B_T)} exp(ηR̄^k − η²V̄^k) dη. The integral has a
closed form through the error function; everything here works with its
logarithm so long runs with large R̄ never overflow.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, special

from .errors import ObservationError
from .ledger import RegretLedger
from .observations import as_loss_vector
from .scale import CompensatedSum, ScaleTracker

logger = logging.getLogger(__name__)

LOG_HALF_SQRT_PI = math.log(math.sqrt(math.pi) / 2.0)

# Below this exponent range the integrand is tame enough that a fixed
# Gauss-Legendre rule is exact to machine precision, and the erf forms lose
# digits to cancellation.
QUADRATURE_EXPONENT_RANGE = 4.0
_GL_NODES, _GL_WEIGHTS = leggauss(32)
_GL_LOG_WEIGHTS = np.log(_GL_WEIGHTS)


def log_exp_quadratic_integral(R, V, a: float) -> np.ndarray:
    """
    log ∫₀^a exp(ηR − η²V) dη, vectorized over R and V.

    With s = √V the integral equals e^{z0²}/s · (√π/2) · (erf z1 − erf z0),
    where z0 = −R/(2s) and z1 = a·s − R/(2s). The erf difference is rewritten
    with erfcx on whichever side of zero both endpoints lie, and taken as a sum
    of two positive erf values when the endpoints straddle zero.
    """
    if not (a > 0 and math.isfinite(a)):
        raise ValueError(f"upper limit must be positive and finite, got {a}")
    R = np.asarray(R, dtype=float)
    V = np.asarray(V, dtype=float)
    R, V = np.broadcast_arrays(R, V)
    if not (np.all(np.isfinite(R)) and np.all(np.isfinite(V))):
        raise ObservationError("integral arguments must be finite")
    if np.any(V < 0):
        raise ObservationError(f"variance must be nonnegative, got {V[V < 0].tolist()}")

    out = np.empty(R.shape, dtype=float)

    flat = V == 0
    small = ~flat & (a * np.abs(R) + a * a * V <= QUADRATURE_EXPONENT_RANGE)
    closed = ~flat & ~small

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        # V = 0: (e^{aR} − 1)/R, or a when R = 0.
        positive = flat & (R > 0)
        negative = flat & (R < 0)
        zero = flat & (R == 0)
        aR = a * R[positive]
        out[positive] = aR + np.log(-np.expm1(-aR)) - np.log(R[positive])
        aR = a * R[negative]
        out[negative] = np.log(-np.expm1(aR)) - np.log(-R[negative])
        out[zero] = math.log(a)

        if np.any(small):
            eta = 0.5 * a * (_GL_NODES + 1.0)
            exponents = np.outer(R[small], eta) - np.outer(V[small], eta * eta)
            out[small] = math.log(0.5 * a) + special.logsumexp(exponents + _GL_LOG_WEIGHTS, axis=1)

        if np.any(closed):
            out[closed] = _log_integral_erf(R[closed], V[closed], a)

    return out


def _log_integral_erf(R: np.ndarray, V: np.ndarray, a: float) -> np.ndarray:
    s = np.sqrt(V)
    z0 = -R / (2.0 * s)
    z1 = a * s + z0
    log_s = np.log(s)
    out = np.empty(R.shape, dtype=float)

    right = z0 >= 0
    left = z1 <= 0
    straddle = ~right & ~left

    if np.any(right):
        x0, x1 = z0[right], z1[right]
        diff = special.erfcx(x0) - np.exp(x0 * x0 - x1 * x1) * special.erfcx(x1)
        out[right] = np.log(diff) - log_s[right] + LOG_HALF_SQRT_PI

    if np.any(left):
        x0, x1 = z0[left], z1[left]
        shift = x0 * x0 - x1 * x1
        diff = special.erfcx(-x1) - np.exp(-shift) * special.erfcx(-x0)
        out[left] = shift + np.log(diff) - log_s[left] + LOG_HALF_SQRT_PI

    if np.any(straddle):
        x0, x1 = z0[straddle], z1[straddle]
        total = special.erf(x1) + special.erf(-x0)
        out[straddle] = x0 * x0 + np.log(total) - log_s[straddle] + LOG_HALF_SQRT_PI

    return out


def exp_quadratic_integral(R: float, V: float, a: float) -> float:
    """∫₀^a exp(ηR − η²V) dη for scalar arguments."""
    return float(np.exp(log_exp_quadratic_integral(R, V, a)))


@dataclass
class SquintState:
    """Prior, clipped per-expert statistics and scale of one Squint+C run."""
    prior: np.ndarray
    scale: ScaleTracker
    prediction: Optional[np.ndarray] = None
    _regret: Optional[CompensatedSum] = field(default=None, repr=False)
    _variance: Optional[CompensatedSum] = field(default=None, repr=False)

    def __post_init__(self):
        self.prior = np.asarray(self.prior, dtype=float)
        if self.prior.ndim != 1 or self.prior.size < 2:
            raise ValueError(f"Prior must be a vector over at least 2 experts, got shape {self.prior.shape}")
        if np.any(self.prior <= 0) or abs(self.prior.sum() - 1.0) > 1e-12:
            raise ValueError(f"Prior must be positive and sum to 1, got {self.prior.tolist()}")
        if not self.scale.initialized:
            raise ValueError("Squint+C needs a positive initial scale B")
        if self._regret is None:
            self._regret = CompensatedSum(np.zeros(self.num_experts))
        if self._variance is None:
            self._variance = CompensatedSum(np.zeros(self.num_experts))
        if self.prediction is None:
            self.prediction = self.prior.copy()

    @classmethod
    def create(cls, num_experts: int, initial_scale: float, prior: Optional[np.ndarray] = None) -> "SquintState":
        if prior is None:
            prior = np.full(num_experts, 1.0 / num_experts)
        return cls(prior=prior, scale=ScaleTracker(initial_scale=initial_scale))

    @property
    def num_experts(self) -> int:
        return int(self.prior.size)

    @property
    def clipped_regret(self) -> np.ndarray:
        return self._regret.value

    @property
    def clipped_variance(self) -> np.ndarray:
        return self._variance.value

    @property
    def rounds(self) -> int:
        return self.scale.rounds

    def to_dict(self) -> Dict[str, Any]:
        return {
            "prior": self.prior.tolist(),
            "clipped_regret": self.clipped_regret.tolist(),
            "clipped_variance": self.clipped_variance.tolist(),
            "prediction": self.prediction.tolist(),
            "scale": self.scale.to_dict(),
        }


def squint_weights(state: SquintState) -> np.ndarray:
    """Next prediction p̂ ∝ π_k ∫₀^{1/(2B_T)} exp(ηR̄^k − η²V̄^k) dη."""
    upper = 1.0 / (2.0 * state.scale.current_max)
    log_integrals = log_exp_quadratic_integral(state.clipped_regret, state.clipped_variance, upper)
    return special.softmax(np.log(state.prior) + log_integrals)


def squint_round(state: SquintState, loss, ledger: Optional[RegretLedger] = None) -> np.ndarray:
    """
    Consume one loss vector evaluated against ``state.prediction`` and return
    the next prediction. The state is updated in place.
    """
    loss = as_loss_vector(loss, state.num_experts)
    played = state.prediction
    instantaneous = float(played @ loss) - loss
    magnitude = float(np.max(np.abs(instantaneous)))

    clip_ratio = state.scale.observe_scale(magnitude)
    clipped = clip_ratio * instantaneous
    state._regret.add(clipped)
    state._variance.add(clipped * clipped)

    if ledger is not None:
        ledger.record(played, loss, clip_ratio)

    state.prediction = squint_weights(state)
    return state.prediction


def _potential_term(R: float, V: float, upper: float) -> float:
    def integrand(eta: float) -> float:
        if eta == 0.0:
            return R
        return math.expm1(eta * R - eta * eta * V) / eta

    value, _ = integrate.quad(integrand, 0.0, upper, epsabs=1e-12, epsrel=1e-12, limit=200)
    return value


def squint_potential(state: SquintState) -> float:
    """
    Φ_T = Σ_k π_k ∫₀^{1/(2B_{T−1})} (exp(ηR̄^k − η²V̄^k) − 1)/η dη.

    Diagnostic only; evaluated by adaptive quadrature with the removable
    singularity at η = 0 replaced by its limit R̄^k.
    """
    if state.rounds == 0:
        return 0.0
    upper = 1.0 / (2.0 * state.scale.previous_max)
    regret = state.clipped_regret
    variance = state.clipped_variance
    return float(sum(
        weight * _potential_term(float(r), float(v), upper)
        for weight, r, v in zip(state.prior, regret, variance)
        if r != 0.0 or v != 0.0
    ))
