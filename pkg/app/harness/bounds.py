"""
Regret bounds evaluated as prefix series over rounds 1..T.

All inputs are per-round arrays: ``magnitudes`` holds b_t, ``scales`` holds
B_t and ``variance`` the cumulative variance term of the comparator. Values
at index t−1 bound the regret after round t.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

LN2 = math.log(2.0)


@dataclass
class BoundSeries:
    name: str
    values: np.ndarray
    clamped_rounds: int = 0  # rounds where ln ln was clamped at e

    def final(self) -> float:
        return float(self.values[-1])


def previous(series: np.ndarray, initial: float) -> np.ndarray:
    """Shift by one round: entry t−1 holds the value after round t−1."""
    series = np.asarray(series, dtype=float)
    return np.concatenate(([initial], series[:-1]))


def safe_ratio(numerator: np.ndarray, denominator: np.ndarray) -> np.ndarray:
    """numerator/denominator, with 0 wherever the denominator is 0."""
    numerator = np.asarray(numerator, dtype=float)
    denominator = np.asarray(denominator, dtype=float)
    return np.divide(numerator, denominator, out=np.zeros_like(numerator), where=denominator > 0)


def log2_plus(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.maximum(0.0, np.log2(np.maximum(x, 1.0)))


def kl_divergence(rho: np.ndarray, prior: np.ndarray) -> float:
    return float(np.sum(special.rel_entr(np.asarray(rho, dtype=float), np.asarray(prior, dtype=float))))


def _check_lengths(*series: np.ndarray) -> None:
    lengths = {np.asarray(s).shape[0] for s in series}
    if len(lengths) != 1:
        raise ValueError(f"Bound inputs must have one length per round, got lengths {sorted(lengths)}")
    if 0 in lengths:
        raise ValueError("Bound inputs are empty")


def squint_potential_bound(scales: np.ndarray, initial_scale: float) -> BoundSeries:
    """ln(B_{T−1}/B), the ceiling of the Squint+C potential."""
    return BoundSeries("squint-potential", np.log(previous(scales, initial_scale) / initial_scale))


def squint_clipped_bound(
    variance: np.ndarray,
    magnitudes: np.ndarray,
    scales: np.ndarray,
    initial_scale: float,
    kl: float = 0.0,
) -> BoundSeries:
    """
    Squint+C bound on the clipped regret against ρ.

    √(2V̄)(1 + √(2C)) + 5B_{T−1}(C + ln 2) with
    C = KL(ρ‖π) + ln(Φ_T + ½ + ln(2 + Σ_{t≤T−1} b_t/B_t)), the potential
    Φ_T replaced by its ceiling ln(B_{T−1}/B).
    """
    _check_lengths(variance, magnitudes, scales)
    previous_scale = previous(scales, initial_scale)
    previous_ratio = previous(np.cumsum(safe_ratio(magnitudes, scales)), 0.0)
    potential = np.log(previous_scale / initial_scale)
    complexity = kl + np.log(potential + 0.5 + np.log(2.0 + previous_ratio))
    values = np.sqrt(2.0 * variance) * (1.0 + np.sqrt(2.0 * complexity)) + 5.0 * previous_scale * (complexity + LN2)
    return BoundSeries("squint+c", values)


def squint_restart_bound(
    variance: np.ndarray,
    magnitudes: np.ndarray,
    scales: np.ndarray,
    kl: float = 0.0,
) -> BoundSeries:
    """
    Squint+L bound on the regret against ρ.

    2√V(1 + √(2Γ)) + 10B_T(Γ + ln 2) + 4B_T with
    Γ = KL(ρ‖π) + ln(ln S + ½ + ln(2 + S)), S = Σ_{t≤T−1} b_t/B_t. The inner
    ln S is taken at max(e, S).
    """
    _check_lengths(variance, magnitudes, scales)
    previous_ratio = previous(np.cumsum(safe_ratio(magnitudes, scales)), 0.0)
    clamped = previous_ratio < math.e
    complexity = kl + np.log(np.log(np.maximum(math.e, previous_ratio)) + 0.5 + np.log(2.0 + previous_ratio))
    values = (
        2.0 * np.sqrt(variance) * (1.0 + np.sqrt(2.0 * complexity))
        + 10.0 * scales * (complexity + LN2)
        + 4.0 * scales
    )
    return BoundSeries("squint+l", values, clamped_rounds=int(np.count_nonzero(clamped)))


def metagrad_clipped_complexity(magnitudes: np.ndarray, scales: np.ndarray, initial_scale: float, dimension: int) -> np.ndarray:
    """
    d·ln(1 + (2Σ_{t≤T−1} b_t² + 2B_{T−1}²)/(25 d B_{T−1}²)) + 2 ln(log₂⁺(√(Σ_{t≤T} b_t²)/B) + 3) + 2.
    """
    squares = np.cumsum(np.square(magnitudes))
    previous_scale = previous(scales, initial_scale)
    previous_squares = previous(squares, 0.0)
    return (
        dimension * np.log1p((2.0 * previous_squares + 2.0 * previous_scale ** 2) / (25.0 * dimension * previous_scale ** 2))
        + 2.0 * np.log(log2_plus(np.sqrt(squares) / initial_scale) + 3.0)
        + 2.0
    )


def metagrad_clipped_bound(
    variance: np.ndarray,
    magnitudes: np.ndarray,
    scales: np.ndarray,
    initial_scale: float,
    dimension: int,
) -> BoundSeries:
    """MetaGrad+C bound on the clipped pseudo-regret: 3√(V̄C) + 15B_T·C."""
    _check_lengths(variance, magnitudes, scales)
    complexity = metagrad_clipped_complexity(magnitudes, scales, initial_scale, dimension)
    return BoundSeries("metagrad+c", 3.0 * np.sqrt(variance * complexity) + 15.0 * scales * complexity)


def metagrad_restart_complexity(magnitudes: np.ndarray, scales: np.ndarray, dimension: int) -> np.ndarray:
    """
    2d·ln(27/25 + (2/(25d))Σ_{t≤T} b_t²/B_t²) + 4 ln(log₂⁺√(Σ_{t≤T} S_t²) + 3) + 4,
    S_t = Σ_{s≤t} b_s/B_s.
    """
    ratios = safe_ratio(magnitudes, scales)
    running = np.cumsum(ratios)
    return (
        2.0 * dimension * np.log(27.0 / 25.0 + 2.0 / (25.0 * dimension) * np.cumsum(np.square(ratios)))
        + 4.0 * np.log(log2_plus(np.sqrt(np.cumsum(np.square(running)))) + 3.0)
        + 4.0
    )


def metagrad_restart_bound(
    variance: np.ndarray, magnitudes: np.ndarray, scales: np.ndarray, dimension: int
) -> BoundSeries:
    """MetaGrad+L bound on the pseudo-regret: 3√(VΓ) + 15B_TΓ + 4B_T."""
    _check_lengths(variance, magnitudes, scales)
    complexity = metagrad_restart_complexity(magnitudes, scales, dimension)
    return BoundSeries(
        "metagrad+l", 3.0 * np.sqrt(variance * complexity) + 15.0 * scales * complexity + 4.0 * scales
    )


def reduced_clipped_bound(
    variance: np.ndarray,
    magnitudes: np.ndarray,
    scales: np.ndarray,
    initial_scale: float,
    dimension: int,
) -> BoundSeries:
    """
    Reduction around MetaGrad+C: 3√(V̊Γ) + 24B_TΓ + B_T.

    Γ = d·ln(27/25 + 2Σ_{t≤T−1} b_t²/(25 d B_{T−1}²)) + 2 ln(log₂⁺(√(Σ b_t²)/B) + 3) + 2,
    with b_t, B_t measured on the surrogate gradients and V̊ on the true ones.
    """
    _check_lengths(variance, magnitudes, scales)
    squares = np.cumsum(np.square(magnitudes))
    previous_scale = previous(scales, initial_scale)
    complexity = (
        dimension * np.log(27.0 / 25.0 + 2.0 * previous(squares, 0.0) / (25.0 * dimension * previous_scale ** 2))
        + 2.0 * np.log(log2_plus(np.sqrt(squares) / initial_scale) + 3.0)
        + 2.0
    )
    return BoundSeries(
        "metagrad+c-reduced", 3.0 * np.sqrt(variance * complexity) + 24.0 * scales * complexity + scales
    )


def reduced_restart_bound(
    variance: np.ndarray, magnitudes: np.ndarray, scales: np.ndarray, dimension: int
) -> BoundSeries:
    """
    Reduction around MetaGrad+L: 3√(V̊Γ) + 48B_TΓ + 8B_T with Γ the MetaGrad+L
    complexity of the surrogate gradients.
    """
    _check_lengths(variance, magnitudes, scales)
    complexity = metagrad_restart_complexity(magnitudes, scales, dimension)
    return BoundSeries(
        "metagrad+l-reduced", 3.0 * np.sqrt(variance * complexity) + 48.0 * scales * complexity + 8.0 * scales
    )


def hedge_bound(rounds: int, loss_range: float, num_experts: int, horizon: int) -> BoundSeries:
    """ln K/η + η·t·L²/8 for the fixed rate η = √(8 ln K/T)/L; equals L√(T/2·ln K) at t = T."""
    log_k = math.log(num_experts)
    eta = math.sqrt(8.0 * log_k / horizon) / loss_range
    t = np.arange(1, rounds + 1, dtype=float)
    return BoundSeries("hedge", log_k / eta + eta * t * loss_range ** 2 / 8.0)


def ogd_adanorm_bound(magnitudes: np.ndarray) -> BoundSeries:
    """√2·D·√(Σ‖g_t‖²), written with b_t = D‖g_t‖."""
    return BoundSeries("ogd-adanorm", np.sqrt(2.0 * np.cumsum(np.square(magnitudes))))
