"""
Mahalanobis projection onto the centred ball of diameter D.

For a metric A = I/D² + 2η²G with G = QΛQᵀ, the minimizer of
(v − u)ᵀA(v − u) over ‖u‖ ≤ D/2 is u = Q diag(1/(x + 2η²λ)) c with c = QᵀAv
and x ≥ 1/D² the root of ρ(x) = Σ c_i²/(x + 2η²λ_i)² = D²/4.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import NewtonConvergenceError, ProjectionError

logger = logging.getLogger(__name__)

EIGENVALUE_FLOOR = -1e-10
Eigensolver = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]
ScalarMap = Callable[[float], Tuple[float, float]]


@dataclass(frozen=True)
class NewtonResult:
    root: float
    residual: float
    iterations: int
    bisections: int
    bracket: Tuple[float, float]


def newton_root(
    rho: ScalarMap,
    target: float,
    bracket: Tuple[float, float],
    tolerance: float = 1e-12,
    max_iters: int = 50,
) -> NewtonResult:
    """
    Solve rho(x) = target for a strictly decreasing convex rho.

    ``rho`` returns (value, derivative). Newton is applied to the secular form
    rho(x)^(-1/2) − target^(-1/2), which is increasing and close to linear, and
    any iterate that leaves the current bracket is replaced by the midpoint.
    Stops once |rho(x) − target| ≤ tolerance·target. Raises
    NewtonConvergenceError when the bracket shrinks to a few ulps or
    ``max_iters`` runs out before that.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    rho_lo, _ = rho(lo)
    rho_hi, _ = rho(hi)
    if not (lo < hi and rho_lo > target > rho_hi):
        raise ValueError(
            f"invalid bracket [{lo!r}, {hi!r}]: rho(lo) = {rho_lo!r}, rho(hi) = {rho_hi!r}, "
            f"target = {target!r}"
        )

    inverse_root_target = 1.0 / math.sqrt(target)
    x = lo
    value, slope = rho_lo, None
    bisections = 0
    for iteration in range(1, max_iters + 1):
        value, slope = rho(x)
        residual = value - target
        if abs(residual) <= tolerance * target:
            return NewtonResult(x, abs(residual), iteration, bisections, (lo, hi))
        if residual > 0:
            lo = x
        else:
            hi = x
        if hi - lo <= 4.0 * np.spacing(hi):
            other = hi if x == lo else lo
            other_value, _ = rho(other)
            if abs(other_value - target) <= tolerance * target:
                return NewtonResult(other, abs(other_value - target), iteration, bisections, (lo, hi))
            logger.debug("Newton bracket collapsed at x=%r with residual %.3e", x, residual)
            raise NewtonConvergenceError((lo, hi), abs(residual), iteration)

        secular = 1.0 / math.sqrt(value) - inverse_root_target
        secular_slope = -0.5 * slope * value ** -1.5
        candidate = x - secular / secular_slope if secular_slope > 0 else math.nan
        if not (lo < candidate < hi):
            candidate = 0.5 * (lo + hi)
            bisections += 1
        x = candidate

    value, _ = rho(x)
    raise NewtonConvergenceError((lo, hi), abs(value - target), max_iters)


def bisect_root(
    rho: ScalarMap, target: float, bracket: Tuple[float, float], iterations: int = 128
) -> float:
    """Plain bisection on a decreasing rho; the reference solver for tests."""
    lo, hi = bracket
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if rho(mid)[0] > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _eigh(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return np.linalg.eigh(matrix)


@dataclass(frozen=True)
class BallProjector:
    """
    Projection onto the ball of diameter ``diameter`` under the metric
    I/D² + 2η²G, for a fixed PSD matrix G held as its eigendecomposition.

    A projector built without a Gram matrix has G = 0. Use :meth:`diagonalize`
    to bind a new G; the eigensolver is injectable so an incremental
    rank-one updater can replace the full decomposition.
    """
    diameter: float
    newton_tolerance: float = 1e-12
    max_newton_iters: int = 50
    eigenvalues: Optional[np.ndarray] = None
    eigenbasis: Optional[np.ndarray] = None
    eigensolver: Eigensolver = field(default=_eigh, repr=False, compare=False)

    def __post_init__(self):
        if not self.diameter > 0:
            raise ValueError(f"Diameter must be positive, got {self.diameter}")

    @property
    def radius(self) -> float:
        return 0.5 * self.diameter

    def diagonalize(self, gram: np.ndarray) -> "BallProjector":
        gram = np.asarray(gram, dtype=float)
        gram = 0.5 * (gram + gram.T)
        eigenvalues, eigenbasis = self.eigensolver(gram)
        scale = max(1.0, float(np.max(np.abs(eigenvalues), initial=0.0)))
        if np.any(eigenvalues < EIGENVALUE_FLOOR * scale):
            raise ProjectionError(
                f"Gram matrix is not positive semidefinite: smallest eigenvalue {eigenvalues.min():.3e}",
                condition_number=float(np.linalg.cond(gram)) if gram.size else None,
            )
        return replace(self, eigenvalues=np.maximum(eigenvalues, 0.0), eigenbasis=eigenbasis)

    def _spectrum(self, dimension: int) -> Tuple[np.ndarray, np.ndarray]:
        if self.eigenvalues is None:
            return np.zeros(dimension), np.eye(dimension)
        return self.eigenvalues, self.eigenbasis

    def metric_eigenvalues(self, eta: float, dimension: int) -> np.ndarray:
        eigenvalues, _ = self._spectrum(dimension)
        return 1.0 / self.diameter ** 2 + 2.0 * eta * eta * eigenvalues

    def condition_number(self, eta: float, dimension: int) -> float:
        alpha = self.metric_eigenvalues(eta, dimension)
        return float(alpha.max() / alpha.min())

    def apply_inverse_metric(self, vector: np.ndarray, eta: float) -> np.ndarray:
        """(I/D² + 2η²G)^{-1} vector."""
        vector = np.asarray(vector, dtype=float)
        _, basis = self._spectrum(vector.size)
        alpha = self.metric_eigenvalues(eta, vector.size)
        return basis @ ((basis.T @ vector) / alpha)

    def project(self, point: np.ndarray, eta: float) -> np.ndarray:
        projected, _ = self.project_with_result(point, eta)
        return projected

    def project_with_result(self, point: np.ndarray, eta: float) -> Tuple[np.ndarray, Optional[NewtonResult]]:
        """Projection plus the Newton solve behind it (None when the point is already inside)."""
        point = np.asarray(point, dtype=float)
        if np.linalg.norm(point) <= self.radius:
            return point.copy(), None

        dimension = point.size
        eigenvalues, basis = self._spectrum(dimension)
        alpha = self.metric_eigenvalues(eta, dimension)
        if not np.all(alpha > 0) or not np.all(np.isfinite(alpha)):
            raise ProjectionError("metric is not positive definite", self.condition_number(eta, dimension))
        shifts = 2.0 * eta * eta * eigenvalues
        coefficients = alpha * (basis.T @ point)
        target = self.radius ** 2

        def rho(x: float) -> Tuple[float, float]:
            denominators = x + shifts
            ratios = coefficients / denominators
            return float(ratios @ ratios), float(-2.0 * (ratios * ratios) @ (1.0 / denominators))

        # rho(lo) = ‖point‖² and rho(hi) ≤ D²/16
        lo = 1.0 / self.diameter ** 2
        hi = 4.0 * float(np.linalg.norm(coefficients)) / self.diameter
        if rho(lo)[0] <= target:
            # outside only by rounding
            return point * (self.radius / float(np.linalg.norm(point))), None
        try:
            result = newton_root(rho, target, (lo, hi), self.newton_tolerance, self.max_newton_iters)
        except NewtonConvergenceError as exc:
            raise NewtonConvergenceError(
                exc.bracket, exc.residual, exc.iterations, self.condition_number(eta, dimension)
            ) from exc
        if result.bisections:
            logger.debug("projection needed %d bisection steps", result.bisections)
        return basis @ (coefficients / (result.root + shifts)), result


def project_ball(
    projector: BallProjector,
    unprojected: np.ndarray,
    eta: float,
    slave_gram: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Project ``unprojected`` under the metric I/D² + 2η²G of one slave.

    ``slave_gram`` is the slave's own G, the clipped-gradient outer products
    accumulated since it woke up. It is eigendecomposed directly rather than
    given as eigenvalues in a basis shared with the wake-time matrix. Without
    it the projector's current spectrum is used.
    """
    if slave_gram is not None:
        projector = projector.diagonalize(slave_gram)
    return projector.project(unprojected, eta)


def reference_projection(metric: np.ndarray, point: np.ndarray, radius: float, iterations: int = 200) -> np.ndarray:
    """
    Brute-force Mahalanobis projection for testing.

    Bisects the Lagrange multiplier μ of (A + μI)u = Av directly in the
    original basis, solving a dense linear system at every step.
    """
    point = np.asarray(point, dtype=float)
    if np.linalg.norm(point) <= radius:
        return point.copy()
    rhs = metric @ point
    identity = np.eye(point.size)

    def solve(mu: float) -> np.ndarray:
        return np.linalg.solve(metric + mu * identity, rhs)

    lo, hi = 0.0, 1.0
    while np.linalg.norm(solve(hi)) > radius:
        hi *= 2.0
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if np.linalg.norm(solve(mid)) > radius:
            lo = mid
        else:
            hi = mid
    return solve(hi)


def stationarity_angle(metric: np.ndarray, point: np.ndarray, projected: np.ndarray) -> float:
    """
    Angle between the objective gradient A(u − v) at the projection and −u.

    Zero when the Lagrangian of the ball-constrained problem is stationary.
    """
    gradient = metric @ (projected - point)
    a = gradient / np.linalg.norm(gradient)
    b = -projected / np.linalg.norm(projected)
    # half-angle form, accurate near zero
    return 2.0 * math.atan2(float(np.linalg.norm(a - b)), float(np.linalg.norm(a + b)))
