"""
Randomized property checks for the learners, and the per-round monitor
behind ``run --verify``.

Each suite returns one CheckResult per property; the CLI prints them as a
table and the tests call the same functions with fewer instances.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np
from scipy import integrate, special

from app.learning.learners.base import LearnerConfig, OnlineLearner, RoundDiagnostics, walk_learners
from app.learning.learners.metagrad_c import MetaGradC
from app.learning.learners.restart import InnerKind, RestartSupervisor
from app.learning.learners.squint_c import SquintC
from app.learning.models.domains import DomainOracle
from app.learning.models.ledger import RegretLedger
from app.learning.models.metagrad import MetaGradState, metagrad_potential, metagrad_round
from app.learning.models.observations import ComparatorSpec, Setting
from app.learning.models.projection import BallProjector, reference_projection
from app.learning.models.scale import CompensatedSum, ScaleTracker
from app.learning.models.squint import SquintState, squint_potential, squint_round, squint_weights

from .config import Tolerances

logger = logging.getLogger(__name__)


@dataclass
class CheckResult:
    suite: str
    check: str
    passed: bool
    instances: int
    detail: str = ""


def _result(suite: str, check: str, instances: int, failures: List[str]) -> CheckResult:
    detail = "" if not failures else f"{len(failures)} failures, first: {failures[0]}"
    if failures:
        logger.warning("%s/%s failed: %s", suite, check, detail)
    return CheckResult(suite, check, not failures, instances, detail)


def _jump_multipliers(rng: np.random.Generator, horizon: int) -> np.ndarray:
    multipliers = np.ones(horizon)
    if rng.uniform() < 0.5:
        multipliers[horizon // 3:] = 10.0
        multipliers[2 * horizon // 3:] = 100.0
    return multipliers


class InvariantMonitor:
    """Collects invariant violations of one experiment run."""

    def __init__(self, tolerances: Optional[Tolerances] = None):
        self.tolerances = tolerances if tolerances is not None else Tolerances()
        self.violations: List[str] = []
        self._last_scale = 0.0

    def _fail(self, message: str) -> None:
        logger.warning("invariant violated: %s", message)
        self.violations.append(message)

    def check_round(
        self,
        learner: OnlineLearner,
        t: int,
        diagnostics: RoundDiagnostics,
        domain: Optional[DomainOracle] = None,
    ) -> None:
        if diagnostics.scale < self._last_scale:
            self._fail(f"round {t}: scale decreased from {self._last_scale!r} to {diagnostics.scale!r}")
        self._last_scale = diagnostics.scale

        for current in walk_learners(learner):
            if isinstance(current, SquintC):
                self._check_squint(t, current.state)
            elif isinstance(current, MetaGradC):
                self._check_metagrad(t, current.state)

        if domain is not None and not domain.contains(learner.predict(), self.tolerances.ball * max(1.0, domain.diameter)):
            self._fail(f"round {t}: prediction left the {domain.kind}")

    def _check_squint(self, t: int, state: SquintState) -> None:
        potential = squint_potential(state)
        ceiling = math.log(state.scale.previous_max / state.scale.initial_scale)
        if potential > ceiling + self.tolerances.potential:
            self._fail(f"round {t}: squint potential {potential!r} exceeds ln(B_(T-1)/B) = {ceiling!r}")

    def _check_metagrad(self, t: int, state: MetaGradState) -> None:
        potential = metagrad_potential(state)
        if potential > 1.0 + self.tolerances.potential:
            self._fail(f"round {t}: metagrad potential {potential!r} exceeds 1")
        allowed = int(math.floor(math.log2(state.rounds))) if state.rounds >= 1 else 0
        if len(state.active) > allowed:
            self._fail(f"round {t}: {len(state.active)} active slaves after {state.rounds} rounds, at most {allowed}")
        limit = 0.5 * state.diameter * (1.0 + self.tolerances.ball)
        for slave in state.active:
            if np.linalg.norm(slave.mean) > limit:
                self._fail(f"round {t}: slave {slave.index} left the ball")
        if np.linalg.norm(state.prediction) > limit:
            self._fail(f"round {t}: master prediction left the ball")

    def check_clipping(
        self,
        label: str,
        regret: np.ndarray,
        clipped_regret: np.ndarray,
        scales: np.ndarray,
        initial_scale: float,
    ) -> None:
        """R − R̄ ≤ B_t − B_0 at every round."""
        allowance = np.maximum(scales - initial_scale, 0.0) + self.tolerances.clipping * (1.0 + scales)
        excess = (regret - clipped_regret) - allowance
        if np.any(excess > 0):
            t = int(np.argmax(excess)) + 1
            self._fail(f"{label}: clipping identity fails at round {t} by {float(excess[t - 1])!r}")

    def check_slack(self, label: str, bound: np.ndarray, regret: np.ndarray, relative: float = 0.0) -> None:
        slack = bound * (1.0 + relative) - regret
        allowance = self.tolerances.bound * (1.0 + np.abs(bound))
        if np.any(slack < -allowance):
            t = int(np.argmin(slack + allowance)) + 1
            self._fail(f"{label}: bound violated at round {t}, slack {float(slack[t - 1])!r}")

    @property
    def passed(self) -> bool:
        return not self.violations


def check_squint_potential(instances: int = 100, seed: int = 0) -> List[CheckResult]:
    """Potential ceiling and clipping identity of Squint+C on random expert streams."""
    rng = np.random.Generator(np.random.PCG64(seed))
    tolerances = Tolerances()
    potential_failures: List[str] = []
    clipping_failures: List[str] = []
    for instance in range(instances):
        num_experts = int(rng.choice([2, 5, 16]))
        horizon = int(rng.integers(20, 201))
        initial_scale = float(rng.uniform(0.2, 1.0))
        losses = rng.uniform(0.0, 1.0, size=(horizon, num_experts)) * _jump_multipliers(rng, horizon)[:, None]
        state = SquintState.create(num_experts, initial_scale)
        ledger = RegretLedger(Setting.EXPERTS, num_experts)
        for t in range(horizon):
            squint_round(state, losses[t], ledger)
            potential = squint_potential(state)
            ceiling = math.log(state.scale.previous_max / initial_scale)
            if potential > ceiling + tolerances.potential:
                potential_failures.append(f"instance {instance} round {t + 1}: {potential!r} > {ceiling!r}")
                break
        excess = ledger.cumulative_regret - ledger.cumulative_clipped_regret
        allowance = state.scale.current_max - initial_scale + tolerances.clipping * (1.0 + state.scale.current_max)
        if np.any(excess > allowance):
            clipping_failures.append(f"instance {instance}: R - R_clipped = {float(excess.max())!r}")
    return [
        _result("squint", "potential <= ln(B_(T-1)/B)", instances, potential_failures),
        _result("squint", "clipping identity", instances, clipping_failures),
    ]


def quadrature_weights(state: SquintState) -> np.ndarray:
    """Squint weights with every integral evaluated by adaptive quadrature."""
    upper = 1.0 / (2.0 * state.scale.current_max)
    log_integrals = []
    for regret, variance in zip(state.clipped_regret, state.clipped_variance):
        if variance > 0:
            peak = min(max(regret / (2.0 * variance), 0.0), upper)
        else:
            peak = upper if regret > 0 else 0.0
        shift = peak * regret - peak * peak * variance

        def integrand(eta: float, r: float = regret, v: float = variance, s: float = shift) -> float:
            return math.exp(eta * r - eta * eta * v - s)

        points = [peak] if 0.0 < peak < upper else None
        value, _ = integrate.quad(integrand, 0.0, upper, points=points, epsabs=0.0, epsrel=1e-13, limit=200)
        log_integrals.append(shift + math.log(value))
    return special.softmax(np.log(state.prior) + np.asarray(log_integrals))


def check_squint_quadrature(instances: int = 200, seed: int = 0) -> List[CheckResult]:
    rng = np.random.Generator(np.random.PCG64(seed))
    failures: List[str] = []
    for instance in range(instances):
        num_experts = int(rng.integers(2, 9))
        regret = rng.uniform(-500.0, 500.0, size=num_experts)
        variance = rng.uniform(0.0, 500.0, size=num_experts)
        variance[rng.uniform(size=num_experts) < 0.1] = 0.0
        state = SquintState(
            prior=np.full(num_experts, 1.0 / num_experts),
            scale=ScaleTracker(initial_scale=float(rng.uniform(0.5, 2.0))),
            _regret=CompensatedSum(regret),
            _variance=CompensatedSum(variance),
        )
        gap = float(np.max(np.abs(squint_weights(state) - quadrature_weights(state))))
        if gap > 1e-8:
            failures.append(f"instance {instance}: weights differ by {gap:.3e}")
    return [_result("squint", "closed form matches quadrature", instances, failures)]


def check_metagrad_invariants(instances: int = 100, seed: int = 0) -> List[CheckResult]:
    """Potential ≤ 1, slave count, ball membership and weight bookkeeping of MetaGrad+C."""
    rng = np.random.Generator(np.random.PCG64(seed))
    tolerances = Tolerances()
    failures: Dict[str, List[str]] = {"potential": [], "slaves": [], "ball": [], "weights": [], "clipping": []}
    for instance in range(instances):
        dimension = int(rng.choice([1, 2, 5, 16]))
        horizon = int(rng.integers(20, 301))
        diameter = float(rng.uniform(0.5, 4.0))
        initial_scale = float(rng.uniform(0.1, 2.0))
        gradients = rng.normal(size=(horizon, dimension)) * _jump_multipliers(rng, horizon)[:, None]
        gradients[rng.uniform(size=horizon) < 0.05] = 0.0
        state = MetaGradState.create(dimension, diameter, initial_scale)
        ledger = RegretLedger(Setting.OCO, dimension)
        for t in range(horizon):
            metagrad_round(state, gradients[t], ledger)
            potential = metagrad_potential(state)
            if potential > 1.0 + tolerances.potential:
                failures["potential"].append(f"instance {instance} round {t + 1}: {potential!r}")
            if len(state.active) > int(math.floor(math.log2(state.rounds))):
                failures["slaves"].append(f"instance {instance} round {t + 1}: {len(state.active)} active")
            limit = 0.5 * diameter * (1.0 + tolerances.ball)
            if any(np.linalg.norm(slave.mean) > limit for slave in state.active):
                failures["ball"].append(f"instance {instance} round {t + 1}")
        for slave in state.active:
            expected = math.log(state.grid.prior(slave.index)) - math.fsum(slave.surrogate_history)
            if abs(slave.log_weight - expected) > 1e-9 * max(1.0, abs(expected)):
                failures["weights"].append(f"instance {instance} slave {slave.index}")

        direction = rng.normal(size=dimension)
        comparator = ComparatorSpec.point(direction / np.linalg.norm(direction) * 0.5 * diameter * rng.uniform())
        series = ledger.series(comparator)
        excess = series.regret - series.clipped_regret
        allowance = state.scale.current_max - initial_scale + tolerances.clipping * (1.0 + state.scale.current_max)
        if np.any(excess > allowance):
            failures["clipping"].append(f"instance {instance}: {float(excess.max())!r}")
    return [
        _result("metagrad", "potential <= 1", instances, failures["potential"]),
        _result("metagrad", "active slaves <= floor(log2 t)", instances, failures["slaves"]),
        _result("metagrad", "slave means inside the ball", instances, failures["ball"]),
        _result("metagrad", "log weights match surrogate history", instances, failures["weights"]),
        _result("metagrad", "clipping identity", instances, failures["clipping"]),
    ]


def random_projection_instance(rng: np.random.Generator, dimension: int):
    """A random (projector, eta, gram, point outside the ball) quadruple."""
    diameter = float(rng.uniform(0.5, 5.0))
    eta = float(rng.uniform(0.01, 1.0))
    factor = rng.normal(size=(dimension, int(rng.integers(1, dimension + 2))))
    gram = factor @ factor.T * float(rng.uniform(0.1, 10.0))
    direction = rng.normal(size=dimension)
    point = direction / np.linalg.norm(direction) * 0.5 * diameter * float(rng.uniform(1.01, 10.0))
    return BallProjector(diameter).diagonalize(gram), eta, gram, point


def check_projection(instances: int = 500, seed: int = 0) -> List[CheckResult]:
    rng = np.random.Generator(np.random.PCG64(seed))
    failures: Dict[str, List[str]] = {"reference": [], "residual": [], "iterations": []}
    for instance in range(instances):
        dimension = int(rng.choice([1, 2, 3, 5]))
        projector, eta, gram, point = random_projection_instance(rng, dimension)
        projected, result = projector.project_with_result(point, eta)
        metric = np.eye(dimension) / projector.diameter ** 2 + 2.0 * eta * eta * gram
        expected = reference_projection(metric, point, projector.radius)
        gap = float(np.max(np.abs(projected - expected)))
        if gap > 1e-6:
            failures["reference"].append(f"instance {instance}: off by {gap:.3e}")
        if result is None:
            continue
        if result.residual > 1e-10 * projector.diameter ** 2:
            failures["residual"].append(f"instance {instance}: residual {result.residual:.3e}")
        if result.iterations > 50:
            failures["iterations"].append(f"instance {instance}: {result.iterations} iterations")
    return [
        _result("projection", "matches brute-force minimizer", instances, failures["reference"]),
        _result("projection", "Newton residual <= 1e-10 D^2", instances, failures["residual"]),
        _result("projection", "Newton iterations <= 50", instances, failures["iterations"]),
    ]


def run_stream(learner: OnlineLearner, observations: np.ndarray) -> np.ndarray:
    """Feed a fixed stream and return the predictions played at every round."""
    played = []
    for observation in observations:
        played.append(learner.predict())
        learner.update(observation)
    return np.vstack(played)


def _restart_learner(kind: InnerKind, size: int) -> RestartSupervisor:
    setting = Setting.EXPERTS if kind == InnerKind.SQUINT else Setting.OCO
    return RestartSupervisor(LearnerConfig(setting=setting.value, size=size), kind)


def check_scale_freeness(instances: int = 10, seed: int = 0, factors=(1e-3, 1e3)) -> List[CheckResult]:
    rng = np.random.Generator(np.random.PCG64(seed))
    failures: List[str] = []
    for instance in range(instances):
        kind = InnerKind.SQUINT if instance % 2 == 0 else InnerKind.METAGRAD
        size = 3
        horizon = 200
        if kind == InnerKind.SQUINT:
            stream = rng.uniform(0.0, 1.0, size=(horizon, size))
        else:
            stream = rng.normal(size=(horizon, size))
        stream *= _jump_multipliers(rng, horizon)[:, None]

        baseline = _restart_learner(kind, size)
        expected = run_stream(baseline, stream)
        for factor in factors:
            scaled = _restart_learner(kind, size)
            played = run_stream(scaled, factor * stream)
            gap = float(np.max(np.abs(played - expected)))
            if gap > 1e-9 or scaled.restart_rounds != baseline.restart_rounds:
                failures.append(
                    f"{kind.value} instance {instance}, factor {factor:g}: gap {gap:.3e}, "
                    f"restarts {scaled.restart_rounds} vs {baseline.restart_rounds}"
                )
    return [_result("restart", "scale-free predictions and restarts", instances, failures)]


def check_geometric_restarts(horizon: int = 40) -> List[CheckResult]:
    """Restarts on b_t = 2^t stay within 2 + log2(B_T/B_1)."""
    failures: List[str] = []
    for kind in (InnerKind.SQUINT, InnerKind.METAGRAD):
        learner = _restart_learner(kind, 2)
        for t in range(1, horizon + 1):
            learner.update(np.array([0.0, math.ldexp(1.0, t)]))
        tracker = learner.global_tracker
        allowed = 2.0 + math.log2(tracker.current_max / tracker.initial_scale)
        if len(learner.restart_events) > allowed:
            failures.append(f"{kind.value}: {len(learner.restart_events)} restarts, allowed {allowed:.1f}")
    return [_result("restart", "restarts <= 2 + log2(B_T/B_1)", 2, failures)]


def squint_suite(instances: int, seed: int = 0) -> List[CheckResult]:
    return check_squint_potential(instances, seed) + check_squint_quadrature(2 * instances, seed)


def metagrad_suite(instances: int, seed: int = 0) -> List[CheckResult]:
    return check_metagrad_invariants(instances, seed)


def projection_suite(instances: int, seed: int = 0) -> List[CheckResult]:
    return check_projection(5 * instances, seed)


def restart_suite(instances: int, seed: int = 0) -> List[CheckResult]:
    return check_scale_freeness(max(2, instances // 10), seed) + check_geometric_restarts()


SUITES: Dict[str, Callable[..., List[CheckResult]]] = {
    "squint": squint_suite,
    "metagrad": metagrad_suite,
    "projection": projection_suite,
    "restart": restart_suite,
}


def run_suite(name: str, instances: int = 100, seed: int = 0) -> List[CheckResult]:
    if name not in SUITES:
        raise ValueError(f"Unknown suite: {name}; choose from {sorted(SUITES)}")
    if instances < 1:
        raise ValueError(f"instances must be positive, got {instances}")
    logger.info("running the %s suite with %d instances", name, instances)
    return SUITES[name](instances, seed)
