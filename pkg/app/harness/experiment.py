"""
Running one learner on one environment and scoring the trace.

A run has two passes: the learner plays every round and reports its
diagnostics, then the best fixed comparator is computed offline and the
per-round regret, bound and slack columns are filled in from the ledger.
"""
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from app.learning.learners.base import LearnerConfig, OnlineLearner, RoundDiagnostics
from app.learning.learners.pool import LearnerPool
from app.learning.models.domains import Ball, DomainOracle
from app.learning.models.errors import IncompatibleAlgorithmError
from app.learning.models.observations import ComparatorSpec, Setting

from . import bounds
from .config import CLIPPED_ALGORITHMS, EXPERT_ALGORITHMS, Algorithm, ExperimentConfig
from .environments import BernsteinQuadratic, Environment, ExpertEnvironment, LinearEnvironment, build_environment
from .verification import InvariantMonitor

logger = logging.getLogger(__name__)

GRADIENT_MAPPING_TOLERANCE = 1e-10
COMPARATOR_STREAM = 1  # second PCG64 key of the random comparators


@dataclass
class TraceRow:
    t: int
    b_t: float
    B_t: float
    active_slaves: Optional[int]
    potential: Optional[float]
    restart: bool
    regret_best: float
    bound: Optional[float]
    slack: Optional[float]


@dataclass
class ExperimentTrace:
    """Per-round rows of one run plus its summary."""
    config: ExperimentConfig
    rows: List[TraceRow]
    comparator: ComparatorSpec
    summary: Dict[str, Any]
    violations: List[str] = field(default_factory=list)
    played: Optional[np.ndarray] = field(default=None, repr=False)
    environment: Optional[Environment] = field(default=None, repr=False)

    @property
    def label(self) -> str:
        return self.config.label

    @property
    def passed(self) -> bool:
        return not self.violations


@dataclass
class ComparatorResult:
    comparator: ComparatorSpec
    gradient_mapping_norm: float = 0.0


def build_learner(config: ExperimentConfig, environment: Environment) -> OnlineLearner:
    """Instantiate ``config.algorithm`` for ``environment``; reject mismatched pairs."""
    algorithm = config.algorithm
    wants_experts = algorithm in EXPERT_ALGORITHMS
    if wants_experts != (environment.setting == Setting.EXPERTS):
        raise IncompatibleAlgorithmError(
            f"{algorithm.value} cannot run on the {environment.setting.value} environment {environment.spec.kind.value}"
        )

    learner_config = LearnerConfig(
        setting=environment.setting.value,
        size=environment.size,
        initial_scale=config.initial_scale,
    )
    if algorithm == Algorithm.HEDGE:
        learner_config.horizon = environment.horizon
        learner_config.loss_range = config.hedge_range if config.hedge_range is not None else environment.loss_range
    elif algorithm in {Algorithm.METAGRAD_C, Algorithm.METAGRAD_L}:
        domain = environment.domain
        if not isinstance(domain, Ball) or np.any(domain.center != 0.0):
            raise IncompatibleAlgorithmError(
                f"{algorithm.value} needs a ball centred at the origin, got {domain.kind}; "
                f"use {algorithm.value}-reduced"
            )
        learner_config.diameter = domain.diameter
    elif not wants_experts:
        learner_config.domain = environment.domain
        learner_config.diameter = environment.domain.diameter

    return LearnerPool().create_learner(algorithm.value, learner_config)


def projected_gradient_descent(
    gradient: Callable[[np.ndarray], np.ndarray],
    domain: DomainOracle,
    start: np.ndarray,
    smoothness: Optional[float] = None,
    tolerance: float = GRADIENT_MAPPING_TOLERANCE,
    max_iterations: int = 200,
) -> Tuple[np.ndarray, float]:
    """
    Minimize a convex function over ``domain``; returns (point, gradient-mapping norm).

    Steps are 1/L for an L-smooth objective and 1/√k otherwise.
    """
    point = domain.project(start)
    mapping_norm = math.inf
    for k in range(1, max_iterations + 1):
        step = 1.0 / smoothness if smoothness else 1.0 / math.sqrt(k)
        candidate = domain.project(point - step * gradient(point))
        mapping_norm = float(np.linalg.norm(point - candidate)) / step
        point = candidate
        if mapping_norm <= tolerance * max(1.0, smoothness or 1.0):
            break
    return point, mapping_norm


def compute_offline_comparator(environment: Environment, rounds: Optional[int] = None) -> ComparatorResult:
    """Best fixed expert or point in hindsight over the first ``rounds`` rounds."""
    rounds = environment.horizon if rounds is None else rounds
    if rounds < 1:
        raise ValueError("cannot compute a comparator for an empty trace")

    if isinstance(environment, ExpertEnvironment):
        best = int(np.argmin(environment.cumulative_losses(rounds)))
        return ComparatorResult(ComparatorSpec.single_expert(best, environment.size))
    if isinstance(environment, LinearEnvironment):
        point = environment.domain.linear_minimizer(environment.cumulative_gradient(rounds))
        return ComparatorResult(ComparatorSpec.point(point, environment.domain))
    if isinstance(environment, BernsteinQuadratic):
        point, mapping_norm = projected_gradient_descent(
            lambda w: environment.sum_gradient(w, rounds),
            environment.domain,
            environment.domain.center,
            smoothness=environment.smoothness(rounds),
        )
        return ComparatorResult(ComparatorSpec.point(point, environment.domain), mapping_norm)
    raise ValueError(f"No offline comparator for {type(environment).__name__}")


def random_comparators(domain: DomainOracle, count: int, seed: int) -> List[ComparatorSpec]:
    """
    ``count`` points drawn uniformly from the enclosing ball of ``domain`` and
    projected onto it. On a ball the draw is uniform over the domain itself.
    """
    rng = np.random.Generator(np.random.PCG64([seed, COMPARATOR_STREAM]))
    directions = rng.standard_normal((count, domain.dimension))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = domain.enclosing_radius * rng.uniform(size=count) ** (1.0 / domain.dimension)
    points = domain.center + directions * radii[:, None]
    return [ComparatorSpec.point(domain.project(point), domain) for point in points]


def true_regret(environment: Environment, played: np.ndarray, comparator: ComparatorSpec, rounds: int) -> float:
    """Σ_{t≤rounds} f_t(played_t) − f_t(comparator), on the actual losses."""
    return math.fsum(
        environment.loss(t, played[t - 1]) - environment.loss(t, comparator.vector) for t in range(1, rounds + 1)
    )


def _kl_to_prior(learner: OnlineLearner, comparator: ComparatorSpec) -> float:
    prior = learner.config.prior
    if prior is None:
        prior = np.full(learner.size, 1.0 / learner.size)
    return bounds.kl_divergence(comparator.vector, prior)


def _first_nonzero(scales: np.ndarray) -> float:
    nonzero = scales[scales > 0]
    return float(nonzero[0]) if nonzero.size else 0.0


def clipped_regret_bound(
    config: ExperimentConfig,
    learner: OnlineLearner,
    comparator: ComparatorSpec,
    magnitudes: np.ndarray,
    scales: np.ndarray,
) -> Optional[bounds.BoundSeries]:
    """Bound series on the clipped regret of squint+c and metagrad+c; None for the others."""
    algorithm = config.algorithm
    if algorithm not in {Algorithm.SQUINT_C, Algorithm.METAGRAD_C}:
        return None
    series = learner.ledger.series(comparator)
    if algorithm == Algorithm.SQUINT_C:
        return bounds.squint_clipped_bound(
            series.clipped_variance, magnitudes, scales, config.initial_scale, _kl_to_prior(learner, comparator)
        )
    return bounds.metagrad_clipped_bound(series.clipped_variance, magnitudes, scales, config.initial_scale, learner.size)


def regret_bound(
    config: ExperimentConfig,
    learner: OnlineLearner,
    environment: Environment,
    comparator: ComparatorSpec,
    magnitudes: np.ndarray,
    scales: np.ndarray,
) -> Optional[bounds.BoundSeries]:
    """Bound series on the regret column for ``comparator``; None if none applies."""
    algorithm = config.algorithm
    clipped = clipped_regret_bound(config, learner, comparator, magnitudes, scales)
    if clipped is not None:
        # unclipped regret exceeds the clipped one by at most B_T − B
        return bounds.BoundSeries(clipped.name, clipped.values + (scales - config.initial_scale))
    series = learner.ledger.series(comparator)
    if algorithm == Algorithm.SQUINT_L:
        return bounds.squint_restart_bound(series.variance, magnitudes, scales, _kl_to_prior(learner, comparator))
    if algorithm == Algorithm.METAGRAD_L:
        return bounds.metagrad_restart_bound(series.variance, magnitudes, scales, learner.size)
    if algorithm == Algorithm.METAGRAD_C_REDUCED:
        return bounds.reduced_clipped_bound(series.variance, magnitudes, scales, config.initial_scale, learner.size)
    if algorithm == Algorithm.METAGRAD_L_REDUCED:
        return bounds.reduced_restart_bound(series.variance, magnitudes, scales, learner.size)
    if algorithm == Algorithm.HEDGE:
        if config.hedge_range is not None:
            return None
        return bounds.hedge_bound(len(magnitudes), environment.loss_range, learner.size, environment.horizon)
    if algorithm == Algorithm.OGD_ADANORM:
        return bounds.ogd_adanorm_bound(magnitudes)
    return None


def _expert_comparators(size: int) -> List[ComparatorSpec]:
    return [ComparatorSpec.single_expert(k, size) for k in range(size)] + [ComparatorSpec.uniform(size)]


def run_experiment(config: ExperimentConfig, verify: bool = False, seed: Optional[int] = None) -> ExperimentTrace:
    """Play ``config`` to the horizon and score it. Deterministic given the seed."""
    if seed is not None:
        config = config.with_seed(seed)
    environment = build_environment(config.environment)
    learner = build_learner(config, environment)
    monitor = InvariantMonitor(config.tolerances) if verify else None
    check_domain = environment.domain if learner.setting == Setting.OCO and config.algorithm not in {
        Algorithm.METAGRAD_C, Algorithm.METAGRAD_L
    } else None

    logger.info(
        "starting %s: %s on %s (T=%d, seed=%d)",
        config.name, config.label, environment.spec.kind.value, environment.horizon, environment.spec.seed,
    )
    started = time.perf_counter()
    diagnostics: List[RoundDiagnostics] = []
    for t in range(1, environment.horizon + 1):
        learner.update(environment.observe(t, learner.predict()))
        report = learner.diagnostics(with_potential=config.track_potential)
        diagnostics.append(report)
        if monitor is not None:
            monitor.check_round(learner, t, report, check_domain)

    result = compute_offline_comparator(environment)
    comparator = result.comparator
    magnitudes = np.array([d.magnitude for d in diagnostics])
    scales = np.array([d.scale for d in diagnostics])
    series = learner.ledger.series(comparator)
    bound = regret_bound(config, learner, environment, comparator, magnitudes, scales)
    slack = bound.values - series.regret if bound is not None else None

    if learner.setting == Setting.EXPERTS:
        candidates = [(candidate.label, candidate) for candidate in _expert_comparators(learner.size)]
    else:
        extra = random_comparators(environment.domain, config.random_comparators, environment.spec.seed)
        candidates = [(comparator.label, comparator)] + [(f"random-{i}", point) for i, point in enumerate(extra)]

    min_slack_all = None
    min_clipped_slack = None
    if config.algorithm != Algorithm.HEDGE and bound is not None:
        slacks: List[float] = []
        clipped_slacks: List[float] = []
        for name, candidate in candidates:
            label = f"{config.label} vs {name}"
            candidate_series = learner.ledger.series(candidate)
            candidate_bound = regret_bound(config, learner, environment, candidate, magnitudes, scales)
            slacks.append(float(np.min(candidate_bound.values - candidate_series.regret)))
            clipped = clipped_regret_bound(config, learner, candidate, magnitudes, scales)
            if clipped is not None:
                clipped_slacks.append(float(np.min(clipped.values - candidate_series.clipped_regret)))
            if monitor is not None:
                monitor.check_slack(label, candidate_bound.values, candidate_series.regret)
                if clipped is not None:
                    monitor.check_slack(f"{label} (clipped)", clipped.values, candidate_series.clipped_regret)
        min_slack_all = min(slacks)
        min_clipped_slack = min(clipped_slacks) if clipped_slacks else None
    elif monitor is not None and bound is not None:
        monitor.check_slack(f"{config.label} vs {comparator.label}", bound.values, series.regret, config.tolerances.hedge)

    if monitor is not None:
        initial = config.initial_scale if config.algorithm in CLIPPED_ALGORITHMS else _first_nonzero(scales)
        comparators = _expert_comparators(learner.size)[:-1] if learner.setting == Setting.EXPERTS else [comparator]
        for candidate in comparators:
            candidate_series = learner.ledger.series(candidate)
            monitor.check_clipping(
                f"{config.label} vs {candidate.label}",
                candidate_series.regret, candidate_series.clipped_regret, scales, initial,
            )

    rows = [
        TraceRow(
            t=t,
            b_t=float(report.magnitude),
            B_t=float(report.scale),
            active_slaves=report.active_slaves,
            potential=report.potential,
            restart=report.restart,
            regret_best=float(series.regret[t - 1]),
            bound=float(bound.values[t - 1]) if bound is not None else None,
            slack=float(slack[t - 1]) if slack is not None else None,
        )
        for t, report in enumerate(diagnostics, start=1)
    ]
    played = learner.ledger.played_history()
    wall_time = time.perf_counter() - started
    summary = {
        "name": config.name,
        "algorithm": config.label,
        "environment": environment.spec.kind.value,
        "setting": environment.setting.value,
        "size": environment.size,
        "horizon": environment.horizon,
        "seed": environment.spec.seed,
        "comparator": comparator.label,
        "gradient_mapping_norm": result.gradient_mapping_norm,
        "final_regret": true_regret(environment, played, comparator, environment.horizon),
        "final_pseudo_regret": float(series.regret[-1]),
        "bound": rows[-1].bound,
        "slack": rows[-1].slack,
        "min_slack": float(np.min(slack)) if slack is not None else None,
        "min_slack_all_comparators": min_slack_all,
        "min_clipped_slack": min_clipped_slack,
        "comparators_checked": len(candidates) if min_slack_all is not None else 0,
        "lnln_clamped_rounds": bound.clamped_rounds if bound is not None else 0,
        "restart_count": sum(1 for report in diagnostics if report.restart),
        "restart_rounds": [row.t for row in rows if row.restart],
        "final_scale": float(scales[-1]),
        "verified": verify,
        "violations": list(monitor.violations) if monitor is not None else [],
        "wall_time_seconds": wall_time,
    }
    logger.info("finished %s in %.2fs: regret %.6g, slack %s", config.name, wall_time, summary["final_regret"], summary["slack"])
    return ExperimentTrace(
        config=config,
        rows=rows,
        comparator=comparator,
        summary=summary,
        violations=summary["violations"],
        played=played,
        environment=environment,
    )


def regret_growth_ratio(config: ExperimentConfig, horizon: int, seed: Optional[int] = None) -> Dict[str, float]:
    """
    Run 2T rounds and compare the true regret after T and after 2T rounds,
    each against the best fixed point of its own prefix.
    """
    environment = config.environment.model_copy(update={"horizon": 2 * horizon})
    trace = run_experiment(config.model_copy(update={"environment": environment}), seed=seed)
    first = true_regret(
        trace.environment, trace.played, compute_offline_comparator(trace.environment, horizon).comparator, horizon
    )
    second = true_regret(
        trace.environment, trace.played, compute_offline_comparator(trace.environment).comparator, 2 * horizon
    )
    return {"regret_T": first, "regret_2T": second, "ratio": second / first if first > 0 else math.inf}
