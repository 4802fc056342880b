import math
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from app.harness import bounds
from app.harness.config import EnvironmentSpec, load_config
from app.harness.environments import (
    BernsteinQuadratic,
    ScaleJumpExperts,
    build_environment,
    default_scale_jumps,
    scale_multipliers,
)
from app.harness.experiment import (
    build_learner,
    compute_offline_comparator,
    random_comparators,
    regret_growth_ratio,
    run_experiment,
    true_regret,
)
from app.harness.persistence import CSV_HEADER, load_summary, read_trace_csv, save_trace
from app.learning.models.domains import Ball, Simplex
from app.learning.models.errors import IncompatibleAlgorithmError
from app.learning.models.observations import ComparatorKind

from .conftest import make_config

CONFIG_DIR = Path(__file__).resolve().parents[2] / "configs"

# Config validation

def test_clipped_algorithms_need_initial_scale():
    with pytest.raises(ValidationError):
        make_config("squint+c", "scale-jump", 3, 10)
    with pytest.raises(ValidationError):
        make_config("metagrad+c-reduced", "simplex-linear", 3, 10)
    assert make_config("squint+c", "scale-jump", 3, 10, initial_scale=1.0).initial_scale == 1.0

def test_environment_spec_validation():
    with pytest.raises(ValidationError):
        EnvironmentSpec(kind="expert-bernoulli", size=1, horizon=10)
    with pytest.raises(ValidationError):
        EnvironmentSpec(kind="adversarial-signs", size=2, horizon=0)
    with pytest.raises(ValidationError):
        EnvironmentSpec(kind="adversarial-signs", size=2, horizon=10, scale_jumps={0: 10.0})
    with pytest.raises(ValidationError):
        EnvironmentSpec(kind="adversarial-signs", size=2, horizon=10, scale_jumps={5: -1.0})
    with pytest.raises(ValidationError):
        EnvironmentSpec(kind="adversarial-signs", size=2, horizon=10, bias=0.7)
    spec = EnvironmentSpec(kind="adversarial-signs", size=2, horizon=10, scale_jumps={"8": 100, "3": 10})
    assert list(spec.scale_jumps) == [3, 8]

def test_config_labels_and_seed_override():
    oracle = make_config("hedge", "expert-bernoulli", 2, 10)
    assert oracle.label == "hedge-oracle"
    assert make_config("hedge", "expert-bernoulli", 2, 10, hedge_range=0.5).label == "hedge"
    reseeded = oracle.with_seed(42)
    assert reseeded.environment.seed == 42
    assert oracle.environment.seed == 0

def test_shipped_configs_load():
    paths = sorted(CONFIG_DIR.glob("*.json"))
    assert len(paths) >= 10
    for path in paths:
        config = load_config(str(path))
        assert config.name == path.stem

# Environments

def test_scale_multipliers():
    np.testing.assert_array_equal(scale_multipliers(6, {2: 10.0, 4: 100.0}), [1, 10, 10, 100, 100, 100])
    np.testing.assert_array_equal(scale_multipliers(3, {5: 10.0}), [1, 1, 1])
    np.testing.assert_array_equal(scale_multipliers(3, None), [1, 1, 1])
    assert default_scale_jumps(3000) == {1000: 10.0, 2000: 100.0}

def test_scale_jump_environment_uses_default_schedule():
    environment = build_environment(EnvironmentSpec(kind="scale-jump", size=3, horizon=9))
    assert isinstance(environment, ScaleJumpExperts)
    np.testing.assert_array_equal(environment.multipliers, [1, 1, 10, 10, 10, 100, 100, 100, 100])
    assert environment.losses[:2].max() <= 1.0
    assert environment.loss_range <= 100.0

def test_environments_are_deterministic():
    for kind, size in [("scale-jump", 3), ("expert-bernoulli", 2), ("adversarial-signs", 3),
                       ("simplex-linear", 3), ("iid-bernstein-quadratic", 2)]:
        spec = EnvironmentSpec(kind=kind, size=size, horizon=20, seed=9)
        first, second = build_environment(spec), build_environment(spec)
        point = np.full(size, 1.0 / size)
        for t in (1, 7, 20):
            np.testing.assert_array_equal(first.observe(t, point), second.observe(t, point))
        other = build_environment(spec.model_copy(update={"seed": 10}))
        assert not all(np.array_equal(first.observe(t, point), other.observe(t, point)) for t in range(1, 21))

def test_environment_round_bounds():
    environment = build_environment(EnvironmentSpec(kind="adversarial-signs", size=2, horizon=5))
    with pytest.raises(ValueError):
        environment.observe(0, np.zeros(2))
    with pytest.raises(ValueError):
        environment.observe(6, np.zeros(2))

def test_adversarial_signs_have_unit_norm():
    environment = build_environment(EnvironmentSpec(kind="adversarial-signs", size=4, horizon=50))
    np.testing.assert_allclose(np.linalg.norm(environment.gradients, axis=1), np.ones(50))

def test_bernstein_quadratic_stream():
    environment = build_environment(EnvironmentSpec(kind="iid-bernstein-quadratic", size=3, horizon=100, radius=2.0))
    assert isinstance(environment, BernsteinQuadratic)
    assert not environment.is_linear
    assert np.all(np.linalg.norm(environment.targets, axis=1) <= 2.0)
    point = np.array([0.5, -0.5, 0.0])
    gradient = environment.observe(4, point)
    np.testing.assert_allclose(gradient, point - environment.targets[3])
    assert environment.loss(4, point) == pytest.approx(0.5 * float(gradient @ gradient))

# Offline comparator

def test_comparator_for_experts_is_best_expert():
    environment = build_environment(EnvironmentSpec(kind="scale-jump", size=4, horizon=300, bias=0.5))
    result = compute_offline_comparator(environment)
    assert result.comparator.kind == ComparatorKind.EXPERT
    assert int(np.argmax(result.comparator.vector)) == int(np.argmin(environment.cumulative_losses()))
    assert int(np.argmax(result.comparator.vector)) == 0

def test_comparator_for_linear_losses_on_ball():
    environment = build_environment(EnvironmentSpec(kind="adversarial-signs", size=3, horizon=40, radius=0.5))
    total = environment.cumulative_gradient()
    comparator = compute_offline_comparator(environment).comparator
    np.testing.assert_allclose(comparator.vector, -0.5 * total / np.linalg.norm(total))

def test_comparator_for_quadratic_is_weighted_mean():
    spec = EnvironmentSpec(kind="iid-bernstein-quadratic", size=3, horizon=60, scale_jumps={30: 10.0})
    environment = build_environment(spec)
    result = compute_offline_comparator(environment)
    expected = environment.multipliers @ environment.targets / environment.multipliers.sum()
    np.testing.assert_allclose(result.comparator.vector, expected, atol=1e-10)
    assert result.gradient_mapping_norm <= 1e-10 * environment.smoothness()

def test_comparator_beats_a_grid():
    environment = build_environment(EnvironmentSpec(kind="iid-bernstein-quadratic", size=2, horizon=30))
    comparator = compute_offline_comparator(environment).comparator.vector

    def total_loss(point):
        return sum(environment.loss(t, point) for t in range(1, 31))

    best = min(
        total_loss(np.array([x, y]))
        for x in np.linspace(-1, 1, 41)
        for y in np.linspace(-1, 1, 41)
        if x * x + y * y <= 1.0
    )
    assert total_loss(comparator) <= best + 1e-9

def test_comparator_needs_rounds():
    environment = build_environment(EnvironmentSpec(kind="adversarial-signs", size=2, horizon=5))
    with pytest.raises(ValueError):
        compute_offline_comparator(environment, rounds=0)

# Bounds

def test_hedge_bound_matches_closed_form():
    series = bounds.hedge_bound(100, 2.0, 4, 100)
    assert series.final() == pytest.approx(2.0 * math.sqrt(50.0 * math.log(4)))
    assert np.all(np.diff(series.values) > 0)

def test_simple_bound_helpers():
    np.testing.assert_array_equal(bounds.previous(np.array([1.0, 2.0, 3.0]), 0.5), [0.5, 1.0, 2.0])
    np.testing.assert_array_equal(bounds.safe_ratio(np.array([1.0, 2.0]), np.array([0.0, 4.0])), [0.0, 0.5])
    np.testing.assert_array_equal(bounds.log2_plus(np.array([0.5, 1.0, 8.0])), [0.0, 0.0, 3.0])
    assert bounds.kl_divergence(np.array([1.0, 0, 0, 0]), np.full(4, 0.25)) == pytest.approx(math.log(4))
    np.testing.assert_allclose(bounds.ogd_adanorm_bound(np.array([1.0, 1.0])).values, [math.sqrt(2), 2.0])

def test_squint_potential_ceiling():
    series = bounds.squint_potential_bound(np.array([1.0, 10.0, 10.0]), 1.0)
    np.testing.assert_allclose(series.values, [0.0, 0.0, math.log(10)])

def test_restart_bound_counts_clamped_rounds():
    ones = np.ones(5)
    series = bounds.squint_restart_bound(np.zeros(5), ones, ones)
    assert series.clamped_rounds == 3
    assert np.all(np.isfinite(series.values))
    assert np.all(np.diff(series.values) >= 0)

def test_bounds_reject_mismatched_inputs():
    with pytest.raises(ValueError):
        bounds.metagrad_restart_bound(np.zeros(3), np.ones(3), np.ones(2), 2)
    with pytest.raises(ValueError):
        bounds.squint_clipped_bound(np.zeros(0), np.zeros(0), np.zeros(0), 1.0)

def test_bounds_grow_with_dimension():
    ones = np.ones(10)
    low = bounds.metagrad_clipped_bound(ones, ones, ones, 1.0, 1)
    high = bounds.metagrad_clipped_bound(ones, ones, ones, 1.0, 10)
    assert np.all(high.values >= low.values)

# Experiments

def test_incompatible_pairs_are_rejected():
    environment = build_environment(EnvironmentSpec(kind="adversarial-signs", size=2, horizon=5))
    with pytest.raises(IncompatibleAlgorithmError):
        build_learner(make_config("squint+l", "adversarial-signs", 2, 5), environment)
    experts = build_environment(EnvironmentSpec(kind="expert-bernoulli", size=2, horizon=5))
    with pytest.raises(IncompatibleAlgorithmError):
        build_learner(make_config("ogd-adanorm", "expert-bernoulli", 2, 5), experts)
    simplex = build_environment(EnvironmentSpec(kind="simplex-linear", size=3, horizon=5))
    with pytest.raises(IncompatibleAlgorithmError):
        build_learner(make_config("metagrad+l", "simplex-linear", 3, 5), simplex)

def test_hedge_oracle_respects_its_bound():
    trace = run_experiment(make_config("hedge", "expert-bernoulli", 2, 400, seed=7), verify=True)
    assert trace.summary["algorithm"] == "hedge-oracle"
    assert trace.summary["min_slack"] >= 0.0
    assert trace.passed, trace.violations

def test_mistuned_hedge_has_no_bound():
    trace = run_experiment(make_config("hedge", "expert-bernoulli", 2, 50, hedge_range=0.01))
    assert trace.summary["bound"] is None
    assert trace.summary["slack"] is None
    assert all(row.bound is None for row in trace.rows)

@pytest.mark.parametrize("algorithm,kind,size,overrides", [
    ("squint+c", "scale-jump", 3, {"initial_scale": 1.0}),
    ("squint+l", "scale-jump", 3, {}),
    ("squint+l", "expert-bernoulli", 4, {}),
    ("metagrad+c", "adversarial-signs", 2, {"initial_scale": 0.5}),
    ("metagrad+l", "adversarial-signs", 3, {"environment": {"scale_jumps": {50: 10.0, 100: 100.0}}}),
    ("metagrad+l", "iid-bernstein-quadratic", 2, {}),
    ("metagrad+c-reduced", "simplex-linear", 3, {"initial_scale": 1.0}),
    ("metagrad+l-reduced", "simplex-linear", 3, {}),
    ("ogd-adanorm", "iid-bernstein-quadratic", 2, {}),
])
def test_verified_runs_pass(algorithm, kind, size, overrides):
    trace = run_experiment(make_config(algorithm, kind, size, 150, **overrides), verify=True)
    assert trace.passed, trace.violations
    assert len(trace.rows) == 150
    assert trace.summary["verified"]
    assert trace.summary["slack"] >= 0.0
    assert trace.summary["min_slack_all_comparators"] >= 0.0
    if algorithm.endswith("+c"):
        assert trace.summary["min_clipped_slack"] >= 0.0

def test_restarts_show_up_in_trace():
    trace = run_experiment(make_config("squint+l", "scale-jump", 3, 300, seed=2))
    restarts = [row.t for row in trace.rows if row.restart]
    assert trace.summary["restart_rounds"] == restarts
    assert trace.summary["restart_count"] == len(restarts)
    assert trace.rows[0].active_slaves is None
    assert trace.summary["final_scale"] == trace.rows[-1].B_t

def test_true_regret_matches_pseudo_regret_for_linear_losses():
    trace = run_experiment(make_config("metagrad+l", "adversarial-signs", 2, 100))
    assert trace.summary["final_regret"] == pytest.approx(trace.summary["final_pseudo_regret"], abs=1e-9)
    assert true_regret(trace.environment, trace.played, trace.comparator, 1) == pytest.approx(trace.rows[0].regret_best)

def test_seed_override():
    trace = run_experiment(make_config("squint+l", "expert-bernoulli", 2, 20), seed=5)
    assert trace.summary["seed"] == 5

def test_random_comparators_lie_in_the_domain():
    ball = Ball(3, radius=2.0, center=[1.0, 0.0, 0.0])
    points = random_comparators(ball, 20, seed=4)
    assert len(points) == 20
    assert all(ball.contains(point.vector) for point in points)
    assert all(point.kind == ComparatorKind.POINT for point in points)
    again = random_comparators(ball, 20, seed=4)
    np.testing.assert_array_equal(np.vstack([p.vector for p in points]), np.vstack([p.vector for p in again]))

    simplex = Simplex(4)
    assert all(simplex.contains(point.vector) for point in random_comparators(simplex, 10, seed=4))
    assert random_comparators(simplex, 0, seed=4) == []

def test_metagrad_c_respects_clipped_bound_for_random_points():
    config = make_config(
        "metagrad+c", "adversarial-signs", 3, 300, seed=1, initial_scale=0.05,
        environment={"scale_jumps": {100: 10.0, 200: 100.0}},
    )
    trace = run_experiment(config, verify=True)
    assert trace.passed, trace.violations
    assert trace.summary["comparators_checked"] == 21
    assert trace.summary["min_clipped_slack"] >= 0.0
    assert trace.summary["min_slack_all_comparators"] >= 0.0

def test_squint_c_respects_clipped_bound_for_every_expert():
    trace = run_experiment(make_config("squint+c", "scale-jump", 4, 300, seed=3, initial_scale=0.5), verify=True)
    assert trace.passed, trace.violations
    assert trace.summary["comparators_checked"] == 5
    assert trace.summary["min_clipped_slack"] >= 0.0

def test_unclipped_variants_report_no_clipped_slack():
    trace = run_experiment(make_config("metagrad+l", "adversarial-signs", 2, 50, random_comparators=3))
    assert trace.summary["comparators_checked"] == 4
    assert trace.summary["min_clipped_slack"] is None
    assert trace.summary["min_slack_all_comparators"] >= 0.0

def test_trace_files_are_deterministic(tmp_path):
    config = make_config("metagrad+l", "adversarial-signs", 2, 80, environment={"scale_jumps": {40: 10.0}})
    first = save_trace(run_experiment(config), str(tmp_path / "a"))
    second = save_trace(run_experiment(config), str(tmp_path / "b"))
    assert Path(first["csv"]).read_bytes() == Path(second["csv"]).read_bytes()
    lines = Path(first["csv"]).read_text().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == 81
    assert load_summary(first["summary"])["name"] == config.name

def test_trace_csv_leaves_unreported_cells_empty(tmp_path):
    trace = run_experiment(make_config("hedge", "expert-bernoulli", 2, 10, hedge_range=0.5))
    rows = read_trace_csv(save_trace(trace, str(tmp_path))["csv"])
    assert len(rows) == 10
    assert rows[0]["active_slaves"] is None
    assert rows[0]["potential"] is None
    assert rows[0]["bound"] is None
    assert rows[0]["restart"] == "0"
    assert int(rows[-1]["t"]) == 10

@pytest.mark.slow
def test_metagrad_fast_rate_on_bernstein_stream():
    metagrad = regret_growth_ratio(make_config("metagrad+l", "iid-bernstein-quadratic", 3, 1, seed=5), 8000)
    ogd = regret_growth_ratio(make_config("ogd-adanorm", "iid-bernstein-quadratic", 3, 1, seed=5), 8000)
    assert metagrad["regret_T"] > 0.0
    assert metagrad["ratio"] <= 1.5
    assert ogd["ratio"] >= 1.3

@pytest.mark.slow
@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_configs_verify(path):
    trace = run_experiment(load_config(str(path)), verify=True)
    assert trace.passed, trace.violations
