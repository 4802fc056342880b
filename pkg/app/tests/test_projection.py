import json

import numpy as np
import pytest

from app.harness.verification import check_projection, random_projection_instance
from app.learning.learners.base import LearnerConfig
from app.learning.learners.reduction import BallReduction, reduce_to_ball_round, surrogate_gradient, surrogate_loss
from app.learning.learners.restart import RestartSupervisor
from app.learning.models.domains import Ball, Box, Simplex, build_domain, euclidean_proj_simplex
from app.learning.models.errors import DimensionMismatchError, NewtonConvergenceError, ProjectionError
from app.learning.models.projection import (
    BallProjector,
    bisect_root,
    newton_root,
    project_ball,
    reference_projection,
    stationarity_angle,
)

def inverse_square(numerator):
    def rho(x):
        return numerator / (x * x), -2.0 * numerator / (x * x * x)
    return rho

def test_newton_root_examples():
    result = newton_root(inverse_square(1.0), 1.0, (0.5, 2.0))
    assert result.root == pytest.approx(1.0, rel=1e-12)
    assert result.iterations <= 3

    result = newton_root(inverse_square(25.0), 1.0, (1.0, 10.0))
    assert result.root == pytest.approx(5.0, rel=1e-12)
    assert result.residual <= 1e-12

def test_newton_root_gives_up():
    with pytest.raises(NewtonConvergenceError) as excinfo:
        newton_root(inverse_square(25.0), 1.0, (1.0, 10.0), max_iters=1)
    assert excinfo.value.iterations == 1
    assert isinstance(excinfo.value, ProjectionError)

def test_newton_root_checks_residual_when_bracket_collapses():
    def step(x):
        return (2.0, 0.0) if x < 1.0 else (0.5, 0.0)

    with pytest.raises(NewtonConvergenceError) as excinfo:
        newton_root(step, 1.0, (0.0, 2.0), max_iters=200)
    assert excinfo.value.iterations < 200
    assert excinfo.value.residual == 1.0
    lo, hi = excinfo.value.bracket
    assert hi == 1.0
    assert hi - lo <= 4.0 * np.spacing(1.0)

def test_newton_root_rejects_bad_bracket():
    with pytest.raises(ValueError):
        newton_root(inverse_square(1.0), 1.0, (2.0, 4.0))

def test_newton_matches_bisection(rng):
    for _ in range(20):
        coefficients = rng.normal(size=4)
        shifts = rng.uniform(0.0, 5.0, size=4)

        def rho(x):
            ratios = coefficients / (x + shifts)
            return float(ratios @ ratios), float(-2.0 * (ratios * ratios) @ (1.0 / (x + shifts)))

        target = 0.5 * rho(0.01)[0]
        bracket = (0.01, 100.0)
        assert newton_root(rho, target, bracket).root == pytest.approx(bisect_root(rho, target, bracket), rel=1e-9)

def test_projection_leaves_interior_points_alone():
    projector = BallProjector(2.0).diagonalize(np.eye(2))
    point = np.array([0.3, -0.4])
    projected, result = projector.project_with_result(point, 0.5)
    np.testing.assert_array_equal(projected, point)
    assert result is None

def test_projection_without_gram_is_radial():
    projected = BallProjector(2.0).project(np.array([3.0, 4.0]), 0.7)
    np.testing.assert_allclose(projected, [0.6, 0.8], rtol=1e-12)

def test_projection_matches_reference(rng):
    for _ in range(30):
        projector, eta, gram, point = random_projection_instance(rng, 3)
        metric = np.eye(3) / projector.diameter ** 2 + 2.0 * eta * eta * gram
        expected = reference_projection(metric, point, projector.radius)
        np.testing.assert_allclose(projector.project(point, eta), expected, atol=1e-6)
        np.testing.assert_allclose(project_ball(BallProjector(projector.diameter), point, eta, gram), expected, atol=1e-6)

def test_project_ball_uses_gram_since_wake():
    before_wake = 4.0 * np.outer([1.0, 0.0], [1.0, 0.0])
    since_wake = 9.0 * np.outer([0.0, 1.0], [0.0, 1.0])
    point = np.array([2.0, 2.0])
    metric = np.eye(2) / 4.0 + 2.0 * 0.25 * since_wake
    expected = reference_projection(metric, point, 1.0)

    projected = project_ball(BallProjector(2.0), point, 0.5, slave_gram=since_wake)
    np.testing.assert_allclose(projected, expected, atol=1e-6)
    assert np.linalg.norm(projected) == pytest.approx(1.0, rel=1e-10)
    full = project_ball(BallProjector(2.0), point, 0.5, slave_gram=before_wake + since_wake)
    assert not np.allclose(full, projected, atol=1e-3)

def test_projection_is_stationary_on_the_boundary(rng):
    for dimension in (1, 2, 5, 16):
        projector, eta, gram, point = random_projection_instance(rng, dimension)
        projected = projector.project(point, eta)
        metric = np.eye(dimension) / projector.diameter ** 2 + 2.0 * eta * eta * gram
        assert np.linalg.norm(projected) == pytest.approx(projector.radius, rel=1e-10)
        assert stationarity_angle(metric, point, projected) <= 1e-8

def test_projection_rejects_indefinite_gram():
    with pytest.raises(ProjectionError):
        BallProjector(2.0).diagonalize(np.diag([1.0, -1.0]))

def test_projector_validation():
    with pytest.raises(ValueError):
        BallProjector(0.0)

def test_projection_check_suite():
    results = check_projection(instances=40, seed=2)
    assert all(result.passed for result in results), [r.detail for r in results]

def test_ball_domain():
    ball = Ball(2, radius=1.0, center=[1.0, 0.0])
    np.testing.assert_allclose(ball.project([4.0, 0.0]), [2.0, 0.0])
    assert ball.distance([4.0, 0.0]) == pytest.approx(2.0)
    np.testing.assert_allclose(ball.distance_subgradient([4.0, 0.0]), [1.0, 0.0])
    np.testing.assert_array_equal(ball.distance_subgradient([1.5, 0.0]), [0.0, 0.0])
    np.testing.assert_allclose(ball.linear_minimizer([0.0, 2.0]), [1.0, -1.0])
    assert ball.contains([1.0, 0.9])
    assert ball.diameter == 2.0
    with pytest.raises(DimensionMismatchError):
        ball.project([1.0, 2.0, 3.0])

def test_box_domain():
    box = build_domain("box", 2, 0.5)
    assert isinstance(box, Box)
    np.testing.assert_allclose(box.project([1.0, -0.2]), [0.5, -0.2])
    np.testing.assert_allclose(box.linear_minimizer([1.0, -1.0]), [-0.5, 0.5])
    assert box.enclosing_radius == pytest.approx(np.sqrt(0.5))
    with pytest.raises(ValueError):
        Box([1.0], [0.0])

def test_simplex_domain():
    simplex = Simplex(2)
    np.testing.assert_allclose(simplex.project([2.0, 0.0]), [1.0, 0.0])
    assert simplex.distance([2.0, 0.0]) == pytest.approx(1.0)
    np.testing.assert_allclose(simplex.center, [0.5, 0.5])
    assert simplex.enclosing_radius == pytest.approx(np.sqrt(0.5))
    np.testing.assert_array_equal(simplex.linear_minimizer([0.3, -0.1]), [0.0, 1.0])
    np.testing.assert_allclose(euclidean_proj_simplex(np.array([0.2, 0.2, 0.2])), np.full(3, 0.2 + 0.4 / 3))
    with pytest.raises(ValueError):
        build_domain("cube", 2)

def test_surrogate_gradient_examples():
    ball = Ball(2)
    np.testing.assert_allclose(surrogate_gradient(ball, np.array([0.2, 0.0]), np.array([0.0, 1.0])), [0.0, 0.5])
    np.testing.assert_allclose(surrogate_gradient(ball, np.array([2.0, 0.0]), np.array([0.0, 1.0])), [0.5, 0.5])
    assert surrogate_loss(ball, np.array([0.0, 1.0]), np.array([2.0, 0.0])) == pytest.approx(0.5)

def test_surrogate_upper_bounds_linear_regret(rng):
    """⟨g, Π(w) − u⟩ ≤ 2⟨g̊, w − u⟩ for every u in the domain."""
    for domain in (Ball(3, 0.7), Simplex(3), build_domain("box", 3, 1.0)):
        for _ in range(50):
            inner_point = domain.center + rng.normal(size=3) * 2.0
            played = domain.project(inner_point)
            gradient = rng.normal(size=3)
            comparator = domain.project(rng.normal(size=3))
            surrogate = surrogate_gradient(domain, inner_point, gradient)
            assert gradient @ (played - comparator) <= 2.0 * surrogate @ (inner_point - comparator) + 1e-10
            assert np.linalg.norm(surrogate) <= np.linalg.norm(gradient) + 1e-12

def test_reduce_to_ball_round_plays_projection():
    domain = Simplex(3)
    inner = RestartSupervisor(LearnerConfig(setting="oco", size=3, diameter=domain.diameter), "metagrad")
    played, surrogate = reduce_to_ball_round(domain, inner, np.array([1.0, 0.0, 0.0]))
    np.testing.assert_allclose(played, domain.center)
    np.testing.assert_allclose(surrogate, [0.5, 0.0, 0.0])
    assert inner.rounds == 1

def test_ball_reduction_on_simplex(rng):
    learner = BallReduction(LearnerConfig(setting="oco", size=3, initial_scale=1.0, domain=Simplex(3)))
    assert learner.learner_type == "metagrad+c-reduced"
    assert learner.inner.config.diameter == pytest.approx(2.0 * np.sqrt(2 / 3))
    for _ in range(300):
        prediction = learner.update(np.array([0.0, 1.0, 1.0]) + 0.1 * rng.uniform(size=3))
        assert learner.domain.contains(prediction)
    assert learner.rounds == 300
    assert learner.predict()[0] > 1 / 3
    json.dumps(learner.to_dict())

    learner.reset()
    assert learner.rounds == 0
    np.testing.assert_allclose(learner.predict(), np.full(3, 1 / 3))

def test_ball_reduction_with_restarts():
    learner = BallReduction(LearnerConfig(setting="oco", size=2, domain=Simplex(2)), "metagrad+l")
    assert learner.learner_type == "metagrad+l-reduced"
    learner.update([1.0, 0.0])
    learner.update([1000.0, 0.0])
    assert learner.domain.contains(learner.predict())

def test_ball_reduction_validation():
    with pytest.raises(ValueError):
        BallReduction(LearnerConfig(setting="oco", size=2, initial_scale=1.0))
    with pytest.raises(ValueError):
        BallReduction(LearnerConfig(setting="oco", size=3, initial_scale=1.0, domain=Simplex(2)))
    with pytest.raises(ValueError):
        BallReduction(LearnerConfig(setting="oco", size=2, initial_scale=1.0, domain=Simplex(2)), "squint+c")
