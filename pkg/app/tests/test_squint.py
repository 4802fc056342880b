import json
import math

import numpy as np
import pytest
from scipy import integrate

from app.harness.verification import check_squint_potential, check_squint_quadrature, quadrature_weights
from app.learning.learners.base import LearnerConfig
from app.learning.learners.squint_c import SquintC
from app.learning.models.errors import ObservationError
from app.learning.models.ledger import RegretLedger
from app.learning.models.observations import Setting
from app.learning.models.scale import CompensatedSum, ScaleTracker
from app.learning.models.squint import (
    SquintState,
    exp_quadratic_integral,
    log_exp_quadratic_integral,
    squint_potential,
    squint_round,
    squint_weights,
)

def _quad(R, V, a):
    value, _ = integrate.quad(lambda eta: math.exp(eta * R - eta * eta * V), 0.0, a, epsabs=0.0, epsrel=1e-13)
    return value

def test_integral_flat_integrand():
    assert exp_quadratic_integral(0.0, 0.0, 0.5) == pytest.approx(0.5, rel=1e-15)

def test_integral_exponential():
    assert exp_quadratic_integral(1.0, 0.0, 1.0) == pytest.approx(math.e - 1.0, rel=1e-14)

@pytest.mark.parametrize("R,V,a", [
    (3.0, 2.0, 0.7),
    (-3.0, 2.0, 0.7),
    (40.0, 5.0, 0.5),
    (-40.0, 5.0, 0.5),
    (10.0, 400.0, 0.5),
    (0.0, 50.0, 1.0),
    (0.001, 1e-6, 0.5),
])
def test_integral_matches_quadrature(R, V, a):
    """The closed form agrees with adaptive quadrature in every regime."""
    assert exp_quadratic_integral(R, V, a) == pytest.approx(_quad(R, V, a), rel=1e-10)

def test_log_integral_large_regret_does_not_overflow():
    value = log_exp_quadratic_integral(np.array([5000.0]), np.array([10.0]), 0.5)
    assert np.isfinite(value).all()
    assert value[0] > 2000.0

def test_log_integral_rejects_bad_arguments():
    with pytest.raises(ObservationError):
        log_exp_quadratic_integral(1.0, -1.0, 0.5)
    with pytest.raises(ValueError):
        log_exp_quadratic_integral(1.0, 1.0, 0.0)

def test_weights_at_start_equal_prior():
    state = SquintState.create(3, 1.0, prior=np.array([0.2, 0.3, 0.5]))
    np.testing.assert_allclose(squint_weights(state), [0.2, 0.3, 0.5], rtol=1e-12)

def test_weights_symmetric_history():
    state = SquintState(
        prior=np.array([0.5, 0.5]),
        scale=ScaleTracker(initial_scale=1.0),
        _regret=CompensatedSum(np.array([2.0, 2.0])),
        _variance=CompensatedSum(np.array([3.0, 3.0])),
    )
    np.testing.assert_allclose(squint_weights(state), [0.5, 0.5], rtol=1e-12)

def test_weights_match_quadrature(rng):
    for _ in range(20):
        state = SquintState(
            prior=rng.dirichlet(np.ones(3)),
            scale=ScaleTracker(initial_scale=float(rng.uniform(0.5, 2.0))),
            _regret=CompensatedSum(rng.uniform(-50.0, 50.0, size=3)),
            _variance=CompensatedSum(rng.uniform(0.0, 100.0, size=3)),
        )
        np.testing.assert_allclose(squint_weights(state), quadrature_weights(state), atol=1e-8)

def test_round_with_equal_losses_keeps_prior():
    state = SquintState.create(2, 1.0)
    for _ in range(5):
        prediction = squint_round(state, np.array([0.7, 0.7]))
    np.testing.assert_allclose(prediction, [0.5, 0.5], rtol=1e-12)
    np.testing.assert_array_equal(state.clipped_regret, [0.0, 0.0])
    assert state.scale.current_max == 1.0

def test_one_round_by_hand():
    """K=2, uniform play, losses (0, 1), B = 1: b = 1/2 and nothing is clipped."""
    state = SquintState.create(2, 1.0)
    ledger = RegretLedger(Setting.EXPERTS, 2)
    squint_round(state, np.array([0.0, 1.0]), ledger)
    assert state.scale.last_observed == 0.5
    assert state.scale.current_max == 1.0
    np.testing.assert_array_equal(state.clipped_regret, [0.5, -0.5])
    np.testing.assert_array_equal(state.clipped_variance, [0.25, 0.25])
    assert ledger.rounds == 1
    assert state.prediction[0] > 0.5

def test_joint_scaling_gives_same_predictions(rng):
    losses = rng.uniform(0.0, 1.0, size=(40, 3))
    plain = SquintState.create(3, 0.5)
    scaled = SquintState.create(3, 0.5 * 1e3)
    for loss in losses:
        np.testing.assert_allclose(squint_round(scaled, 1e3 * loss), squint_round(plain, loss), rtol=0, atol=1e-10)

def test_potential_at_start_is_zero():
    state = SquintState.create(3, 1.0)
    assert squint_potential(state) == 0.0

def test_potential_with_flat_statistics_is_zero():
    state = SquintState.create(2, 1.0)
    squint_round(state, np.array([0.3, 0.3]))
    assert squint_potential(state) == 0.0

def test_potential_bounded_by_scale_growth(rng):
    state = SquintState.create(3, 1.0)
    for t in range(20):
        multiplier = 10.0 if t >= 10 else 1.0
        squint_round(state, multiplier * rng.uniform(size=3))
        ceiling = math.log(state.scale.previous_max / state.scale.initial_scale)
        assert squint_potential(state) <= ceiling + 1e-9

def test_potential_suite():
    results = check_squint_potential(instances=5, seed=3)
    assert all(result.passed for result in results), [r.detail for r in results]

def test_quadrature_suite():
    results = check_squint_quadrature(instances=20, seed=4)
    assert all(result.passed for result in results), [r.detail for r in results]

def test_squint_c_learner():
    learner = SquintC(LearnerConfig(setting="experts", size=3, initial_scale=1.0))
    assert learner.learner_type == "squint+c"
    prediction = learner.update([0.0, 1.0, 1.0])
    assert prediction.sum() == pytest.approx(1.0)
    assert prediction[0] > prediction[1]
    diagnostics = learner.diagnostics(with_potential=True)
    assert diagnostics.potential is not None
    assert learner.diagnostics().potential is None
    json.dumps(learner.to_dict())

    learner.reset()
    assert learner.rounds == 0
    np.testing.assert_allclose(learner.predict(), np.full(3, 1 / 3))

def test_squint_c_needs_scale_and_experts():
    with pytest.raises(ValueError):
        SquintC(LearnerConfig(setting="experts", size=3))
    with pytest.raises(ValueError):
        SquintC(LearnerConfig(setting="oco", size=3, initial_scale=1.0))
