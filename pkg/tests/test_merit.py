import math

import numpy as np
import pytest

from noisy_sqp.merit import TauState, merit_value, model_reduction, tau_trial, tau_update
from noisy_sqp.steps import TestParams


class TestMeritValue:
    def test_direct_evaluation(self):
        assert merit_value(1.0, 2.0, np.array([3.0, 4.0])) == pytest.approx(7.0)

    def test_feasible_point(self):
        assert merit_value(0.7, 2.0, np.zeros(3)) == pytest.approx(1.4)

    def test_zero_objective(self):
        assert merit_value(0.5, 0.0, np.array([1.0])) == pytest.approx(1.0)


class TestModelReduction:
    def test_zero_displacement(self):
        assert model_reduction(1.0, np.ones(2), np.ones(1), np.ones((1, 2)), np.zeros(2)) == 0.0

    def test_direct_evaluation(self):
        val = model_reduction(1.0, np.array([1.0, 0.0]), np.array([1.0]),
                              np.array([[1.0, 0.0]]), np.array([-1.0, 0.0]))
        assert val == pytest.approx(2.0)

    def test_full_linearized_feasibility_step(self):
        c = np.array([3.0, 4.0])
        J = np.eye(2)
        d = -c
        val = model_reduction(1.0, np.zeros(2), c, J, d)
        assert val == pytest.approx(np.linalg.norm(c))


class TestTauTrial:
    def test_sign_branch_infinite(self):
        params = TestParams()
        trial = tau_trial(np.array([-1.0]), np.array([1.0]), np.array([0.707]),
                          np.eye(1), 1.0, 0.0, params)
        assert math.isinf(trial)

    def test_benchmark_default_constants(self):
        # direct evaluation with sigma_c = 0.1, sigma_r = 0.9999
        params = TestParams()
        g = np.array([1.0, 0.0])
        d = np.array([1.0, 0.0])
        u = np.array([1.0, 0.0])  # u'Hu = 1 > lambda_u ||u||^2
        trial = tau_trial(g, d, u, np.eye(2), 1.0, 0.0, params)
        expected = (1.0 - 0.1 / 0.9999) * 1.0 / (1.0 + 1.0)
        assert trial == pytest.approx(expected, rel=1e-14)

    def test_zero_decrease(self):
        params = TestParams()
        trial = tau_trial(np.array([1.0]), np.array([1.0]), np.array([1.0]),
                          np.eye(1), 1.0, 1.0, params)
        assert trial == pytest.approx(0.0)


class TestTauUpdate:
    def test_keep_on_infinite_trial(self):
        state = TauState(1.0)
        tau_update(state, math.inf, 0.01, k=0)
        assert state.tau == 1.0

    def test_cut_to_trial(self):
        state = TauState(1.0)
        tau_update(state, 0.45, 0.01, k=0)
        assert state.tau == pytest.approx(0.4455)

    def test_keep_branch(self):
        state = TauState(0.2)
        tau_update(state, 0.45, 0.01, k=0)
        assert state.tau == pytest.approx(0.2)

    def test_history_non_increasing_under_random_stream(self):
        rng = np.random.default_rng(21)
        state = TauState(1.0)
        for k in range(200):
            trial = float(rng.uniform(0.0, 2.0)) if rng.random() < 0.8 else math.inf
            tau_update(state, trial, 0.01, k)
        taus = [t for _, t in state.history]
        assert all(b <= a + 1e-15 for a, b in zip(taus, taus[1:]))
        assert state.tau > 0.0
