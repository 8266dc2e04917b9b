import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import expit

from curio.core import (
    Action,
    ModelParams,
    RecognitionState,
    TrialRecord,
    action_probability,
    confidence,
    entropy_terms,
    expected_info_gain,
    expected_reward,
    logistic,
    net_utility,
    predict_outcome_prob,
    replay,
    reward_intensity,
    selection_probability,
    update_recognition,
)

LN4 = math.log(4)


def state(mu, p):
    return RecognitionState(np.full(2, mu), np.full(2, p))


def mc_outcome(mu, var, n=1_000_000, seed=0):
    """Monte Carlo P(o=1), marginal and conditional entropy under N(mu, var)."""
    z = np.random.default_rng(seed).standard_normal(n)
    f = expit(mu + math.sqrt(var) * z)
    p1 = f.mean()
    marginal = -(p1 * math.log(p1) + (1 - p1) * math.log(1 - p1))
    conditional = float(-(f * np.log(f) + (1 - f) * np.log1p(-f)).mean())
    return p1, marginal, conditional


def test_action_mapping():
    assert Action.REST.option_number == 1
    assert Action.ACCELERATE.option_number == 2
    assert Action.parse("accelerate") is Action.ACCELERATE
    assert Action.parse(0) is Action.REST
    with pytest.raises(ValueError):
        Action.parse("walk")


@pytest.mark.parametrize("x, expected", [(0.0, 0.5), (math.log(4), 0.8), (-math.log(4), 0.2)])
def test_logistic(x, expected):
    assert logistic(x) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("bad", [math.inf, -math.inf, math.nan])
def test_logistic_rejects_non_finite(bad):
    with pytest.raises(ValueError):
        logistic(bad)


def test_reward_intensity():
    assert reward_intensity(0, 0.8) == 0.0
    assert reward_intensity(1, 0.8) == pytest.approx(LN4)
    assert reward_intensity(1, 0.5) == 0.0
    for p0 in (0.0, 1.0, 1.2):
        with pytest.raises(ValueError):
            reward_intensity(1, p0)


def test_model_params_validation():
    assert ModelParams().p_w == pytest.approx(1 / 0.16)
    with pytest.raises(ValueError):
        ModelParams(p0=1.0)
    with pytest.raises(ValueError):
        ModelParams(sigma_w=0.0)
    with pytest.raises(ValueError):
        ModelParams(alpha=math.nan)


def test_recognition_state_rejects_bad_precision():
    with pytest.raises(ValueError):
        RecognitionState([0, 0], [1, 0])


class TestOutcomeProbability:
    def test_half_at_zero_mean(self):
        for p in (0.5, 4.0, 100.0):
            assert predict_outcome_prob(state(0.0, p), Action.REST, ModelParams(), 1) == pytest.approx(0.5)

    def test_vanishing_variance(self):
        params = ModelParams(sigma_w=1e-6)
        assert predict_outcome_prob(state(1.0, 1e12), Action.REST, params) == pytest.approx(expit(1.0), abs=1e-9)

    def test_against_monte_carlo(self):
        params = ModelParams(sigma_w=0.4)
        p1 = predict_outcome_prob(state(1.0, 4.0), Action.ACCELERATE, params)
        mc, _, _ = mc_outcome(1.0, 0.25 + 0.16)
        assert p1 == pytest.approx(0.7125, abs=5e-4)
        assert abs(p1 - mc) < 0.01

    def test_outcomes_sum_to_one(self):
        s = state(-1.3, 2.5)
        total = sum(predict_outcome_prob(s, Action.REST, ModelParams(), o) for o in (0, 1))
        assert total == pytest.approx(1.0)


class TestExpectedReward:
    def test_zero_mean(self):
        assert expected_reward(state(0.0, 4.0), Action.REST, ModelParams(p0=0.8)) == pytest.approx(0.5 * LN4)

    def test_symmetric_desire(self):
        assert expected_reward(state(2.0, 4.0), Action.REST, ModelParams(p0=0.5)) == 0.0

    def test_derived(self):
        er = expected_reward(state(1.0, 4.0), Action.REST, ModelParams())
        assert er == pytest.approx(0.7125 * LN4, abs=1e-3)
        assert er == pytest.approx(0.9878, abs=1e-3)


class TestInfoGain:
    def test_known_latent_gives_no_info(self):
        info = expected_info_gain(state(0.7, 1e12), Action.REST, ModelParams(sigma_w=1e-6))
        assert info["expected_info"] == pytest.approx(0.0, abs=1e-9)

    def test_closed_form_at_zero_mean(self):
        info = expected_info_gain(state(0.0, 4.0), Action.REST, ModelParams())
        assert info["marginal_entropy"] == pytest.approx(math.log(2))
        assert info["expected_info"] == pytest.approx(0.125 * (0.25 + 0.16))
        _, marginal, conditional = mc_outcome(0.0, 0.41)
        assert abs(info["expected_info"] - (marginal - conditional)) < 0.01

    def test_decomposition(self):
        info = expected_info_gain(state(-0.4, 3.0), Action.REST, ModelParams())
        assert info["expected_info_raw"] == pytest.approx(info["marginal_entropy"] - info["conditional_entropy"])


class TestNetUtility:
    params = ModelParams()
    s = state(0.0, 4.0)

    def test_no_curiosity(self):
        u = net_utility(self.s, Action.REST, 0.0, self.params)
        assert u.net_utility == pytest.approx(u.expected_reward)

    @pytest.mark.parametrize("c, expected", [(1.0, 0.74440), (-1.0, 0.64190)])
    def test_curiosity_weighting(self, c, expected):
        u = net_utility(self.s, Action.ACCELERATE, c, self.params)
        assert u.net_utility == pytest.approx(expected, abs=1e-5)
        assert u.expected_info == pytest.approx(u.marginal_entropy - u.conditional_entropy)

    def test_rejects_non_finite_curiosity(self):
        with pytest.raises(ValueError):
            net_utility(self.s, Action.REST, math.inf, self.params)


class TestPolicy:
    def test_symmetric_state(self):
        assert action_probability(state(0.3, 2.0), 3.0, ModelParams()) == 0.5

    def test_closed_form(self):
        assert selection_probability(1.0, 2.0) == pytest.approx(1 / (1 + math.exp(-2)))

    def test_zero_temperature(self):
        s = RecognitionState([-2.0, 1.5], [1.0, 9.0])
        assert action_probability(s, 4.0, ModelParams(beta=0.0)) == 0.5


class TestUpdate:
    params = ModelParams(alpha=0.05, sigma_w=0.4)

    def test_chosen_option(self):
        s = RecognitionState([0.0, 0.0], [5.0, 5.0])
        new = update_recognition(s, Action.ACCELERATE, 1, self.params)
        assert new.p[1] == pytest.approx(1 / 0.36 + 0.25)
        assert new.mu[1] == pytest.approx(0.025)

    def test_chosen_precision_matches_linearised_kalman(self):
        # Kalman on the linearised Bernoulli model: prior variance K, observation
        # information f'(mu) = f(1-f) for unit-variance Bernoulli linearisation.
        mu, p_prev, sw = 0.7, 2.5, 0.4
        f = expit(mu)
        prior_var = sw ** 2 + 1 / p_prev
        obs_var = 1 / (f * (1 - f))
        post_var = prior_var * obs_var / (prior_var + obs_var)
        s = RecognitionState([mu, 0.0], [p_prev, 1.0])
        new = update_recognition(s, Action.REST, 0, self.params)
        assert new.p[0] == pytest.approx(1 / post_var)

    def test_unchosen_option_diffuses(self):
        s = RecognitionState([0.4, 0.0], [5.0, 5.0])
        new = update_recognition(s, Action.ACCELERATE, 0, self.params)
        assert new.p[0] == pytest.approx(1 / 0.36)
        assert new.mu[0] == 0.4

    def test_no_drift_keeps_precision(self):
        s = RecognitionState([0.4, 0.0], [5.0, 5.0])
        new = update_recognition(s, Action.ACCELERATE, 0, ModelParams(sigma_w=1e-9))
        assert new.p[0] == pytest.approx(5.0)

    def test_input_not_mutated(self):
        s = RecognitionState.initial()
        update_recognition(s, Action.REST, 1, self.params)
        assert np.all(s.mu == 0) and np.all(s.p == 1)


class TestConfidence:
    def test_closed_form(self):
        assert confidence(state(0.0, 1.0), Action.REST) == pytest.approx(16.0)

    @given(st.floats(-6, 6), st.floats(0.01, 100))
    def test_symmetric_and_linear(self, mu, p):
        g = confidence(state(mu, p), Action.REST)
        assert confidence(state(-mu, p), Action.REST) == pytest.approx(g)
        assert confidence(state(mu, 2 * p), Action.REST) == pytest.approx(2 * g)
        assert g > 0


states = st.tuples(st.floats(-3, 3), st.floats(0.3, 200), st.floats(-3, 3), st.floats(0.3, 200))


@settings(max_examples=300)
@given(states, st.floats(-8, 8), st.floats(0, 10))
def test_policy_normalisation_and_monotonicity(s, c, beta):
    recog = RecognitionState([s[0], s[2]], [s[1], s[3]])
    params = ModelParams(beta=beta)
    p_accel = action_probability(recog, c, params)
    assert 0 <= p_accel <= 1
    assert p_accel + (1 - p_accel) == pytest.approx(1.0)
    du = (net_utility(recog, Action.ACCELERATE, c, params).net_utility
          - net_utility(recog, Action.REST, c, params).net_utility)
    if beta * du > 1e-9:
        assert p_accel > 0.5
    if beta * du < -1e-9:
        assert p_accel < 0.5


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.1, 5))
def test_selection_probability_increasing(a, b, beta):
    if a < b:
        assert selection_probability(a, beta) <= selection_probability(b, beta)


def test_entropy_bounds_on_random_states():
    rng = np.random.default_rng(7)
    mu = rng.uniform(-3, 3, 10_000)
    p = np.exp(rng.uniform(np.log(0.3), np.log(200), 10_000))
    marginal, conditional, _ = entropy_terms(mu, p, 0.4)
    assert np.all(marginal >= 0) and np.all(marginal <= math.log(2) + 1e-12)
    assert np.all(conditional <= marginal + 0.02)


@given(st.floats(-3, 3))
def test_info_non_increasing_in_precision(mu):
    ps = np.geomspace(0.3, 200, 200)
    _, _, info = entropy_terms(np.full(200, mu), ps, 0.4)
    assert np.all(np.diff(np.maximum(info, 0)) <= 1e-12)


@pytest.mark.parametrize("mu, p", [(-2.5, 2.0), (1.7, 3.0), (0.4, 20.0)])
def test_entropies_against_monte_carlo(mu, p):
    marginal, conditional, _ = entropy_terms(mu, p, 0.4)
    _, mc_marg, mc_cond = mc_outcome(mu, 1 / p + 0.16, seed=3)
    assert abs(marginal - mc_marg) < 0.05
    assert abs(conditional - mc_cond) < 0.05


def test_confidence_growth_under_forced_choice():
    params = ModelParams()
    rng = np.random.default_rng(11)
    s = RecognitionState.initial()
    start = confidence(s)
    for _ in range(15):
        s = update_recognition(s, Action.REST, int(rng.random() < 0.7), params)
    end = confidence(s)
    assert end[0] > start[0]
    assert end[1] < start[1]


def test_replay_matches_stepwise_updates():
    params = ModelParams()
    trials = [TrialRecord(Action.REST, 1), TrialRecord(Action.ACCELERATE, 0), TrialRecord(Action.ACCELERATE, 1)]
    rep = replay(trials, params)
    s = RecognitionState.initial()
    for t, rec in enumerate(trials):
        np.testing.assert_allclose(rep.mu[t], s.mu)
        np.testing.assert_allclose(rep.expected_reward[t, 1], expected_reward(s, 1, params))
        np.testing.assert_allclose(rep.expected_info[t, 0], expected_info_gain(s, 0, params)["expected_info"])
        s = update_recognition(s, rec.action, rec.outcome, params)
        np.testing.assert_allclose(rep.p_post[t], s.p)
    np.testing.assert_allclose(rep.confidence_post[-1], confidence(s))
