import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from curio.baselines import (
    ALPHA_BOUNDS,
    QLearnState,
    decode_qlearning,
    decode_subjective,
    log_mean,
    q_step,
    simulate_qlearning,
    subjective_net_utility,
)
from curio.core import Action, ModelParams, RecognitionState, net_utility
from curio.ifep import DecoderConfig
from curio.sim import Constant, SimConfig, simulate_recu

STATE = RecognitionState([0.0, 0.0], [4.0, 4.0])
PARAMS = ModelParams(sigma_w=0.4, p0=0.8)


class TestSubjectiveUtility:
    def test_unit_weight_matches_curiosity_form(self):
        for opt in Action:
            assert subjective_net_utility(STATE, 1.0, PARAMS, opt) == pytest.approx(net_utility(STATE, opt, 1.0, PARAMS).net_utility)

    def test_zero_weight_is_info_only(self):
        assert subjective_net_utility(STATE, 0.0, PARAMS, Action.REST) == pytest.approx(0.05125, abs=1e-9)

    def test_example(self):
        assert subjective_net_utility(STATE, 2.0, PARAMS, Action.ACCELERATE) == pytest.approx(1.43755, abs=1e-5)


def test_log_mean():
    assert log_mean([1.0, math.e ** 2, math.e ** 4]) == pytest.approx(2.0)
    assert math.isnan(log_mean([1.0, -1.0]))


class TestQStep:
    def test_chosen_half_step(self):
        new, _ = q_step(QLearnState([0.0, 0.0], 0.5, 1.0), Action.ACCELERATE, 1)
        assert new.q[1] == pytest.approx(0.5)

    def test_unchosen_decays(self):
        new, _ = q_step(QLearnState([0.5, 0.5], 0.5, 1.0), Action.ACCELERATE, 1)
        assert new.q[0] == pytest.approx(0.25)

    def test_chosen_only_variant(self):
        new, _ = q_step(QLearnState([0.5, 0.5], 0.5, 1.0), Action.ACCELERATE, 1, chosen_only=True)
        assert new.q[0] == pytest.approx(0.5)

    @given(st.floats(-5, 5), st.floats(0, 20))
    def test_equal_values_uniform(self, q, beta):
        _, probs = q_step(QLearnState([q, q], 0.3, beta), Action.REST, 0)
        np.testing.assert_allclose(probs, [0.5, 0.5])

    def test_clamps(self):
        s = QLearnState([0, 0], 5.0, 50.0)
        assert s.alpha_t == ALPHA_BOUNDS[1] and s.beta_t == 20.0
        s = QLearnState([0, 0], -1.0, -1.0)
        assert s.alpha_t == ALPHA_BOUNDS[0] and s.beta_t == 0.0
        with pytest.raises(ValueError):
            QLearnState([np.nan, 0], 0.1, 1)

    def test_drift_uses_rng(self):
        s = QLearnState([0, 0], 0.3, 3.0)
        a, _ = q_step(s, 0, 1, np.random.default_rng(1), epsilon_alpha=0.01, epsilon_beta=0.1)
        b, _ = q_step(s, 0, 1, np.random.default_rng(1), epsilon_alpha=0.01, epsilon_beta=0.1)
        assert (a.alpha_t, a.beta_t) == (b.alpha_t, b.beta_t)
        assert a.beta_t != 3.0


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=200),
       st.floats(1e-3, 0.999), st.booleans())
def test_q_values_stay_in_unit_interval(steps, alpha, chosen_only):
    s = QLearnState([0.0, 0.0], alpha, 2.0)
    for a, r in steps:
        s, probs = q_step(s, a, r, chosen_only=chosen_only)
        assert np.all((s.q >= 0) & (s.q <= 1))
        assert probs.sum() == pytest.approx(1.0)


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-50, 50), st.floats(0, 20))
def test_softmax_shift_invariance(q0, q1, shift, beta):
    a = QLearnState([q0, q1], 0.1, beta).probabilities()
    b = QLearnState([q0 + shift, q1 + shift], 0.1, beta).probabilities()
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_subjective_decode_deterministic_and_csv():
    trials = simulate_recu(SimConfig(trials=80, seed=2)).to_trials()
    cfg = DecoderConfig(n_particles=300, seed=5)
    a, b = decode_subjective(trials, cfg), decode_subjective(trials, cfg)
    np.testing.assert_array_equal(a.d_mean, b.d_mean)
    buf = io.StringIO()
    a.write_csv(buf)
    assert buf.getvalue().splitlines()[0] == "trial,d_mean,d_sd,p_sick_rest,p_sick_accel,ess"
    assert set(a.summary()) == {"mean", "log_mean"}


def test_qlearning_decode_deterministic_and_csv():
    trials = simulate_qlearning(100, 0.3, 3.0, seed=1)
    cfg = DecoderConfig(n_particles=300, seed=2)
    a, b = decode_qlearning(trials, cfg), decode_qlearning(trials, cfg)
    np.testing.assert_array_equal(a.beta_mean, b.beta_mean)
    assert np.all((a.alpha_mean > 0) & (a.alpha_mean < 1))
    buf = io.StringIO()
    a.write_csv(buf)
    assert buf.getvalue().splitlines()[0].startswith("trial,alpha_mean,alpha_sd,beta_mean")


@pytest.mark.slow
def test_reward_weight_round_trip():
    finals = []
    for s in range(20):
        trace = simulate_recu(SimConfig(seed=s, curiosity=Constant(0.5), weighting="reward"))
        d = decode_subjective(trace.to_trials(), DecoderConfig(seed=s + 100, epsilon_c=0.1, n_particles=2000))
        finals.append(d.d_mean[750:].mean())
    assert abs(np.median(finals) - 0.5) <= 0.3


@pytest.mark.slow
def test_random_policy_gives_small_beta():
    betas = []
    for s in range(5):
        trials = simulate_qlearning(2000, 0.3, 0.0, seed=s)
        q = decode_qlearning(trials, DecoderConfig(seed=s, n_particles=2000))
        betas.append(q.beta_mean[1500:].mean())
    assert np.median(betas) < 0.5
