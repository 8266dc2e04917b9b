import io
import math

import numpy as np
import pytest

from curio.core import Action, ModelParams, RecognitionState, action_probability
from curio.sim import (
    Constant,
    PiecewiseSchedule,
    RandomWalk,
    RandomWalkSchedule,
    SimConfig,
    Sinusoid,
    bateman,
    curiosity_schedule,
    default_schedule,
    simulate_eda,
    simulate_recu,
    synthetic_session,
)


def test_curiosity_schedule_points():
    T = 1000
    assert curiosity_schedule(0, T) == 0.0
    assert curiosity_schedule(T / 8, T) == pytest.approx(4.0)
    assert curiosity_schedule(T / 4, T) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        curiosity_schedule(0, 0)


def test_default_schedule_covers_levels():
    sched = default_schedule(1000)
    _, prob = sched.realize(1000)
    assert sorted(set(prob[:, 0])) == [0.1, 0.4, 0.6, 0.9]
    assert sched.stationary_ranges(1000) == [(0, 250), (250, 500), (500, 750), (750, 1000)]


@pytest.mark.parametrize("segments", [((5, 0.5, 0.5),), ((0, 0.5, 1.0),), ((0, 0.2, 0.2), (0, 0.3, 0.3))])
def test_piecewise_schedule_validation(segments):
    with pytest.raises(ValueError):
        PiecewiseSchedule(segments)


def test_random_walk_schedule_is_seeded():
    sched = RandomWalkSchedule(0.4)
    w1, p1 = sched.realize(50, np.random.default_rng(3))
    w2, _ = sched.realize(50, np.random.default_rng(3))
    np.testing.assert_array_equal(w1, w2)
    assert np.all((p1 > 0) & (p1 < 1))


def test_trace_shapes_and_determinism():
    cfg = SimConfig(trials=200, seed=42)
    a, b = simulate_recu(cfg), simulate_recu(cfg)
    assert len(a) == 200
    buf_a, buf_b = io.StringIO(), io.StringIO()
    a.write_csv(buf_a)
    b.write_csv(buf_b)
    assert buf_a.getvalue() == buf_b.getvalue()
    assert buf_a.getvalue().count("\n") == 201
    assert simulate_recu(SimConfig(trials=200, seed=43)).actions.tolist() != a.actions.tolist()


def test_symmetric_environment_is_balanced():
    cfg = SimConfig(trials=10_000, curiosity=Constant(0.0), seed=5,
                    schedule=PiecewiseSchedule(((0, 0.5, 0.5),)))
    trace = simulate_recu(cfg)
    assert abs(trace.actions.mean() - 0.5) <= 0.03


def test_empirical_frequency_matches_policy():
    # frozen belief: sample the policy many times from one state
    recog = RecognitionState([0.2, -0.5], [1.5, 3.0])
    params = ModelParams()
    p = action_probability(recog, 1.5, params)
    rng = np.random.default_rng(0)
    freq = (rng.random(10_000) < p).mean()
    assert abs(freq - p) <= 0.02
    # the simulator's first decision uses the same policy
    cfg = SimConfig(trials=1, curiosity=Constant(1.5), initial=recog)
    trace = simulate_recu(cfg)
    assert trace.p_select_accel[0] == pytest.approx(p)


def test_recognition_tracks_truth():
    maes = []
    for seed in range(5):
        trace = simulate_recu(SimConfig(seed=seed))
        f = 1 / (1 + np.exp(-trace.mu))
        mask = np.zeros(len(trace), bool)
        for start, stop in default_schedule(1000).stationary_ranges(1000):
            mask[(start + stop) // 2:stop] = True
        maes.append(np.abs(f[mask] - trace.prob[mask]).mean(axis=0))
    assert np.all(np.median(maes, axis=0) <= 0.15)


def _mean_run_length(actions):
    changes = np.count_nonzero(np.diff(actions))
    return len(actions) / (changes + 1)


def test_curiosity_shortens_runs():
    sched = PiecewiseSchedule(((0, 0.5, 0.5),))
    runs = {}
    for c in (0.0, 4.0):
        runs[c] = np.mean([_mean_run_length(simulate_recu(
            SimConfig(trials=2000, curiosity=Constant(c), schedule=sched, seed=s)).actions) for s in range(5)])
    assert runs[4.0] < runs[0.0]


def test_reward_weighting_mode():
    cfg = SimConfig(trials=50, curiosity=Constant(0.0), weighting="reward", seed=1)
    trace = simulate_recu(cfg)
    np.testing.assert_allclose(trace.utility, trace.expected_info)
    with pytest.raises(ValueError):
        SimConfig(weighting="other")


def test_random_walk_curiosity():
    trace = simulate_recu(SimConfig(trials=100, curiosity=RandomWalk(0.5), seed=9))
    assert trace.c[0] == 0.0
    assert np.std(np.diff(trace.c)) == pytest.approx(0.5, rel=0.3)


def test_sinusoid_trace_values():
    trace = simulate_recu(SimConfig(trials=1000, curiosity=Sinusoid(), seed=0))
    np.testing.assert_allclose(trace.c, 4 * np.sin(4 * np.pi * np.arange(1000) / 1000))


class TestEDA:
    def test_length(self):
        assert len(simulate_eda(240, 4)) == 960

    def test_degenerate_generator(self):
        e = simulate_eda(120, 4, event_rate_per_min=0, noise_sd=0, seed=1)
        assert np.all(e.phasic == 0)
        np.testing.assert_allclose(e.eda, e.tonic)
        assert np.all(np.diff(e.eda) > 0)

    def test_seeded(self):
        a = simulate_eda(60, 4, seed=7)
        b = simulate_eda(60, 4, seed=7)
        np.testing.assert_array_equal(a.eda, b.eda)

    def test_non_negative(self):
        e = simulate_eda(60, 4, baseline_us=0.0, drift_us_per_min=0.0, noise_sd=0.5, seed=2)
        assert np.all(e.eda >= 0)

    @pytest.mark.parametrize("duration, rate", [(0, 4), (10, 0), (-1, 4)])
    def test_rejects_bad_args(self, duration, rate):
        with pytest.raises(ValueError):
            simulate_eda(duration, rate)

    def test_bateman_peak(self):
        t = np.linspace(0, 10, 100_001)
        b = bateman(t)
        assert b.max() == pytest.approx(1.0, abs=1e-8)
        assert bateman(-1.0) == 0.0


def test_synthetic_session_layout():
    trace = simulate_recu(SimConfig(trials=12, seed=2))
    session = synthetic_session(trace)
    assert len(session["time_s"]) == 12 * 32
    assert np.all(session["speed_mps"] >= 0)
    means = session["speed_mps"].reshape(12, 32).mean(axis=1)
    expected = np.where(trace.actions == Action.ACCELERATE, 2.0, 0.6)
    np.testing.assert_allclose(means, expected, atol=1e-9)
    assert math.isclose(session["time_s"][1] - session["time_s"][0], 0.25)
