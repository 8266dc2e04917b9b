"""Forward simulation of the curiosity-weighted agent in a two-option task.

Also provides a synthetic EDA generator (tonic drift plus Bateman-shaped
phasic events) and a helper that renders a simulated trace as a raw
speed/EDA session so the preprocessing pipeline can be exercised end to end.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import expit, logit

from .core import (
    Action,
    ModelParams,
    RecognitionState,
    TrialRecord,
    entropy_terms,
    outcome_prob_terms,
    reward_intensity,
    update_recognition,
)

__all__ = [
    "PiecewiseSchedule",
    "RandomWalkSchedule",
    "Sinusoid",
    "Constant",
    "RandomWalk",
    "SimConfig",
    "SimTrace",
    "default_schedule",
    "curiosity_schedule",
    "simulate_recu",
    "rng_streams",
    "bateman",
    "SyntheticEDA",
    "simulate_eda",
    "synthetic_session",
    "TRACE_COLUMNS",
]

DEFAULT_LEVELS = ((0.1, 0.9), (0.4, 0.6), (0.9, 0.1), (0.6, 0.4))


def rng_streams(seed: int) -> dict:
    """Independent generators per concern, derived from one master seed."""
    policy, env, curiosity, eda = np.random.SeedSequence(seed).spawn(4)
    return {
        "policy": np.random.default_rng(policy),
        "environment": np.random.default_rng(env),
        "curiosity": np.random.default_rng(curiosity),
        "eda": np.random.default_rng(eda),
    }


# -- environment ---------------------------------------------------------------


@dataclass(frozen=True)
class PiecewiseSchedule:
    """Stationary segments ``(start_trial, prob_rest, prob_accel)``."""

    segments: tuple

    def __post_init__(self):
        segs = tuple((int(s), float(a), float(b)) for s, a, b in self.segments)
        if not segs or segs[0][0] != 0:
            raise ValueError("first segment must start at trial 0")
        starts = [s for s, _, _ in segs]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("segment starts must be strictly increasing")
        for _, a, b in segs:
            if not (0 < a < 1 and 0 < b < 1):
                raise ValueError("segment probabilities must lie in (0, 1)")
        object.__setattr__(self, "segments", segs)

    def realize(self, trials: int, rng=None):
        if self.segments[-1][0] >= trials:
            raise ValueError("a segment starts beyond the last trial")
        probs = np.empty((trials, 2))
        bounds = [s for s, _, _ in self.segments] + [trials]
        for (start, a, b), stop in zip(self.segments, bounds[1:]):
            probs[start:stop] = (a, b)
        return logit(probs), probs

    def stationary_ranges(self, trials: int):
        bounds = [s for s, _, _ in self.segments] + [trials]
        return list(zip(bounds[:-1], bounds[1:]))


@dataclass(frozen=True)
class RandomWalkSchedule:
    """Latent causes drifting as Gaussian random walks on the log-odds scale."""

    sigma_w: float = 0.4
    init_w: tuple = (0.0, 0.0)

    def realize(self, trials: int, rng: np.random.Generator):
        steps = self.sigma_w * rng.standard_normal((trials, 2))
        steps[0] = 0.0
        w = np.asarray(self.init_w, dtype=float) + np.cumsum(steps, axis=0)
        return w, expit(w)


def default_schedule(trials: int = 1000, levels=DEFAULT_LEVELS) -> PiecewiseSchedule:
    """Equal-length segments cycling the 10/40/60/90 % levels across options."""
    n = len(levels)
    starts = [round(k * trials / n) for k in range(n)]
    return PiecewiseSchedule(tuple((s, a, b) for s, (a, b) in zip(starts, levels)))


# -- curiosity -----------------------------------------------------------------


def curiosity_schedule(t, T: int, amplitude: float = 4.0, cycles: float = 4.0):
    """amplitude * sin(cycles * pi * t / T)."""
    if T <= 0:
        raise ValueError("T must be positive")
    return amplitude * np.sin(cycles * np.pi * np.asarray(t, dtype=float) / T)


@dataclass(frozen=True)
class Sinusoid:
    amplitude: float = 4.0
    cycles: float = 4.0

    def realize(self, trials, rng=None):
        if not math.isfinite(self.amplitude):
            raise ValueError("amplitude must be finite")
        return curiosity_schedule(np.arange(trials), trials, self.amplitude, self.cycles)


@dataclass(frozen=True)
class Constant:
    c: float = 0.0

    def realize(self, trials, rng=None):
        return np.full(trials, float(self.c))


@dataclass(frozen=True)
class RandomWalk:
    epsilon_c: float = 1.0
    init: float = 0.0

    def realize(self, trials, rng: np.random.Generator):
        steps = self.epsilon_c * rng.standard_normal(trials)
        steps[0] = 0.0
        return self.init + np.cumsum(steps)


CuriosityMode = Union[Sinusoid, Constant, RandomWalk]
Schedule = Union[PiecewiseSchedule, RandomWalkSchedule]


@dataclass
class SimConfig:
    """Simulation protocol.

    ``weighting`` selects which term the schedule value multiplies:
    ``"curiosity"`` gives U = E[reward] + c * E[info]; ``"reward"`` gives
    U = d * E[reward] + E[info] with the schedule value read as d.
    """

    trials: int = 1000
    params: ModelParams = field(default_factory=ModelParams)
    schedule: Optional[Schedule] = None
    curiosity: CuriosityMode = field(default_factory=Sinusoid)
    seed: int = 0
    weighting: str = "curiosity"
    initial: RecognitionState = field(default_factory=RecognitionState.initial)

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.schedule is None:
            self.schedule = default_schedule(self.trials) if self.trials >= 4 else \
                PiecewiseSchedule(((0, 0.5, 0.5),))
        if self.weighting not in ("curiosity", "reward"):
            raise ValueError("weighting must be 'curiosity' or 'reward'")


TRACE_COLUMNS = (
    "trial", "c_true", "w_rest", "w_accel", "prob_rest", "prob_accel",
    "action", "outcome", "mu_rest", "mu_accel", "p_rest", "p_accel",
    "exp_reward_rest", "exp_reward_accel", "exp_info_rest", "exp_info_accel",
    "marg_entropy_rest", "marg_entropy_accel", "cond_entropy_rest", "cond_entropy_accel",
    "utility_rest", "utility_accel", "p_select_accel",
)


@dataclass
class SimTrace:
    """Per-trial simulation record; per-option arrays have shape (T, 2).

    Belief columns are the pre-decision state used to pick that trial's
    action.
    """

    c: np.ndarray
    w: np.ndarray
    prob: np.ndarray
    actions: np.ndarray
    outcomes: np.ndarray
    mu: np.ndarray
    p: np.ndarray
    expected_reward: np.ndarray
    expected_info: np.ndarray
    marginal_entropy: np.ndarray
    conditional_entropy: np.ndarray
    utility: np.ndarray
    p_select_accel: np.ndarray
    seed: int = 0

    def __len__(self):
        return len(self.actions)

    def to_trials(self) -> list:
        return [
            TrialRecord(Action(int(a)), int(o), float(pr[a]))
            for a, o, pr in zip(self.actions, self.outcomes, self.prob)
        ]

    def rows(self):
        for t in range(len(self)):
            yield (
                t, self.c[t], *self.w[t], *self.prob[t],
                Action(int(self.actions[t])).label, int(self.outcomes[t]),
                *self.mu[t], *self.p[t],
                *self.expected_reward[t], *self.expected_info[t],
                *self.marginal_entropy[t], *self.conditional_entropy[t],
                *self.utility[t], self.p_select_accel[t],
            )

    def write_csv(self, fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for row in self.rows():
            writer.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    return str(v)


def simulate_recu(config: SimConfig) -> SimTrace:
    """Run the agent for ``config.trials`` trials; deterministic in the seed.

    Per trial: score both options under the current belief and c_t, sample
    the action from the sigmoid policy, sample the outcome from the
    environment's true probability for the chosen option, update the belief.
    """
    T = config.trials
    params = config.params
    streams = rng_streams(config.seed)
    w, prob = config.schedule.realize(T, streams["environment"])
    c = config.curiosity.realize(T, streams["curiosity"])
    u_policy = streams["policy"].random(T)
    u_env = streams["environment"].random(T)

    r = reward_intensity(1, params.p0)
    keys = ("mu", "p", "expected_reward", "expected_info", "marginal_entropy",
            "conditional_entropy", "utility")
    arr = {k: np.empty((T, 2)) for k in keys}
    actions = np.empty(T, dtype=int)
    outcomes = np.empty(T, dtype=int)
    p_sel = np.empty(T)

    state = config.initial
    for t in range(T):
        _, p1 = outcome_prob_terms(state.mu, state.p, params.sigma_w)
        marg, cond, info = entropy_terms(state.mu, state.p, params.sigma_w)
        info = np.maximum(info, 0.0)
        er = p1 * r
        if config.weighting == "curiosity":
            u = er + c[t] * info
        else:
            u = c[t] * er + info
        p_accel = expit(params.beta * (u[1] - u[0]))
        a = int(u_policy[t] < p_accel)
        o = int(u_env[t] < prob[t, a])

        arr["mu"][t] = state.mu
        arr["p"][t] = state.p
        arr["expected_reward"][t] = er
        arr["expected_info"][t] = info
        arr["marginal_entropy"][t] = marg
        arr["conditional_entropy"][t] = cond
        arr["utility"][t] = u
        p_sel[t] = p_accel
        actions[t] = a
        outcomes[t] = o
        state = update_recognition(state, a, o, params)

    return SimTrace(c=c, w=w, prob=prob, actions=actions, outcomes=outcomes,
                    p_select_accel=p_sel, seed=config.seed, **arr)


# -- synthetic EDA -------------------------------------------------------------


def bateman(t, tau_rise: float = 0.75, tau_decay: float = 2.0):
    """Bi-exponential SCR kernel scaled to unit peak; zero for t < 0."""
    t = np.asarray(t, dtype=float)
    t_peak = math.log(tau_decay / tau_rise) * tau_rise * tau_decay / (tau_decay - tau_rise)
    peak = math.exp(-t_peak / tau_decay) - math.exp(-t_peak / tau_rise)
    tp = np.maximum(t, 0.0)
    out = (np.exp(-tp / tau_decay) - np.exp(-tp / tau_rise)) / peak
    return np.where(t >= 0, out, 0.0)


@dataclass
class SyntheticEDA:
    time_s: np.ndarray
    eda: np.ndarray
    tonic: np.ndarray
    phasic: np.ndarray
    event_times: np.ndarray
    amplitudes: np.ndarray

    def __len__(self):
        return len(self.eda)


def simulate_eda(
    duration_s: float,
    rate_hz: float = 4.0,
    event_rate_per_min: float = 3.0,
    seed: int = 0,
    *,
    baseline_us: float = 2.0,
    drift_us_per_min: float = 0.05,
    noise_sd: float = 0.01,
    amplitude_range: tuple = (0.1, 0.5),
    tau_rise: float = 0.75,
    tau_decay: float = 2.0,
    events: Optional[Sequence[tuple]] = None,
    rng: Optional[np.random.Generator] = None,
) -> SyntheticEDA:
    """Tonic linear drift + Bateman events at Poisson times + Gaussian noise.

    Pass ``events=[(time_s, amplitude_us), ...]`` to place events explicitly
    instead of drawing them.
    """
    if duration_s <= 0 or rate_hz <= 0:
        raise ValueError("duration_s and rate_hz must be positive")
    if rng is None:
        rng = rng_streams(seed)["eda"]
    n = int(round(duration_s * rate_hz))
    time_s = np.arange(n) / rate_hz
    tonic = baseline_us + drift_us_per_min * time_s / 60.0

    if events is None:
        n_events = rng.poisson(event_rate_per_min * duration_s / 60.0) if event_rate_per_min > 0 else 0
        onsets = np.sort(rng.uniform(0.0, duration_s, n_events))
        amps = rng.uniform(*amplitude_range, n_events)
    else:
        onsets = np.array([e[0] for e in events], dtype=float)
        amps = np.array([e[1] for e in events], dtype=float)

    phasic = np.zeros(n)
    for onset, amp in zip(onsets, amps):
        phasic += amp * bateman(time_s - onset, tau_rise, tau_decay)
    noise = noise_sd * rng.standard_normal(n) if noise_sd > 0 else 0.0
    eda = np.maximum(tonic + phasic + noise, 0.0)
    return SyntheticEDA(time_s, eda, tonic, phasic, onsets, amps)


def synthetic_session(
    trace: SimTrace,
    rate_hz: float = 4.0,
    window_s: float = 8.0,
    *,
    rest_speed: float = 0.6,
    accel_speed: float = 2.0,
    sick_msdv: float = 0.8,
    seed: Optional[int] = None,
) -> dict:
    """Render a trace as a raw speed/EDA session (columns of the session CSV).

    Each trial becomes one window.  Mean speed encodes the action; a
    two-cycle speed oscillation of analytic MSDV ``sick_msdv`` marks
    cybersickness trials; one SCR per window with amplitude
    0.1 + 0.4 * (true probability of the chosen option) encodes the truth.
    """
    n_win = int(round(window_s * rate_hz))
    T = len(trace)
    t_local = np.arange(n_win) / rate_hz
    omega = 2 * math.pi * 2 / window_s
    # MSDV of A*sin(omega t) over a window of two full cycles is A*omega*sqrt(window/2)
    osc_amp = sick_msdv / (omega * math.sqrt(window_s / 2))
    speed = np.empty(T * n_win)
    events = []
    for t in range(T):
        a = int(trace.actions[t])
        level = accel_speed if a == Action.ACCELERATE else rest_speed
        seg = np.full(n_win, level)
        if trace.outcomes[t]:
            seg = seg + osc_amp * np.sin(omega * t_local)
        speed[t * n_win:(t + 1) * n_win] = seg
        events.append((t * window_s + 1.0, 0.1 + 0.4 * float(trace.prob[t, a])))
    duration = T * window_s
    eda = simulate_eda(duration, rate_hz, events=events,
                       rng=rng_streams(trace.seed if seed is None else seed)["eda"])
    return {"time_s": eda.time_s, "speed_mps": np.maximum(speed, 0.0), "eda_us": eda.eda}
