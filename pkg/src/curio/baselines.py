"""Alternative decoders: subjective reward weighting and drifting Q-learning."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import log_softmax, softmax

from .core import Action, ModelParams, RecognitionState, TrialRecord, expected_info_gain, expected_reward, replay
from .ifep import DecoderConfig, _check_trials, _decode_linear
from .particles import ParticleEnsemble
from .sim import rng_streams

__all__ = [
    "ALPHA_BOUNDS",
    "BETA_BOUNDS",
    "subjective_net_utility",
    "SubjectiveTrajectory",
    "decode_subjective",
    "log_mean",
    "QLearnState",
    "q_step",
    "simulate_qlearning",
    "QTrajectory",
    "decode_qlearning",
]

ALPHA_BOUNDS = (1e-3, 1.0 - 1e-3)
BETA_BOUNDS = (0.0, 20.0)


# -- subjective reward ---------------------------------------------------------


def subjective_net_utility(recog: RecognitionState, d: float, params: ModelParams, option) -> float:
    """d * E[reward] + E[info]."""
    info = expected_info_gain(recog, option, params)["expected_info"]
    return d * expected_reward(recog, option, params) + info


def log_mean(values) -> float:
    """Mean of ln(values); NaN when any value is non-positive."""
    values = np.asarray(values, dtype=float)
    if values.size == 0 or np.any(values <= 0):
        return float("nan")
    return float(np.mean(np.log(values)))


@dataclass
class SubjectiveTrajectory:
    d_mean: np.ndarray
    d_sd: np.ndarray
    p_sick: np.ndarray
    ess: np.ndarray

    def __len__(self):
        return len(self.d_mean)

    def summary(self) -> dict:
        return {"mean": float(np.mean(self.d_mean)), "log_mean": log_mean(self.d_mean)}

    def write_csv(self, fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("trial", "d_mean", "d_sd", "p_sick_rest", "p_sick_accel", "ess"))
        for t in range(len(self)):
            row = (self.d_mean[t], self.d_sd[t], *self.p_sick[t], self.ess[t])
            writer.writerow([t] + [format(float(v), ".12g") for v in row])


def decode_subjective(trials: Sequence[TrialRecord], cfg: Optional[DecoderConfig] = None) -> SubjectiveTrajectory:
    """Same filter as :func:`curio.ifep.decode` with the reward weight d as latent.

    d drifts as a Gaussian random walk with SD ``cfg.epsilon_c``.
    """
    cfg = cfg or DecoderConfig()
    trials = _check_trials(trials)
    rep = replay(trials, cfg.params, cfg.initial)
    d_reward = rep.expected_reward[:, 1] - rep.expected_reward[:, 0]
    d_info = rep.expected_info[:, 1] - rep.expected_info[:, 0]
    res = _decode_linear(trials, cfg, d_info, d_reward)
    return SubjectiveTrajectory(res["z_mean"], res["z_sd"], res["p_sick"], res["ess"])


# -- Q-learning ----------------------------------------------------------------


@dataclass(frozen=True)
class QLearnState:
    q: np.ndarray
    alpha_t: float
    beta_t: float

    def __post_init__(self):
        q = np.array(self.q, dtype=float).reshape(2)
        if not np.all(np.isfinite(q)):
            raise ValueError("Q values must be finite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "alpha_t", float(np.clip(self.alpha_t, *ALPHA_BOUNDS)))
        object.__setattr__(self, "beta_t", float(np.clip(self.beta_t, *BETA_BOUNDS)))

    def probabilities(self) -> np.ndarray:
        return softmax(self.beta_t * self.q)


def q_step(
    state: QLearnState,
    a,
    r: int,
    rng: Optional[np.random.Generator] = None,
    *,
    epsilon_alpha: float = 0.0,
    epsilon_beta: float = 0.0,
    chosen_only: bool = False,
):
    """One value update followed by meta-parameter drift.

    Every option moves toward ``r * a_i``; the unchosen option (a_i = 0)
    therefore decays toward 0 unless ``chosen_only`` is set.  Returns the
    new state and the softmax selection probabilities it implies.
    """
    a = Action.parse(a)
    indicator = np.zeros(2)
    indicator[a] = 1.0
    step = state.alpha_t * (r * indicator - state.q)
    if chosen_only:
        step = step * indicator
    q = state.q + step
    alpha, beta = state.alpha_t, state.beta_t
    if rng is not None:
        alpha += epsilon_alpha * rng.standard_normal()
        beta += epsilon_beta * rng.standard_normal()
    new = QLearnState(q, alpha, beta)
    return new, new.probabilities()


def simulate_qlearning(
    trials: int,
    alpha: float,
    beta: float,
    schedule=None,
    seed: int = 0,
    *,
    epsilon_alpha: float = 0.0,
    epsilon_beta: float = 0.0,
    chosen_only: bool = False,
):
    """Softmax Q-learner in a two-option environment; returns TrialRecords."""
    from .sim import default_schedule

    schedule = schedule or default_schedule(trials)
    streams = rng_streams(seed)
    _, prob = schedule.realize(trials, streams["environment"])
    state = QLearnState(np.zeros(2), alpha, beta)
    drift_rng = streams["curiosity"] if (epsilon_alpha or epsilon_beta) else None
    records = []
    for t in range(trials):
        a = int(streams["policy"].random() < state.probabilities()[1])
        o = int(streams["environment"].random() < prob[t, a])
        records.append(TrialRecord(Action(a), o, float(prob[t, a])))
        state, _ = q_step(state, a, o, drift_rng, epsilon_alpha=epsilon_alpha,
                          epsilon_beta=epsilon_beta, chosen_only=chosen_only)
    return records


@dataclass
class QTrajectory:
    alpha_mean: np.ndarray
    alpha_sd: np.ndarray
    beta_mean: np.ndarray
    beta_sd: np.ndarray
    q_mean: np.ndarray
    p_select_accel: np.ndarray
    ess: np.ndarray

    def __len__(self):
        return len(self.alpha_mean)

    def write_csv(self, fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("trial", "alpha_mean", "alpha_sd", "beta_mean", "beta_sd",
                         "q_rest", "q_accel", "p_select_accel", "ess"))
        for t in range(len(self)):
            row = (self.alpha_mean[t], self.alpha_sd[t], self.beta_mean[t], self.beta_sd[t],
                   *self.q_mean[t], self.p_select_accel[t], self.ess[t])
            writer.writerow([t] + [format(float(v), ".12g") for v in row])


def decode_qlearning(
    trials: Sequence[TrialRecord],
    cfg: Optional[DecoderConfig] = None,
    *,
    chosen_only: bool = False,
    init_beta_max: float = 10.0,
) -> QTrajectory:
    """Particle filter over drifting (alpha, beta) with Q replayed per particle.

    Initial particles: alpha ~ U(ALPHA_BOUNDS), beta ~ U(0, init_beta_max).
    """
    cfg = cfg or DecoderConfig()
    trials = _check_trials(trials)
    n = cfg.n_particles
    T = len(trials)
    rng = np.random.default_rng(cfg.seed)
    ens = ParticleEnsemble(
        {"alpha": rng.uniform(*ALPHA_BOUNDS, n),
         "beta": rng.uniform(0.0, init_beta_max, n),
         "q": np.zeros((n, 2))},
        rng,
    )
    out = {k: np.empty(T) for k in ("alpha_mean", "alpha_sd", "beta_mean", "beta_sd",
                                     "p_select_accel", "ess")}
    out["q_mean"] = np.empty((T, 2))
    for t, rec in enumerate(trials):
        a, r = int(rec.action), rec.outcome
        ens["alpha"] = np.clip(ens["alpha"] + cfg.epsilon_alpha * rng.standard_normal(n), *ALPHA_BOUNDS)
        ens["beta"] = np.clip(ens["beta"] + cfg.epsilon_beta * rng.standard_normal(n), *BETA_BOUNDS)

        logp = log_softmax(ens["beta"][:, None] * ens["q"], axis=1)
        ens.correct(logp[:, a], t)

        out["alpha_mean"][t], out["alpha_sd"][t] = ens.mean_sd(ens["alpha"])
        out["beta_mean"][t], out["beta_sd"][t] = ens.mean_sd(ens["beta"])
        out["q_mean"][t] = ens.mean(ens["q"])
        out["p_select_accel"][t] = ens.mean(np.exp(logp[:, 1]))
        out["ess"][t] = ens.ess()
        ens.maybe_resample(cfg.resample_threshold)

        indicator = np.zeros(2)
        indicator[a] = 1.0
        step = ens["alpha"][:, None] * (r * indicator - ens["q"])
        if chosen_only:
            step = step * indicator
        ens["q"] = ens["q"] + step
    return QTrajectory(**out)
