"""Sequential Monte Carlo decoder for curiosity and cybersickness probability.

Given an observed action/outcome sequence, the decoder replays the agent's
belief update once (it depends only on observed history) and runs a particle
filter over the true latent causes ``w`` and the curiosity ``c``.  Action
likelihoods come from the sigmoid policy, outcome likelihoods from the
Bernoulli model on the chosen option's latent cause.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit, log_expit

from .core import ModelParams, RecognitionState, TrialRecord, replay
from .particles import ParticleEnsemble

__all__ = [
    "DecoderConfig",
    "DecodedTrajectory",
    "decode",
    "rmse",
    "pearson",
    "DECODED_COLUMNS",
    "read_decoded_csv",
]

DECODED_COLUMNS = (
    "trial", "curiosity_mean", "curiosity_sd", "p_sick_rest", "p_sick_accel",
    "conf_rest", "conf_accel", "p_select_accel", "ess",
)


@dataclass
class DecoderConfig:
    """Particle-filter settings shared by every decoder in the package.

    ``epsilon_c`` is the per-trial SD of the curiosity (or reward-weight)
    random walk; ``epsilon_alpha``/``epsilon_beta`` drive the Q-learning
    meta-parameters.
    """

    n_particles: int = 5000
    params: ModelParams = field(default_factory=ModelParams)
    epsilon_c: float = 1.0
    resample_threshold: float = 0.5
    seed: int = 0
    init_w_sd: float = 1.0
    init_c_sd: float = 2.0
    epsilon_alpha: float = 0.002
    epsilon_beta: float = 0.02
    initial: RecognitionState = field(default_factory=RecognitionState.initial)

    def __post_init__(self):
        if self.n_particles < 100:
            raise ValueError("n_particles must be >= 100")
        if not 0 < self.resample_threshold <= 1:
            raise ValueError("resample_threshold must lie in (0, 1]")
        if self.epsilon_c < 0 or self.epsilon_alpha < 0 or self.epsilon_beta < 0:
            raise ValueError("drift SDs must be >= 0")


@dataclass
class DecodedTrajectory:
    """Filtered per-trial posterior summaries; per-option arrays are (T, 2)."""

    curiosity_mean: np.ndarray
    curiosity_sd: np.ndarray
    p_sick: np.ndarray
    confidence: np.ndarray
    p_select_accel: np.ndarray
    ess: np.ndarray
    expected_info: Optional[np.ndarray] = None
    actions: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.curiosity_mean)

    def info_gain_selected(self) -> np.ndarray:
        """Expected information gain of the option actually chosen each trial."""
        if self.expected_info is None or self.actions is None:
            raise ValueError("trajectory carries no information-gain replay")
        return self.expected_info[np.arange(len(self)), self.actions]

    def write_csv(self, fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DECODED_COLUMNS)
        for t in range(len(self)):
            row = (self.curiosity_mean[t], self.curiosity_sd[t], *self.p_sick[t],
                   *self.confidence[t], self.p_select_accel[t], self.ess[t])
            writer.writerow([t] + [format(float(v), ".12g") for v in row])


def read_decoded_csv(fh) -> DecodedTrajectory:
    reader = csv.DictReader(fh)
    if reader.fieldnames is None or tuple(reader.fieldnames) != DECODED_COLUMNS:
        raise ValueError(f"unexpected decoded-trajectory header {reader.fieldnames}")
    rows = list(reader)
    if not rows:
        raise ValueError("decoded trajectory is empty")

    def col(name):
        return np.array([float(r[name]) for r in rows])

    return DecodedTrajectory(
        curiosity_mean=col("curiosity_mean"),
        curiosity_sd=col("curiosity_sd"),
        p_sick=np.column_stack([col("p_sick_rest"), col("p_sick_accel")]),
        confidence=np.column_stack([col("conf_rest"), col("conf_accel")]),
        p_select_accel=col("p_select_accel"),
        ess=col("ess"),
    )


def _decode_linear(trials, cfg: DecoderConfig, offset, slope):
    """Particle filter over (w_rest, w_accel, z) where dU = offset_t + z * slope_t.

    Returns a dict of per-trial summary arrays for z and f(w).
    """
    params = cfg.params
    n = cfg.n_particles
    T = len(trials)
    rng = np.random.default_rng(cfg.seed)
    ens = ParticleEnsemble(
        {"w": cfg.init_w_sd * rng.standard_normal((n, 2)),
         "z": cfg.init_c_sd * rng.standard_normal(n)},
        rng,
    )
    out = {
        "z_mean": np.empty(T), "z_sd": np.empty(T), "p_sick": np.empty((T, 2)),
        "p_select_accel": np.empty(T), "ess": np.empty(T),
    }
    for t, rec in enumerate(trials):
        a, o = int(rec.action), rec.outcome
        ens["w"] = ens["w"] + params.sigma_w * rng.standard_normal((n, 2))
        ens["z"] = ens["z"] + cfg.epsilon_c * rng.standard_normal(n)

        x = params.beta * (offset[t] + ens["z"] * slope[t])
        log_action = log_expit(x) if a == 1 else log_expit(-x)
        wa = ens["w"][:, a]
        log_outcome = log_expit(wa) if o == 1 else log_expit(-wa)
        ens.correct(log_action + log_outcome, t)

        out["z_mean"][t], out["z_sd"][t] = ens.mean_sd(ens["z"])
        out["p_sick"][t] = ens.mean(expit(ens["w"]))
        out["p_select_accel"][t] = ens.mean(expit(x))
        out["ess"][t] = ens.ess()
        ens.maybe_resample(cfg.resample_threshold)
    return out


def _check_trials(trials):
    if len(trials) == 0:
        raise ValueError("decoder needs at least one trial")
    return [t if isinstance(t, TrialRecord) else TrialRecord(*t) for t in trials]


def decode(trials: Sequence[TrialRecord], cfg: Optional[DecoderConfig] = None) -> DecodedTrajectory:
    """Filtered posterior over curiosity and cybersickness probabilities.

    Raises ``ValueError`` on empty input and ``DegenerateLikelihoodError``
    (carrying the trial index) if every particle weight vanishes.
    """
    cfg = cfg or DecoderConfig()
    trials = _check_trials(trials)
    rep = replay(trials, cfg.params, cfg.initial)
    d_reward = rep.expected_reward[:, 1] - rep.expected_reward[:, 0]
    d_info = rep.expected_info[:, 1] - rep.expected_info[:, 0]
    res = _decode_linear(trials, cfg, d_reward, d_info)
    return DecodedTrajectory(
        curiosity_mean=res["z_mean"],
        curiosity_sd=res["z_sd"],
        p_sick=res["p_sick"],
        confidence=rep.confidence_post,
        p_select_accel=res["p_select_accel"],
        ess=res["ess"],
        expected_info=rep.expected_info,
        actions=np.array([int(t.action) for t in trials]),
    )


def rmse(estimate, truth) -> float:
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimate.shape != truth.shape or estimate.size == 0:
        raise ValueError("rmse needs two non-empty series of equal length")
    return float(np.sqrt(np.mean(np.square(estimate - truth))))


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise ValueError("pearson needs two series of equal length >= 2")
    xc = x - x.mean()
    yc = y - y.mean()
    denom = np.sqrt(np.dot(xc, xc) * np.dot(yc, yc))
    if denom == 0:
        raise ValueError("correlation undefined for a constant series")
    return float(np.clip(np.dot(xc, yc) / denom, -1.0, 1.0))
