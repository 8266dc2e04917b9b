"""Curiosity-weighted decision model for a two-option task.

The agent holds a Gaussian belief over the log-odds ("latent cause") of
cybersickness for each option, scores each option by expected reward plus
curiosity times expected information gain, and picks Accelerate with a
sigmoid of the utility difference.

Option numbering: ``Action.REST`` is option 1 and ``Action.ACCELERATE`` is
option 2.  Their integer values (0 and 1) index every per-option array in
this package.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit

__all__ = [
    "PROB_FLOOR",
    "Action",
    "ModelParams",
    "RecognitionState",
    "TrialRecord",
    "UtilityBreakdown",
    "Replay",
    "logistic",
    "reward_intensity",
    "predict_outcome_prob",
    "expected_reward",
    "expected_info_gain",
    "net_utility",
    "selection_probability",
    "action_probability",
    "update_recognition",
    "confidence",
    "outcome_prob_terms",
    "entropy_terms",
    "replay",
]

PROB_FLOOR = 1e-9


class Action(enum.IntEnum):
    REST = 0
    ACCELERATE = 1

    @property
    def option_number(self) -> int:
        return int(self) + 1

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, value) -> "Action":
        """Accept an Action, 0/1, or the labels ``rest``/``accelerate``."""
        if isinstance(value, Action):
            return value
        if isinstance(value, str):
            key = value.strip().lower()
            if key in ("rest", "0"):
                return cls.REST
            if key in ("accelerate", "accel", "1"):
                return cls.ACCELERATE
            raise ValueError(f"unknown action label {value!r}")
        return cls(int(value))


def _check_outcome(o) -> int:
    if o not in (0, 1):
        raise ValueError(f"outcome must be 0 or 1, got {o!r}")
    return int(o)


@dataclass(frozen=True)
class ModelParams:
    alpha: float = 0.05
    beta: float = 2.0
    p0: float = 0.8
    sigma_w: float = 0.4
    epsilon_c: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "beta", "p0", "sigma_w", "epsilon_c"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if not 0 < self.p0 < 1:
            raise ValueError("p0 must lie in (0, 1)")
        if self.sigma_w <= 0:
            raise ValueError("sigma_w must be > 0")
        if self.epsilon_c < 0:
            raise ValueError("epsilon_c must be >= 0")

    @property
    def p_w(self) -> float:
        """Precision of the latent-cause random walk."""
        return self.sigma_w ** -2


@dataclass(frozen=True)
class RecognitionState:
    """Per-option belief mean (log-odds) and precision."""

    mu: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float).reshape(2)
        p = np.array(self.p, dtype=float).reshape(2)
        if not np.all(np.isfinite(mu)):
            raise ValueError("recognition mean must be finite")
        if not np.all(p > 0) or not np.all(np.isfinite(p)):
            raise ValueError("recognition precision must be finite and > 0")
        mu.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "p", p)

    @classmethod
    def initial(cls, mu: float = 0.0, p: float = 1.0) -> "RecognitionState":
        return cls(np.full(2, mu), np.full(2, p))

    def prob(self) -> np.ndarray:
        """Believed cybersickness probability f(mu) per option."""
        return expit(self.mu)


@dataclass(frozen=True)
class TrialRecord:
    """One decision unit: chosen action, binary outcome, optional truth."""

    action: Action
    outcome: int
    sick_prob: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "action", Action.parse(self.action))
        object.__setattr__(self, "outcome", _check_outcome(self.outcome))


@dataclass(frozen=True)
class UtilityBreakdown:
    expected_reward: float
    marginal_entropy: float
    conditional_entropy: float
    expected_info: float
    net_utility: float
    curiosity: float = 0.0
    # unclamped diagnostics
    expected_info_raw: float = field(default=0.0)
    p_outcome_raw: float = field(default=0.5)


def logistic(x):
    """1 / (1 + exp(-x)); raises on non-finite input."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("logistic input must be finite")
    out = expit(arr)
    return float(out) if out.ndim == 0 else out


def _clip_prob(x):
    return np.clip(x, PROB_FLOOR, 1.0 - PROB_FLOOR)


def reward_intensity(o: int, p0: float) -> float:
    if not 0 < p0 < 1:
        raise ValueError("p0 must lie in (0, 1)")
    if _check_outcome(o) == 0:
        return 0.0
    return math.log(p0 / (1.0 - p0))


# -- vectorised kernels -------------------------------------------------------
# mu and p may be scalars or arrays; sigma_w is a scalar.


def outcome_prob_terms(mu, p, sigma_w):
    """Second-order approximation of P(o=1) under the predictive belief.

    Returns ``(raw, clamped)``; ``raw`` may leave [0, 1] when the variance
    is large.
    """
    f = expit(mu)
    var = 1.0 / np.asarray(p, dtype=float) + sigma_w ** 2
    raw = f + 0.5 * f * (1.0 - f) * (1.0 - 2.0 * f) * var
    return raw, _clip_prob(raw)


def entropy_terms(mu, p, sigma_w):
    """Marginal and conditional outcome entropies (nats), and raw info gain."""
    mu = np.asarray(mu, dtype=float)
    _, p1 = outcome_prob_terms(mu, p, sigma_w)
    marginal = -(p1 * np.log(p1) + (1.0 - p1) * np.log(1.0 - p1))

    f = _clip_prob(expit(mu))
    var = 1.0 / np.asarray(p, dtype=float) + sigma_w ** 2
    g = f * np.log(f) + (1.0 - f) * np.log(1.0 - f)
    # g'' = f(1-f)(1 + (1-2f) * logit f); logit f == mu up to clamping
    g2 = f * (1.0 - f) * (1.0 + (1.0 - 2.0 * f) * np.log(f / (1.0 - f)))
    conditional = -(g + 0.5 * g2 * var)
    return marginal, conditional, marginal - conditional


# -- per-option operations ----------------------------------------------------


def predict_outcome_prob(recog: RecognitionState, option, params: ModelParams, o: int = 1) -> float:
    i = Action.parse(option)
    raw, _ = outcome_prob_terms(recog.mu[i], recog.p[i], params.sigma_w)
    raw = float(raw)
    value = raw if _check_outcome(o) == 1 else 1.0 - raw
    return float(_clip_prob(value))


def expected_reward(recog: RecognitionState, option, params: ModelParams) -> float:
    return predict_outcome_prob(recog, option, params, 1) * reward_intensity(1, params.p0)


def expected_info_gain(recog: RecognitionState, option, params: ModelParams) -> dict:
    """Marginal entropy, conditional entropy and their (clamped) difference.

    The Taylor truncation can push the difference slightly below zero; the
    returned ``expected_info`` is clamped at 0 and the raw value is kept
    under ``expected_info_raw``.
    """
    i = Action.parse(option)
    marginal, conditional, raw = entropy_terms(recog.mu[i], recog.p[i], params.sigma_w)
    return {
        "marginal_entropy": float(marginal),
        "conditional_entropy": float(conditional),
        "expected_info": max(float(raw), 0.0),
        "expected_info_raw": float(raw),
    }


def net_utility(recog: RecognitionState, option, c: float, params: ModelParams) -> UtilityBreakdown:
    if not math.isfinite(c):
        raise ValueError("curiosity must be finite")
    i = Action.parse(option)
    p_raw, _ = outcome_prob_terms(recog.mu[i], recog.p[i], params.sigma_w)
    er = expected_reward(recog, i, params)
    info = expected_info_gain(recog, i, params)
    return UtilityBreakdown(
        expected_reward=er,
        marginal_entropy=info["marginal_entropy"],
        conditional_entropy=info["conditional_entropy"],
        expected_info=info["expected_info"],
        net_utility=er + c * info["expected_info"],
        curiosity=float(c),
        expected_info_raw=info["expected_info_raw"],
        p_outcome_raw=float(p_raw),
    )


def selection_probability(delta_u, beta: float):
    """Probability of Accelerate given U(Accelerate) - U(Rest)."""
    out = expit(beta * np.asarray(delta_u, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def action_probability(recog: RecognitionState, c: float, params: ModelParams) -> float:
    u_rest = net_utility(recog, Action.REST, c, params).net_utility
    u_accel = net_utility(recog, Action.ACCELERATE, c, params).net_utility
    return selection_probability(u_accel - u_rest, params.beta)


def update_recognition(recog: RecognitionState, a, o: int, params: ModelParams) -> RecognitionState:
    """Predict-then-correct belief update after observing ``o`` for action ``a``.

    Both options diffuse (variance grows by sigma_w**2); only the chosen
    option receives the observation correction.
    """
    a = Action.parse(a)
    o = _check_outcome(o)
    k = params.sigma_w ** 2 + 1.0 / recog.p
    p_new = 1.0 / k
    mu_new = recog.mu.copy()
    f = expit(recog.mu[a])
    p_new[a] += f * (1.0 - f)
    mu_new[a] += params.alpha * (o - f)
    return RecognitionState(mu_new, p_new)


def confidence(recog: RecognitionState, option=None):
    """Precision rescaled by the squared logistic slope, p / f'(mu)**2.

    With ``option=None`` returns both options as an array.
    """
    f = expit(recog.mu)
    gamma = recog.p / (f * (1.0 - f)) ** 2
    if option is None:
        return gamma
    return float(gamma[Action.parse(option)])


# -- replay over an observed history -----------------------------------------


@dataclass
class Replay:
    """Deterministic belief trajectory reconstructed from observed trials.

    Arrays have shape (T, 2). ``mu``/``p`` and the utility terms are the
    pre-decision belief for each trial; ``mu_post``/``p_post`` hold the
    belief after that trial's outcome.
    """

    mu: np.ndarray
    p: np.ndarray
    mu_post: np.ndarray
    p_post: np.ndarray
    expected_reward: np.ndarray
    expected_info: np.ndarray
    marginal_entropy: np.ndarray
    conditional_entropy: np.ndarray

    def __len__(self):
        return self.mu.shape[0]

    @property
    def confidence_post(self) -> np.ndarray:
        f = expit(self.mu_post)
        return self.p_post / (f * (1.0 - f)) ** 2


def replay(
    trials: Sequence[TrialRecord],
    params: ModelParams,
    initial: Optional[RecognitionState] = None,
) -> Replay:
    state = initial or RecognitionState.initial()
    n = len(trials)
    out = {k: np.empty((n, 2)) for k in (
        "mu", "p", "mu_post", "p_post", "expected_reward", "expected_info",
        "marginal_entropy", "conditional_entropy")}
    r = reward_intensity(1, params.p0)
    for t, rec in enumerate(trials):
        _, p1 = outcome_prob_terms(state.mu, state.p, params.sigma_w)
        marg, cond, info = entropy_terms(state.mu, state.p, params.sigma_w)
        out["mu"][t] = state.mu
        out["p"][t] = state.p
        out["expected_reward"][t] = p1 * r
        out["expected_info"][t] = np.maximum(info, 0.0)
        out["marginal_entropy"][t] = marg
        out["conditional_entropy"][t] = cond
        state = update_recognition(state, rec.action, rec.outcome, params)
        out["mu_post"][t] = state.mu
        out["p_post"][t] = state.p
    return Replay(**out)
