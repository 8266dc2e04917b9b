"""Weighted particle ensembles: log-space normalisation, ESS, systematic resampling."""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

__all__ = [
    "DegenerateLikelihoodError",
    "ParticleEnsemble",
    "systematic_resample",
    "effective_sample_size",
]


class DegenerateLikelihoodError(RuntimeError):
    """Every particle received zero likelihood at some trial."""

    def __init__(self, trial: int):
        super().__init__(f"all particle weights vanished at trial {trial}")
        self.trial = trial


def effective_sample_size(weights: np.ndarray) -> float:
    return 1.0 / float(np.sum(np.square(weights)))


def systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Ancestor indices using one uniform offset and N evenly spaced pointers."""
    n = len(weights)
    positions = (rng.random() + np.arange(n)) / n
    cumulative = np.cumsum(weights)
    cumulative[-1] = 1.0
    return np.searchsorted(cumulative, positions, side="right")


class ParticleEnsemble:
    """Named state arrays sharing one leading particle axis plus log weights."""

    def __init__(self, states: dict, rng: np.random.Generator):
        sizes = {len(v) for v in states.values()}
        if len(sizes) != 1:
            raise ValueError("all particle state arrays need the same length")
        self.n = sizes.pop()
        self.states = states
        self.rng = rng
        self.log_weights = np.full(self.n, -np.log(self.n))

    def __getitem__(self, key):
        return self.states[key]

    def __setitem__(self, key, value):
        self.states[key] = value

    def correct(self, log_likelihood: np.ndarray, trial: int) -> np.ndarray:
        """Add log-likelihoods, renormalise, return normalised weights."""
        lw = self.log_weights + log_likelihood
        total = logsumexp(lw)
        if not np.isfinite(total):
            raise DegenerateLikelihoodError(trial)
        lw = lw - total
        self.log_weights = lw
        return np.exp(lw)

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def ess(self) -> float:
        return effective_sample_size(self.weights)

    def mean(self, values: np.ndarray) -> np.ndarray:
        return self.weights @ values

    def mean_sd(self, values: np.ndarray):
        w = self.weights
        m = w @ values
        var = w @ np.square(values - m)
        return m, np.sqrt(max(var, 0.0))

    def maybe_resample(self, threshold: float) -> bool:
        if self.ess() >= threshold * self.n:
            return False
        idx = systematic_resample(self.weights, self.rng)
        for key, value in self.states.items():
            self.states[key] = value[idx]
        self.log_weights = np.full(self.n, -np.log(self.n))
        return True
