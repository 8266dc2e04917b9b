"""Curiosity-weighted decision model, particle-filter decoding and VR session preprocessing."""

from .core import (
    Action,
    ModelParams,
    RecognitionState,
    TrialRecord,
    UtilityBreakdown,
    action_probability,
    confidence,
    expected_info_gain,
    expected_reward,
    logistic,
    net_utility,
    predict_outcome_prob,
    reward_intensity,
    update_recognition,
)
from .ifep import DecodedTrajectory, DecoderConfig, decode, rmse
from .sim import SimConfig, SimTrace, simulate_recu

__version__ = "0.1.0"
