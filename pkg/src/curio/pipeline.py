"""Preprocessing: raw speed/EDA sessions to per-trial action/outcome records.

Sessions are cut into consecutive 8 s windows.  Mean speed labels the
action, windowed MSDV labels the outcome, and the mean phasic EDA per window,
min-max normalised over the session, gives the ground-truth cybersickness
probability.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid
from scipy.ndimage import minimum_filter1d, uniform_filter1d

from .core import Action, TrialRecord

__all__ = [
    "CSVFormatError",
    "RawSession",
    "TrialWindow",
    "Severity",
    "SSQRecord",
    "segment_trials",
    "label_action",
    "msdv",
    "label_outcome",
    "extract_scr",
    "scr_to_probability",
    "ssq",
    "process_session",
    "read_session_csv",
    "write_session_csv",
    "read_ssq_csv",
    "write_trials_csv",
    "read_trials_csv",
    "SESSION_COLUMNS",
    "SSQ_COLUMNS",
    "TRIAL_COLUMNS",
]

SESSION_COLUMNS = ("time_s", "speed_mps", "eda_us")
SSQ_COLUMNS = ("participant_id", "task_index", "ssq_pre", "ssq_post")
TRIAL_COLUMNS = ("participant_id", "task_index", "trial", "mean_speed", "msdv",
                 "action", "outcome", "scr_mean", "sick_prob_truth")

NOMINAL_DT = 0.25


class CSVFormatError(ValueError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


@dataclass
class RawSession:
    time_s: np.ndarray
    speed_mps: np.ndarray
    eda_us: np.ndarray
    participant_id: str = "p0"
    task_index: int = 1
    nominal_dt: float = NOMINAL_DT

    def __post_init__(self):
        self.time_s = np.asarray(self.time_s, dtype=float)
        self.speed_mps = np.asarray(self.speed_mps, dtype=float)
        self.eda_us = np.asarray(self.eda_us, dtype=float)
        n = len(self.time_s)
        if len(self.speed_mps) != n or len(self.eda_us) != n:
            raise ValueError("time, speed and EDA series must have equal length")
        if n < 2:
            raise ValueError("session needs at least two samples")
        dt = np.diff(self.time_s)
        if np.any(dt <= 0):
            raise ValueError("time must be strictly increasing")
        if abs(np.median(dt) - self.nominal_dt) > 0.1 * self.nominal_dt:
            raise ValueError(f"median sampling interval {np.median(dt):.4g} s is not within 10% "
                             f"of the nominal {self.nominal_dt} s")
        if np.any(self.speed_mps < 0) or np.any(self.eda_us < 0):
            raise ValueError("speed and EDA must be non-negative")
        if not 1 <= int(self.task_index) <= 3:
            raise ValueError("task_index must be 1, 2 or 3")

    @property
    def dt(self) -> float:
        return float(np.median(np.diff(self.time_s)))

    @property
    def rate_hz(self) -> float:
        return 1.0 / self.dt

    @property
    def duration_s(self) -> float:
        return len(self.time_s) * self.dt


@dataclass
class TrialWindow:
    index: int
    start: int
    stop: int
    mean_speed: float
    msdv: Optional[float] = None
    action: Optional[Action] = None
    outcome: Optional[int] = None
    scr_mean: Optional[float] = None
    sick_prob_truth: Optional[float] = None

    def to_record(self) -> TrialRecord:
        return TrialRecord(self.action, self.outcome, self.sick_prob_truth)


class Severity(enum.Enum):
    NEGLIGIBLE = "negligible"
    LOW = "low"
    MODERATE = "moderate"
    HIGH = "high"


@dataclass(frozen=True)
class SSQRecord:
    pre: float
    post: float
    score: float
    severity: Severity
    negative: bool = False


# -- operations ----------------------------------------------------------------


def segment_trials(session: RawSession, window_s: float = 8.0) -> list:
    """Non-overlapping consecutive windows; a short trailing remainder is dropped."""
    n_windows = int(math.floor(session.duration_s / window_s + 1e-9))
    if n_windows < 1:
        raise ValueError(f"session of {session.duration_s:g} s is shorter than one {window_s:g} s window")
    offset = session.time_s - session.time_s[0]
    idx = np.floor(offset / window_s + 1e-9).astype(int)
    windows = []
    for k in range(n_windows):
        members = np.flatnonzero(idx == k)
        start, stop = int(members[0]), int(members[-1]) + 1
        windows.append(TrialWindow(k, start, stop, float(np.mean(session.speed_mps[start:stop]))))
    return windows


def label_action(mean_speed: float, threshold: float = 1.3) -> Action:
    if mean_speed < 0:
        raise ValueError("speed must be non-negative")
    return Action.REST if mean_speed < threshold else Action.ACCELERATE


def msdv(speed, time) -> float:
    """sqrt of the trapezoidal integral of squared acceleration.

    Acceleration uses central differences inside the window and one-sided
    differences at its edges.
    """
    speed = np.asarray(speed, dtype=float)
    time = np.asarray(time, dtype=float)
    if len(speed) < 2 or len(speed) != len(time):
        raise ValueError("msdv needs at least two (time, speed) samples")
    accel = np.gradient(speed, time)
    return float(math.sqrt(trapezoid(accel ** 2, time)))


def label_outcome(msdv_value: float, threshold: float = 0.45) -> int:
    if msdv_value < 0:
        raise ValueError("MSDV must be non-negative")
    return 0 if msdv_value < threshold else 1


def extract_scr(eda, rate_hz: float = 4.0, window_s: float = 4.0) -> np.ndarray:
    """Phasic component: EDA minus a min-tracking, moving-average tonic level."""
    eda = np.asarray(eda, dtype=float)
    if len(eda) < 8 * rate_hz:
        raise ValueError("SCR extraction needs at least 8 s of data")
    width = max(int(round(window_s * rate_hz)), 1)
    tonic = minimum_filter1d(eda, width, mode="nearest")
    tonic = uniform_filter1d(tonic, width, mode="nearest")
    return np.maximum(eda - tonic, 0.0)


def scr_to_probability(scr_means) -> np.ndarray:
    scr_means = np.asarray(scr_means, dtype=float)
    if scr_means.size == 0:
        raise ValueError("need at least one window")
    lo, hi = scr_means.min(), scr_means.max()
    if hi == lo:
        raise ValueError("constant SCR series cannot be min-max scaled")
    return (scr_means - lo) / (hi - lo)


def ssq(pre: float, post: float) -> SSQRecord:
    """Post-minus-pre score with its severity class.

    Negative scores are classed Negligible and flagged.
    """
    score = post - pre
    if score <= 5:
        sev = Severity.NEGLIGIBLE
    elif score <= 20:
        sev = Severity.LOW
    elif score <= 40:
        sev = Severity.MODERATE
    else:
        sev = Severity.HIGH
    return SSQRecord(pre, post, score, sev, negative=score < 0)


def process_session(
    session: RawSession,
    window_s: float = 8.0,
    speed_threshold: float = 1.3,
    msdv_threshold: float = 0.45,
) -> list:
    """Fully labelled windows for one session."""
    windows = segment_trials(session, window_s)
    phasic = extract_scr(session.eda_us, session.rate_hz)
    out = []
    for w in windows:
        sl = slice(w.start, w.stop)
        m = msdv(session.speed_mps[sl], session.time_s[sl])
        out.append(replace(
            w,
            msdv=m,
            action=label_action(w.mean_speed, speed_threshold),
            outcome=label_outcome(m, msdv_threshold),
            scr_mean=float(np.mean(phasic[sl])),
        ))
    probs = scr_to_probability([w.scr_mean for w in out])
    return [replace(w, sick_prob_truth=float(p)) for w, p in zip(out, probs)]


# -- CSV I/O -------------------------------------------------------------------


def _rows(fh, path, expected: Sequence[str]):
    """Yield (line_number, row) after checking the header; skips blank lines."""
    reader = csv.reader(fh)
    header = None
    for row in reader:
        if not row or all(not c.strip() for c in row):
            continue
        header = [c.strip() for c in row]
        break
    if header is None:
        raise CSVFormatError(path, 1, "file is empty")
    if tuple(header) != tuple(expected):
        raise CSVFormatError(path, reader.line_num, f"expected header {','.join(expected)}")
    for row in reader:
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(expected):
            raise CSVFormatError(path, reader.line_num, f"expected {len(expected)} fields, got {len(row)}")
        yield reader.line_num, row


def read_session_csv(path, participant_id: Optional[str] = None, task_index: int = 1) -> RawSession:
    path = Path(path)
    cols = [[], [], []]
    with open(path, newline="", encoding="utf-8") as fh:
        for line, row in _rows(fh, path, SESSION_COLUMNS):
            try:
                vals = [float(v) for v in row]
            except ValueError as exc:
                raise CSVFormatError(path, line, str(exc)) from None
            for c, v in zip(cols, vals):
                c.append(v)
    if len(cols[0]) < 2:
        raise CSVFormatError(path, 2, "session has fewer than two samples")
    try:
        return RawSession(*map(np.array, cols), participant_id=participant_id or path.stem,
                          task_index=task_index)
    except ValueError as exc:
        raise CSVFormatError(path, 0, str(exc)) from None


def write_session_csv(fh, session: dict):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(SESSION_COLUMNS)
    for row in zip(*(session[c] for c in SESSION_COLUMNS)):
        writer.writerow([format(float(v), ".10g") for v in row])


def read_ssq_csv(path) -> dict:
    """Map (participant_id, task_index) to SSQRecord."""
    path = Path(path)
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for line, row in _rows(fh, path, SSQ_COLUMNS):
            try:
                key = (row[0].strip(), int(row[1]))
                out[key] = ssq(float(row[2]), float(row[3]))
            except ValueError as exc:
                raise CSVFormatError(path, line, str(exc)) from None
    return out


def write_trials_csv(fh, rows: Iterable[tuple]):
    """``rows`` yields (participant_id, task_index, TrialWindow)."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(TRIAL_COLUMNS)
    for pid, task, w in rows:
        writer.writerow([
            pid, task, w.index, format(w.mean_speed, ".10g"), format(w.msdv, ".10g"),
            w.action.label, w.outcome, format(w.scr_mean, ".10g"), format(w.sick_prob_truth, ".10g"),
        ])


def read_trials_csv(path) -> dict:
    """Participant id to list of TrialRecord, ordered by (task_index, trial)."""
    path = Path(path)
    grouped = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for line, row in _rows(fh, path, TRIAL_COLUMNS):
            try:
                rec = TrialRecord(Action.parse(row[5]), int(row[6]), float(row[8]))
                grouped.setdefault(row[0], []).append((int(row[1]), int(row[2]), rec))
            except ValueError as exc:
                raise CSVFormatError(path, line, str(exc)) from None
    return {pid: [r for _, _, r in sorted(v, key=lambda x: x[:2])] for pid, v in grouped.items()}
