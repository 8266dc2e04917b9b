"""Lagged correlations, derivatives, chi-square association and report assembly."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .ifep import pearson

__all__ = [
    "LagCorrelation",
    "lagged_correlation",
    "temporal_derivative",
    "gammaincc",
    "chi2_sf",
    "ContingencyTable",
    "ChiSquareResult",
    "chi_square",
    "contingency_from_labels",
    "ParticipantDecode",
    "ReportConfig",
    "AnalysisReport",
    "build_report",
    "info_beta_correlation",
]


@dataclass
class LagCorrelation:
    lags: np.ndarray
    r: np.ndarray
    argmax_lag: int
    argmax_r: float

    def to_dict(self) -> dict:
        return {"lags": [int(k) for k in self.lags], "r": [float(v) for v in self.r],
                "argmax_lag": int(self.argmax_lag), "argmax_r": float(self.argmax_r)}


def lagged_correlation(x, y, max_lag: int = 40) -> LagCorrelation:
    """Pearson r between x_t and y_{t+k} for k in [-max_lag, max_lag].

    With x the expected information gain and y the curiosity, a negative
    argmax lag means curiosity leads.  Raises ``ValueError`` if any overlap
    is constant.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    if len(y) != n:
        raise ValueError("series must have equal length")
    if max_lag < 0 or n <= max_lag + 2:
        raise ValueError(f"series of length {n} too short for max_lag={max_lag}")
    lags = np.arange(-max_lag, max_lag + 1)
    r = np.empty(len(lags))
    for j, k in enumerate(lags):
        if k >= 0:
            xs, ys = x[:n - k], y[k:]
        else:
            xs, ys = x[-k:], y[:n + k]
        try:
            r[j] = pearson(xs, ys)
        except ValueError:
            raise ValueError(f"correlation undefined at lag {k}: constant overlap") from None
    best = int(np.argmax(np.abs(r)))
    return LagCorrelation(lags, r, int(lags[best]), float(r[best]))


def temporal_derivative(x, dt: float = 1.0) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        raise ValueError("derivative needs at least two samples")
    return np.diff(x) / dt


# -- chi-square ----------------------------------------------------------------


def _gamma_series(a: float, x: float) -> float:
    """Regularised lower incomplete gamma P(a, x) by its power series."""
    term = total = 1.0 / a
    ap = a
    for _ in range(10_000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-16:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cf(a: float, x: float) -> float:
    """Regularised upper incomplete gamma Q(a, x) by modified Lentz continued fraction."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def gammaincc(a: float, x: float) -> float:
    if a <= 0 or x < 0:
        raise ValueError("gammaincc needs a > 0 and x >= 0")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return max(0.0, 1.0 - _gamma_series(a, x))
    return min(1.0, _gamma_cf(a, x))


def chi2_sf(x: float, dof: int) -> float:
    """Upper-tail probability of the chi-square distribution."""
    if x <= 0:
        return 1.0
    return gammaincc(dof / 2.0, x / 2.0)


@dataclass
class ContingencyTable:
    counts: np.ndarray
    row_labels: tuple = ()
    col_labels: tuple = ()

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 2 or counts.size == 0:
            raise ValueError("contingency table must be a non-empty matrix")
        if np.any(counts < 0) or not np.all(np.equal(np.mod(counts, 1), 0)):
            raise ValueError("counts must be non-negative integers")
        if counts.sum() < 1:
            raise ValueError("contingency table is empty")
        self.counts = counts.astype(int)


@dataclass
class ChiSquareResult:
    chi2: float
    dof: int
    p: float
    cramers_v: float


def chi_square(table) -> ChiSquareResult:
    """Pearson chi-square test of independence without continuity correction."""
    if not isinstance(table, ContingencyTable):
        table = ContingencyTable(table)
    obs = table.counts.astype(float)
    n = obs.sum()
    expected = np.outer(obs.sum(axis=1), obs.sum(axis=0)) / n
    if np.any(expected <= 0):
        raise ValueError("an expected cell count is zero (empty row or column)")
    chi2 = float(np.sum((obs - expected) ** 2 / expected))
    rows, cols = obs.shape
    dof = (rows - 1) * (cols - 1)
    k = min(rows - 1, cols - 1)
    v = math.sqrt(chi2 / (n * k)) if k > 0 else 0.0
    p = chi2_sf(chi2, dof) if dof > 0 else 1.0
    return ChiSquareResult(chi2, dof, p, min(v, 1.0))


def contingency_from_labels(rows: Sequence, cols: Sequence, row_order=None, col_order=None) -> ContingencyTable:
    """Cross-tabulate paired labels; all-zero rows and columns are dropped."""
    row_order = list(row_order or sorted(set(rows)))
    col_order = list(col_order or sorted(set(cols)))
    counts = np.zeros((len(row_order), len(col_order)), dtype=int)
    for r, c in zip(rows, cols):
        counts[row_order.index(r), col_order.index(c)] += 1
    keep_r = counts.sum(axis=1) > 0
    keep_c = counts.sum(axis=0) > 0
    return ContingencyTable(
        counts[keep_r][:, keep_c],
        tuple(l for l, k in zip(row_order, keep_r) if k),
        tuple(l for l, k in zip(col_order, keep_c) if k),
    )


# -- report --------------------------------------------------------------------


@dataclass
class ParticipantDecode:
    participant_id: str
    curiosity: np.ndarray
    info_gain: np.ndarray
    severity: Optional[str] = None


@dataclass
class ReportConfig:
    max_lag: int = 40
    sample_rate_hz: float = 4.0
    derivative_dt: float = 1.0
    severity_order: tuple = ("negligible", "low", "moderate", "high")
    extra: dict = field(default_factory=dict)


@dataclass
class AnalysisReport:
    participants: list
    group: dict
    rmse: Optional[list]
    chi_square: Optional[dict]
    config: dict

    def to_dict(self) -> dict:
        return {"participants": self.participants, "group": self.group, "rmse": self.rmse,
                "chi_square": self.chi_square, "config": self.config}


def _curiosity_class(c: np.ndarray) -> str:
    return "positive" if float(np.mean(c)) >= 0 else "negative"


def build_report(
    decodes: Sequence[ParticipantDecode],
    cfg: Optional[ReportConfig] = None,
    rmse_rows: Optional[Sequence[dict]] = None,
    table: Optional[ContingencyTable] = None,
) -> AnalysisReport:
    """Per-participant lag curves, group lag statistics, RMSE table and chi-square block.

    Without an explicit ``table`` the chi-square block cross-tabulates the
    sign of each participant's mean decoded curiosity against SSQ severity
    (participants without a severity are skipped).
    """
    cfg = cfg or ReportConfig()
    if not decodes:
        raise ValueError("report needs at least one decode")
    blocks = []
    for d in decodes:
        c = np.asarray(d.curiosity, dtype=float)
        info = np.asarray(d.info_gain, dtype=float)
        lc = lagged_correlation(info, c, cfg.max_lag)
        dc = temporal_derivative(c, cfg.derivative_dt)
        ld = lagged_correlation(info[1:], dc, cfg.max_lag)
        blocks.append({
            "participant_id": d.participant_id,
            "severity": d.severity,
            "curiosity_class": _curiosity_class(c),
            "mean_curiosity": float(np.mean(c)),
            "curiosity": lc.to_dict(),
            "derivative": ld.to_dict(),
            "curiosity_argmax_s": lc.argmax_lag / cfg.sample_rate_hz,
            "derivative_argmax_s": ld.argmax_lag / cfg.sample_rate_hz,
        })
    lag_c = np.array([b["curiosity"]["argmax_lag"] for b in blocks], dtype=float)
    lag_d = np.array([b["derivative"]["argmax_lag"] for b in blocks], dtype=float)
    group = {
        "n_participants": len(blocks),
        "curiosity_mean_argmax_lag": float(lag_c.mean()),
        "curiosity_mean_argmax_s": float(lag_c.mean() / cfg.sample_rate_hz),
        "curiosity_mean_argmax_r": float(np.mean([b["curiosity"]["argmax_r"] for b in blocks])),
        "derivative_mean_argmax_lag": float(lag_d.mean()),
        "derivative_mean_argmax_s": float(lag_d.mean() / cfg.sample_rate_hz),
        "derivative_mean_argmax_r": float(np.mean([b["derivative"]["argmax_r"] for b in blocks])),
    }

    rmse_block = None
    if rmse_rows:
        by_eps = {}
        for row in rmse_rows:
            by_eps.setdefault(float(row["epsilon"]), []).append(row)
        rmse_block = [
            {"epsilon": eps,
             "n_seeds": len(rows),
             "median_rmse": float(np.median([r["rmse"] for r in rows])),
             "median_corr": float(np.median([r["corr"] for r in rows]))}
            for eps, rows in sorted(by_eps.items())
        ]

    chi_block = None
    if table is None:
        labelled = [b for b in blocks if b["severity"]]
        if labelled:
            try:
                table = contingency_from_labels(
                    [b["curiosity_class"] for b in labelled], [b["severity"] for b in labelled],
                    ("negative", "positive"), cfg.severity_order)
            except ValueError:
                table = None
    if table is not None and min(table.counts.shape) >= 2:
        res = chi_square(table)
        chi_block = {**asdict(res), "counts": table.counts.tolist(),
                     "rows": list(table.row_labels), "cols": list(table.col_labels)}

    config = {"max_lag": cfg.max_lag, "sample_rate_hz": cfg.sample_rate_hz,
              "derivative_dt": cfg.derivative_dt, **cfg.extra}
    return AnalysisReport(blocks, group, rmse_block, chi_block, config)


def info_beta_correlation(info_gain, beta, max_lag: int = 40, dt: float = 1.0):
    """Lag curves of information gain against inverse temperature and its derivative."""
    info_gain = np.asarray(info_gain, dtype=float)
    level = lagged_correlation(info_gain, beta, max_lag)
    slope = lagged_correlation(info_gain[1:], temporal_derivative(beta, dt), max_lag)
    return level, slope
