"""Log-normal warning lines fitted on daily peak counts.

The fitted statistics live in log space; exceedance is tested against the
raw-count threshold ``exp(mu_hat + alpha * sigma_hat)`` so thresholds and
counts are compared on the same scale.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _jsonio
from .errors import InsufficientDataError, ParameterError
from .series import DailyPeaks, Signal

MIN_FIT_DAYS = 14
DEFAULT_QUERY_ALPHA = 2.0
POSITIONING_ALPHA = 3.0


@dataclass(frozen=True)
class LogNormalPeakFit:
    n_days: int
    mu_hat: float
    sigma_hat: float
    excluded_zero_days: int = 0
    poi_id: str = ""
    signal: Signal = Signal.MAP_QUERY

    def __post_init__(self):
        if not math.isfinite(self.mu_hat):
            raise ParameterError("mu_hat must be finite")
        if not self.sigma_hat >= 0:
            raise ParameterError("sigma_hat must be >= 0")


def fit_log_peaks(
    peaks: DailyPeaks | Sequence[float],
    min_days: int = MIN_FIT_DAYS,
    *,
    poi_id: str = "",
    signal: Signal = Signal.MAP_QUERY,
) -> LogNormalPeakFit:
    """Sample mean and unbiased sample std of ln(peak), skipping zero-peak days.

    ``peaks`` is normally a :class:`DailyPeaks`; a plain sequence of
    non-negative peak values is also accepted (``poi_id``/``signal`` then
    label the fit).
    """
    if isinstance(peaks, DailyPeaks):
        raw = peaks.peaks.astype(float)
        poi_id, signal = peaks.poi_id, peaks.signal
    else:
        raw = np.asarray(peaks, dtype=float)
        if raw.ndim != 1 or not np.all(np.isfinite(raw)) or (raw < 0).any():
            raise ParameterError("peak values must be a 1-d sequence of finite non-negative numbers")
    kept = raw[raw > 0]
    if kept.size < max(min_days, 2):
        raise InsufficientDataError(
            f"{poi_id}/{Signal(signal).value}: {kept.size} non-zero peak days "
            f"({raw.size - kept.size} zero days excluded), need {max(min_days, 2)}",
            available=int(kept.size),
            required=max(min_days, 2),
        )
    logs = np.log(kept)
    mu = float(logs.mean())
    sigma = float(logs.std(ddof=1))
    if np.all(kept == kept[0]):
        # avoid rounding noise from the mean of identical logs
        mu, sigma = float(logs[0]), 0.0
    return LogNormalPeakFit(
        n_days=int(kept.size),
        mu_hat=mu,
        sigma_hat=sigma,
        excluded_zero_days=int(raw.size - kept.size),
        poi_id=poi_id,
        signal=Signal(signal),
    )


@dataclass(frozen=True)
class WarningLine:
    fit: LogNormalPeakFit
    alpha: float
    threshold_log: float
    threshold_raw: float

    @property
    def signal(self) -> Signal:
        return self.fit.signal

    @property
    def poi_id(self) -> str:
        return self.fit.poi_id

    def to_dict(self) -> dict:
        return {
            "poi_id": self.fit.poi_id,
            "signal": self.fit.signal.value,
            "n_days": self.fit.n_days,
            "mu_hat": self.fit.mu_hat,
            "sigma_hat": self.fit.sigma_hat,
            "alpha": float(self.alpha),
            "threshold_log": self.threshold_log,
            "threshold_raw": self.threshold_raw,
        }

    def to_json(self) -> str:
        return _jsonio.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "WarningLine":
        fit = LogNormalPeakFit(
            n_days=int(d["n_days"]),
            mu_hat=float(d["mu_hat"]),
            sigma_hat=float(d["sigma_hat"]),
            poi_id=d["poi_id"],
            signal=Signal(d["signal"]),
        )
        return warning_line(fit, float(d["alpha"]))


def warning_line(fit: LogNormalPeakFit, alpha: float | None = None) -> WarningLine:
    """Threshold ``mu_hat + alpha * sigma_hat`` (log space) and its exponential.

    Positioning lines are pinned to alpha = 3; query lines default to alpha = 2.
    """
    if fit.signal is Signal.POSITIONING:
        if alpha is None:
            alpha = POSITIONING_ALPHA
        elif alpha != POSITIONING_ALPHA:
            raise ParameterError(f"the positioning warning line uses alpha = 3, got {alpha}")
    elif alpha is None:
        alpha = DEFAULT_QUERY_ALPHA
    if not alpha > 0:
        raise ParameterError(f"alpha must be > 0, got {alpha}")
    t_log = fit.mu_hat + alpha * fit.sigma_hat
    return WarningLine(fit=fit, alpha=float(alpha), threshold_log=t_log, threshold_raw=math.exp(t_log))


def exceeds(line: WarningLine, count: int) -> bool:
    return count >= line.threshold_raw


def exceedance_mask(line: WarningLine, counts: np.ndarray) -> np.ndarray:
    return np.asarray(counts) >= line.threshold_raw
