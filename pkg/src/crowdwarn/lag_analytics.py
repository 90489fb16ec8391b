"""Lead-lag analytics between the query and positioning signals.

Two views of the same question, how many hours the query signal runs
ahead of the crowd:

* per-day peak-hour differences, collected into a histogram;
* plug-in mutual information (bits) between ``m(t + lag)`` and ``q(t)``
  using equal-frequency binning of each marginal.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import EmptyPeaksError, ParameterError
from .series import DailyPeaks, HourlySeries, Signal, align

DEFAULT_LAGS = range(-6, 4)
DEFAULT_BINS = 8
MIN_PAIRS_PER_BIN = 10


@dataclass(frozen=True)
class PeakLagHistogram:
    poi_id: str
    bins: dict  # lag (hours) -> number of days, keys ascending
    n_days: int

    def mode(self) -> int:
        """Most frequent lag; ties resolve to the smaller lag."""
        return max(self.bins.items(), key=lambda kv: (kv[1], -kv[0]))[0]

    def rows(self) -> list[tuple[int, int]]:
        return sorted(self.bins.items())


def peak_lag_histogram(query_peaks: DailyPeaks, positioning_peaks: DailyPeaks) -> PeakLagHistogram:
    """Histogram of query peak hour minus positioning peak hour over the shared days.

    Negative lags mean the query peak came first.
    """
    if query_peaks.poi_id != positioning_peaks.poi_id:
        raise ParameterError("peak sets belong to different POIs")
    if query_peaks.signal is not Signal.MAP_QUERY or positioning_peaks.signal is not Signal.POSITIONING:
        raise ParameterError("expected (MapQuery, Positioning) peaks")
    pos = positioning_peaks.by_day()
    counts: dict[int, int] = {}
    n = 0
    for e in query_peaks.entries:
        other = pos.get(e.day)
        if other is None:
            continue
        lag = e.peak_hour.hour - other.peak_hour.hour
        counts[lag] = counts.get(lag, 0) + 1
        n += 1
    if n == 0:
        raise EmptyPeaksError(f"{query_peaks.poi_id}: no calendar day shared by both peak sets")
    return PeakLagHistogram(query_peaks.poi_id, dict(sorted(counts.items())), n)


def equal_frequency_bins(values: np.ndarray, n_bins: int) -> np.ndarray:
    """Bin index per value from its stable rank: ``rank * n_bins // n``.

    Ties are ordered by position, so bin sizes differ by at most one.
    """
    values = np.asarray(values)
    n = values.size
    order = np.argsort(values, kind="stable")
    ranks = np.empty(n, dtype=np.int64)
    ranks[order] = np.arange(n)
    return ranks * n_bins // n


def plugin_mi(x_bins: np.ndarray, y_bins: np.ndarray, n_bins: int) -> float:
    """Plug-in mutual information in bits from two discretized samples."""
    n = x_bins.size
    joint = np.zeros((n_bins, n_bins), dtype=np.int64)
    np.add.at(joint, (x_bins, y_bins), 1)
    pxy = joint / n
    px = pxy.sum(axis=1)
    py = pxy.sum(axis=0)
    nz = pxy > 0
    mi = float(np.sum(pxy[nz] * np.log2(pxy[nz] / np.outer(px, py)[nz])))
    return max(mi, 0.0)


def discrete_mi(x: np.ndarray, y: np.ndarray, n_bins: int = DEFAULT_BINS) -> float:
    """MI of two equal-length samples after equal-frequency binning; 0 if either is constant."""
    x = np.asarray(x)
    y = np.asarray(y)
    if x.size != y.size:
        raise ParameterError("samples differ in length")
    if x.size == 0 or np.all(x == x[0]) or np.all(y == y[0]):
        return 0.0
    return plugin_mi(equal_frequency_bins(x, n_bins), equal_frequency_bins(y, n_bins), n_bins)


@dataclass(frozen=True)
class MiPoint:
    lag: int
    mi: float
    n_pairs: int


@dataclass(frozen=True)
class MiCurve:
    poi_id: str
    entries: tuple[MiPoint, ...]
    n_bins: int
    skipped: tuple[tuple[int, int], ...] = ()  # (lag, n_pairs) with too few pairs

    def argmax(self) -> int:
        best = max(self.entries, key=lambda e: (e.mi, -abs(e.lag), -e.lag))
        return best.lag

    def as_dict(self) -> dict[int, float]:
        return {e.lag: e.mi for e in self.entries}


def lagged_pairs(m: np.ndarray, q: np.ndarray, lag: int) -> tuple[np.ndarray, np.ndarray]:
    """All (m[t + lag], q[t]) with both indices valid."""
    n = m.size
    if lag >= 0:
        return m[lag:], q[: n - lag]
    return m[: n + lag], q[-lag:]


def mutual_information(
    query: HourlySeries,
    positioning: HourlySeries,
    lags: Iterable[int] = DEFAULT_LAGS,
    n_bins: int = DEFAULT_BINS,
) -> MiCurve:
    if n_bins < 2:
        raise ParameterError("n_bins must be >= 2")
    pair = align(query, positioning)
    m, q = pair.first, pair.second
    entries, skipped = [], []
    for lag in sorted(set(int(v) for v in lags)):
        if abs(lag) >= m.size:
            skipped.append((lag, 0))
            continue
        a, b = lagged_pairs(m, q, lag)
        if a.size < MIN_PAIRS_PER_BIN * n_bins:
            skipped.append((lag, int(a.size)))
            continue
        entries.append(MiPoint(lag, discrete_mi(a, b, n_bins), int(a.size)))
    return MiCurve(query.poi_id, tuple(entries), n_bins, tuple(skipped))
