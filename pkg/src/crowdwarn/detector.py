"""Early-warning alerts from the query warning line, and their evaluation.

An alert at hour t is a hit when some positioning exceedance (a truth
point) lies in ``[t + min_lead, t + horizon]``. Matching is many-to-many:
one alert can confirm several truth points and vice versa.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field, replace
from datetime import datetime
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, ParameterError
from .series import HourlySeries, Signal, daily_peaks, format_hour, from_hour_index, hour_index
from .warning_lines import LogNormalPeakFit, WarningLine, exceedance_mask, fit_log_peaks, warning_line


@dataclass(frozen=True)
class AlertRecord:
    poi_id: str
    time: datetime
    query_count: int
    threshold_raw: float
    alpha: float

    def to_dict(self) -> dict:
        return {
            "poi_id": self.poi_id,
            "timestamp": format_hour(self.time),
            "query_count": self.query_count,
            "threshold_raw": self.threshold_raw,
        }


@dataclass(frozen=True)
class GroundTruthPoint:
    poi_id: str
    time: datetime
    positioning_count: int


@dataclass(frozen=True)
class MatchConfig:
    horizon_T: int = 3
    min_lead: int = 1

    def __post_init__(self):
        if not 1 <= self.min_lead <= self.horizon_T:
            raise ParameterError(
                f"need 1 <= min_lead <= horizon_T, got min_lead={self.min_lead}, horizon_T={self.horizon_T}"
            )


@dataclass(frozen=True)
class EvalReport:
    alpha: float | None
    tp_alerts: int
    fp_alerts: int
    detected_events: int
    missed_events: int
    precision: float
    recall: float
    f1: float
    poi_id: str = ""
    both_empty: bool = False
    tp_alert_times: tuple = field(default=(), repr=False)

    @property
    def n_alerts(self) -> int:
        return self.tp_alerts + self.fp_alerts

    @property
    def n_events(self) -> int:
        return self.detected_events + self.missed_events


def _check_line(series: HourlySeries, line: WarningLine, expected: Signal) -> None:
    if series.signal is not expected or line.signal is not expected:
        raise ConfigError(
            f"expected {expected.value} series and line, got {series.signal.value} series "
            f"with {line.signal.value} line"
        )
    if line.poi_id and line.poi_id != series.poi_id:
        raise ConfigError(f"warning line for POI {line.poi_id!r} applied to series of {series.poi_id!r}")


def raise_alerts(query_series: HourlySeries, line_m: WarningLine) -> list[AlertRecord]:
    _check_line(query_series, line_m, Signal.MAP_QUERY)
    hits = np.flatnonzero(exceedance_mask(line_m, query_series.values))
    return [
        AlertRecord(
            poi_id=query_series.poi_id,
            time=query_series.time_at(int(k)),
            query_count=int(query_series.values[k]),
            threshold_raw=line_m.threshold_raw,
            alpha=line_m.alpha,
        )
        for k in hits
    ]


def ground_truth(positioning_series: HourlySeries, line_q: WarningLine) -> list[GroundTruthPoint]:
    _check_line(positioning_series, line_q, Signal.POSITIONING)
    hits = np.flatnonzero(exceedance_mask(line_q, positioning_series.values))
    return [
        GroundTruthPoint(
            poi_id=positioning_series.poi_id,
            time=positioning_series.time_at(int(k)),
            positioning_count=int(positioning_series.values[k]),
        )
        for k in hits
    ]


def cluster_runs(hours: Sequence[int]) -> list[list[int]]:
    """Group sorted hour indices into runs of consecutive hours."""
    runs: list[list[int]] = []
    for h in hours:
        if runs and h == runs[-1][-1] + 1:
            runs[-1].append(h)
        else:
            runs.append([h])
    return runs


def _any_in(sorted_hours: list[int], lo: int, hi: int) -> bool:
    i = bisect.bisect_left(sorted_hours, lo)
    return i < len(sorted_hours) and sorted_hours[i] <= hi


def _f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def match_and_score(
    alerts: Sequence[AlertRecord],
    truth: Sequence[GroundTruthPoint],
    cfg: MatchConfig = MatchConfig(),
    *,
    alpha: float | None = None,
    cluster: bool = False,
) -> EvalReport:
    """Precision over alerts and recall over truth points (or truth runs with ``cluster``)."""
    if alpha is None and alerts:
        alpha = alerts[0].alpha
    poi = alerts[0].poi_id if alerts else (truth[0].poi_id if truth else "")
    a_hours = sorted(hour_index(a.time) for a in alerts)
    t_hours = sorted(hour_index(g.time) for g in truth)
    if not a_hours and not t_hours:
        return EvalReport(alpha, 0, 0, 0, 0, 0.0, 0.0, 0.0, poi_id=poi, both_empty=True)

    tp_times = tuple(
        from_hour_index(h) for h in a_hours if _any_in(t_hours, h + cfg.min_lead, h + cfg.horizon_T)
    )
    tp = len(tp_times)
    fp = len(a_hours) - tp

    def detected(h):
        return _any_in(a_hours, h - cfg.horizon_T, h - cfg.min_lead)

    if cluster:
        events = cluster_runs(t_hours)
        hit = sum(1 for run in events if any(detected(h) for h in run))
        n_events = len(events)
    else:
        hit = sum(1 for h in t_hours if detected(h))
        n_events = len(t_hours)

    precision = tp / len(a_hours) if a_hours else 0.0
    recall = hit / n_events if n_events else 0.0
    return EvalReport(
        alpha=alpha,
        tp_alerts=tp,
        fp_alerts=fp,
        detected_events=hit,
        missed_events=n_events - hit,
        precision=precision,
        recall=recall,
        f1=_f1(precision, recall),
        poi_id=poi,
        tp_alert_times=tp_times,
    )


def alpha_sweep(
    query: HourlySeries,
    positioning: HourlySeries,
    line_q: WarningLine,
    alphas: Iterable[float],
    cfg: MatchConfig = MatchConfig(),
    *,
    fit_m: LogNormalPeakFit | None = None,
    cluster: bool = False,
) -> list[EvalReport]:
    """Score the detector at each alpha; the query fit is computed once and reused."""
    alphas = [float(a) for a in alphas]
    if not alphas:
        return []
    if any(a <= 0 for a in alphas) or alphas != sorted(alphas):
        raise ParameterError("alphas must be positive and ascending")
    truth = ground_truth(positioning, line_q)
    if fit_m is None:
        fit_m = fit_log_peaks(daily_peaks(query))
    reports = []
    for a in alphas:
        alerts = raise_alerts(query, warning_line(fit_m, a))
        rep = match_and_score(alerts, truth, cfg, alpha=a, cluster=cluster)
        reports.append(_with_poi(rep, query.poi_id))
    return reports


def _with_poi(rep: EvalReport, poi: str) -> EvalReport:
    if rep.poi_id == poi:
        return rep
    return replace(rep, poi_id=poi)


def macro_average(reports: Sequence[EvalReport], poi_id: str = "ALL") -> EvalReport:
    """Unweighted mean of precision, recall and F1 across POIs; counts are summed."""
    if not reports:
        raise ParameterError("nothing to average")
    n = len(reports)
    return EvalReport(
        alpha=reports[0].alpha,
        tp_alerts=sum(r.tp_alerts for r in reports),
        fp_alerts=sum(r.fp_alerts for r in reports),
        detected_events=sum(r.detected_events for r in reports),
        missed_events=sum(r.missed_events for r in reports),
        precision=sum(r.precision for r in reports) / n,
        recall=sum(r.recall for r in reports) / n,
        f1=sum(r.f1 for r in reports) / n,
        poi_id=poi_id,
        both_empty=all(r.both_empty for r in reports),
    )


def sweep_pois(
    pairs: Mapping[str, tuple[HourlySeries, HourlySeries]],
    alphas: Iterable[float],
    cfg: MatchConfig = MatchConfig(),
    *,
    cluster: bool = False,
    min_days: int | None = None,
) -> list[EvalReport]:
    """Per-POI sweeps plus an ``ALL`` macro-average row per alpha, sorted by alpha then poi_id."""
    alphas = list(alphas)
    kw = {} if min_days is None else {"min_days": min_days}
    per_poi = {}
    for poi in sorted(pairs):
        query, positioning = pairs[poi]
        line_q = warning_line(fit_log_peaks(daily_peaks(positioning), **kw))
        fit_m = fit_log_peaks(daily_peaks(query), **kw)
        per_poi[poi] = alpha_sweep(query, positioning, line_q, alphas, cfg, fit_m=fit_m, cluster=cluster)
    out = []
    for i in range(len(alphas)):
        row = [per_poi[poi][i] for poi in sorted(per_poi)]
        out.extend(row)
        out.append(macro_average(row))
    return out
