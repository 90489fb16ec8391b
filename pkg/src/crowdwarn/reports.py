"""Plain-text report builders shared by the CLI subcommands and ``reproduce``.

Every function returns file contents as a string; callers decide where
they go. Rows are always sorted deterministically.
"""
from __future__ import annotations

import csv
import io
import re
from dataclasses import replace
from datetime import datetime, timedelta
from typing import Iterable, Sequence

from . import _jsonio
from .detector import EvalReport, MatchConfig, raise_alerts, sweep_pois
from .features import CalendarConfig, FeatureTable, ablate_query_features, build_rows, train_window, write_feature_csv
from .gbdt import GbdtModel, Hyperparams, evaluate_mae, feature_importance, fit, predict_batch
from .lag_analytics import MiCurve, PeakLagHistogram, mutual_information, peak_lag_histogram
from .series import DAY, HourlySeries, IngestResult, Signal, daily_peaks, format_hour, normalize_by_std, parse_hour
from .warning_lines import WarningLine, fit_log_peaks, warning_line


def _csv(rows: Iterable[Sequence], header: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _real(x: float) -> str:
    return repr(float(x))


def safe_name(poi_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", poi_id) or "_"


def peaks_csv(data: IngestResult) -> str:
    rows = []
    for poi in data.poi_ids:
        for sig in (Signal.MAP_QUERY, Signal.POSITIONING):
            for e in daily_peaks(data.series[poi, sig]).entries:
                rows.append((poi, sig.value, e.day.isoformat(), e.peak, format_hour(e.peak_hour)))
    return _csv(rows, ("poi_id", "signal", "date", "peak", "peak_hour"))


def fit_lines(data: IngestResult, alpha: float, min_days: int | None = None) -> list[WarningLine]:
    """Query line at ``alpha`` and positioning line at 3 for every POI, sorted by POI then signal."""
    kw = {} if min_days is None else {"min_days": min_days}
    lines = []
    for poi in data.poi_ids:
        query, positioning = data.pair(poi)
        lines.append(warning_line(fit_log_peaks(daily_peaks(query), **kw), alpha))
        lines.append(warning_line(fit_log_peaks(daily_peaks(positioning), **kw)))
    return lines


def lines_json(lines: Sequence[WarningLine]) -> str:
    return _jsonio.dumps([ln.to_dict() for ln in lines], indent=2) + "\n"


def alerts_jsonl(data: IngestResult, lines: Sequence[WarningLine]) -> str:
    by_poi = {ln.poi_id: ln for ln in lines if ln.signal is Signal.MAP_QUERY}
    out = []
    for poi in data.poi_ids:
        if poi not in by_poi:
            continue
        for a in raise_alerts(data.series[poi, Signal.MAP_QUERY], by_poi[poi]):
            out.append(_jsonio.dumps(a.to_dict()))
    return "".join(line + "\n" for line in out)


def evaluation_reports(
    data: IngestResult, alphas: Sequence[float], cfg: MatchConfig, cluster: bool = False, min_days: int | None = None
) -> list[EvalReport]:
    pairs = {poi: data.pair(poi) for poi in data.poi_ids}
    return sweep_pois(pairs, alphas, cfg, cluster=cluster, min_days=min_days)


def evaluation_csv(reports: Sequence[EvalReport]) -> str:
    rows = [(_real(r.alpha), r.poi_id, _real(r.precision), _real(r.recall), _real(r.f1)) for r in reports]
    return _csv(rows, ("alpha", "poi_id", "precision", "recall", "f1"))


def lag_hist_csv(hist: PeakLagHistogram) -> str:
    return _csv(hist.rows(), ("lag", "count"))


def poi_lag_hist(data: IngestResult, poi: str) -> PeakLagHistogram:
    query, positioning = data.pair(poi)
    return peak_lag_histogram(daily_peaks(query), daily_peaks(positioning))


def mi_csv(curve: MiCurve) -> str:
    return _csv(((e.lag, _real(e.mi), e.n_pairs) for e in curve.entries), ("lag", "mi_bits", "n_pairs"))


def poi_mi(data: IngestResult, poi: str, lags, n_bins: int) -> MiCurve:
    query, positioning = data.pair(poi)
    return mutual_information(query, positioning, lags, n_bins)


def normalized_csv(data: IngestResult) -> str:
    rows = []
    for poi in data.poi_ids:
        query, positioning = data.pair(poi)
        qn, pn = normalize_by_std(query), normalize_by_std(positioning)
        for k in range(len(query)):
            rows.append((poi, format_hour(query.time_at(k)), _real(qn[k]), _real(pn[k])))
    return _csv(rows, ("poi_id", "timestamp", "query_norm", "positioning_norm"))


def features_csv(table: FeatureTable) -> str:
    buf = io.StringIO()
    write_feature_csv(buf, [table])
    return buf.getvalue()


def poi_features(data: IngestResult, poi: str, cal: CalendarConfig) -> FeatureTable:
    query, positioning = data.pair(poi)
    return build_rows(query, positioning, cal)


def train_model(
    table: FeatureTable, event_time: datetime, hp: Hyperparams, seed: int, *, days: int = 60, with_query: bool = True
) -> GbdtModel:
    rows = train_window(table, event_time, days)
    if not with_query:
        rows = ablate_query_features(rows)
    model = fit(rows, hp, seed)
    meta = {**model.training_meta, "event_time": format_hour(event_time), "window_days": days}
    return replace(model, training_meta=meta)


def model_json(model: GbdtModel) -> str:
    return model.to_json() + "\n"


def predictions_rows(model: GbdtModel, table: FeatureTable, label: str = "") -> list[tuple]:
    from .gbdt import _table_for

    t = _table_for(model, table)
    if len(t) == 0:
        return []
    raw = predict_batch(model, t.matrix())
    return [
        (r.poi_id, format_hour(r.at), label, _real(max(v, 0.0)), _real(v), "" if r.y is None else r.y)
        for r, v in zip(t, raw)
    ]


PREDICTION_HEADER = ("poi_id", "timestamp", "model", "predicted", "predicted_raw", "target")


def importance_csv(model: GbdtModel) -> str:
    rep = feature_importance(model)
    return _csv(((name, _real(s)) for name, s in rep.scores), ("feature", "score"))


def event_time_for(poi: str, events: Sequence[tuple], series: HourlySeries) -> datetime:
    """Midnight of the last listed event day for ``poi``, or of the last complete day if none."""
    times = sorted(parse_hour(ts) for p, ts, *_ in events if p == poi)
    if times:
        t = times[-1]
    else:
        t = series.end - DAY + timedelta(hours=1)
    return t.replace(hour=0)


def mae_for_day(model: GbdtModel, table: FeatureTable, day_start: datetime) -> float:
    return evaluate_mae(model, table.between(day_start, day_start + DAY))
