"""End-to-end run on simulated data: simulate, detect, evaluate, lag analytics, train, ablate.

:func:`reproduce` returns ``{file name: contents}``; nothing in it depends on
wall-clock time or execution order, so equal inputs give equal bytes.
"""
from __future__ import annotations

from . import _jsonio, reports
from .detector import MatchConfig
from .features import CalendarConfig
from .gbdt import Hyperparams, evaluate_mae, feature_importance
from .lag_analytics import DEFAULT_BINS, DEFAULT_LAGS
from .series import DAY, format_hour
from .simgen import SimConfig, flagship_config, generate

SWEEP_ALPHAS = tuple(0.5 + 0.25 * i for i in range(15))  # 0.5 .. 4.0
DEFAULT_ALPHA = 2.0


def reproduce(
    seed: int = 42,
    config: SimConfig | None = None,
    hp: Hyperparams = Hyperparams(),
    cfg: MatchConfig = MatchConfig(),
) -> dict[str, str]:
    if config is None:
        config = flagship_config(seed)
    else:
        config = SimConfig.from_dict({**config.to_dict(), "seed": seed})
    sim = generate(config)
    data = sim.series()
    files: dict[str, str] = {
        "series.csv": sim.series_csv(),
        "events.csv": sim.events_csv(),
        "sim_config.json": _jsonio.dumps(config.to_dict(), indent=2) + "\n",
        "normalized.csv": reports.normalized_csv(data),
        "peaks.csv": reports.peaks_csv(data),
    }

    lines = reports.fit_lines(data, DEFAULT_ALPHA)
    files["warning_lines.json"] = reports.lines_json(lines)
    files["alerts.jsonl"] = reports.alerts_jsonl(data, lines)
    evals = reports.evaluation_reports(data, SWEEP_ALPHAS, cfg)
    files["evaluation.csv"] = reports.evaluation_csv(evals)

    summary: dict = {"seed": seed, "pois": {}}
    pred_rows = []
    mae_rows = []
    imp_rows = []
    cal = CalendarConfig()
    for poi in data.poi_ids:
        name = reports.safe_name(poi)
        hist = reports.poi_lag_hist(data, poi)
        curve = reports.poi_mi(data, poi, DEFAULT_LAGS, DEFAULT_BINS)
        files[f"lag_hist_{name}.csv"] = reports.lag_hist_csv(hist)
        files[f"mi_{name}.csv"] = reports.mi_csv(curve)

        table = reports.poi_features(data, poi, cal)
        event_day = reports.event_time_for(poi, sim.event_rows, data.pair(poi)[1])
        full = reports.train_model(table, event_day, hp, seed)
        ablated = reports.train_model(table, event_day, hp, seed, with_query=False)
        files[f"model_{name}.json"] = reports.model_json(full)
        files[f"model_{name}_noquery.json"] = reports.model_json(ablated)

        test = table.between(event_day, event_day + DAY)
        mae_full = evaluate_mae(full, test)
        mae_abl = evaluate_mae(ablated, test)
        mae_rows.append((poi, "full", len(full.feature_names), repr(mae_full)))
        mae_rows.append((poi, "no_query", len(ablated.feature_names), repr(mae_abl)))
        pred_rows += reports.predictions_rows(full, test, "full")
        pred_rows += reports.predictions_rows(ablated, test, "no_query")
        imp = feature_importance(full)
        imp_rows += [(poi, f, repr(s)) for f, s in imp.scores]

        at_alpha = next(r for r in evals if r.poi_id == poi and r.alpha == DEFAULT_ALPHA)
        summary["pois"][poi] = {
            "alpha": DEFAULT_ALPHA,
            "precision": at_alpha.precision,
            "recall": at_alpha.recall,
            "f1": at_alpha.f1,
            "peak_lag_mode": hist.mode(),
            "mi_argmax_lag": curve.argmax(),
            "event_day": format_hour(event_day),
            "mae_full": mae_full,
            "mae_no_query": mae_abl,
            "top_features": imp.top(5),
        }

    files["predictions.csv"] = reports._csv(pred_rows, reports.PREDICTION_HEADER)
    files["mae.csv"] = reports._csv(mae_rows, ("poi_id", "model", "n_features", "mae"))
    files["importance.csv"] = reports._csv(imp_rows, ("poi_id", "feature", "score"))
    files["summary.json"] = _jsonio.dumps(summary, indent=2) + "\n"
    return files
