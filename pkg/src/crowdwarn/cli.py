"""``crowdwarn`` command-line entry point. See MANUAL.md for flags, formats and exit codes."""
from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timedelta

from . import _jsonio, reports
from .detector import MatchConfig
from .errors import CrowdWarnError, ParameterError
from .features import CalendarConfig, load_holidays
from .gbdt import GbdtModel, Hyperparams, evaluate_mae
from .lag_analytics import DEFAULT_BINS
from .series import DAY, format_hour, parse_hour, read_series_csv
from .simgen import SimConfig, flagship_config, generate
from .warning_lines import WarningLine

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_IO = 3

_RANGE_FLAGS = ("--alphas", "--lags")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- argument helpers ----------------------------------------------------------


def parse_real_range(text: str) -> list[float]:
    """``start:stop:step`` (stop included within 1e-9) or a comma-separated list."""
    text = text.strip()
    try:
        if ":" not in text:
            return [float(v) for v in text.split(",") if v.strip()]
        parts = [float(v) for v in text.split(":")]
    except ValueError:
        raise ParameterError(f"bad range {text!r}") from None
    if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
        raise ParameterError(f"range {text!r} must be start:stop:step with step > 0 and stop >= start")
    start, stop, step = parts
    n = int((stop - start) / step + 1e-9)
    return [round(start + i * step, 12) for i in range(n + 1)]


def parse_int_range(text: str) -> list[int]:
    """``lo:hi`` or ``lo:hi:step`` inclusive, or a comma-separated list of integers."""
    try:
        if ":" not in text:
            return [int(v) for v in text.split(",") if v.strip()]
        parts = [int(v) for v in text.split(":")]
    except ValueError:
        raise ParameterError(f"bad integer range {text!r}") from None
    if len(parts) == 2:
        parts.append(1)
    if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
        raise ParameterError(f"range {text!r} must be lo:hi[:step] with lo <= hi")
    return list(range(parts[0], parts[1] + 1, parts[2]))


def _hour(text: str) -> datetime:
    try:
        return parse_hour(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _glue_range_flags(argv: list[str]) -> list[str]:
    # "--lags -6:3" would otherwise be read as an unknown option "-6:3"
    out = []
    i = 0
    while i < len(argv):
        a = argv[i]
        if a in _RANGE_FLAGS and i + 1 < len(argv):
            out.append(f"{a}={argv[i + 1]}")
            i += 2
        else:
            out.append(a)
            i += 1
    return out


# -- output --------------------------------------------------------------------


class Outputs:
    """Collects files and writes them only after the command has succeeded."""

    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        self.files: dict[str, str] = {}

    def add(self, name: str, text: str) -> None:
        if os.path.basename(name) != name or name in ("", ".", ".."):
            raise ParameterError(f"refusing to write {name!r} outside the output directory")
        self.files[name] = text

    def flush(self) -> list[str]:
        os.makedirs(self.out_dir, exist_ok=True)
        written = []
        for name in sorted(self.files):
            path = os.path.join(self.out_dir, name)
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(self.files[name])
            written.append(path)
        return written


def _load_series(args):
    return read_series_csv(args.series)


def _calendar(args) -> CalendarConfig:
    holidays = load_holidays(args.holidays) if getattr(args, "holidays", None) else frozenset()
    return CalendarConfig(holidays=holidays)


def _pois(data, args) -> list[str]:
    if getattr(args, "poi", None):
        if args.poi not in data.poi_ids:
            raise ParameterError(f"POI {args.poi!r} not in the series file")
        return [args.poi]
    return data.poi_ids


def _hyperparams(args) -> Hyperparams:
    return Hyperparams(
        n_trees=args.n_trees,
        max_depth=args.max_depth,
        min_leaf=args.min_leaf,
        learning_rate=args.learning_rate,
        max_thresholds_per_feature=args.max_thresholds,
    )


def _load_model(path) -> GbdtModel:
    with open(path, encoding="utf-8") as fh:
        try:
            return GbdtModel.from_json(fh.read())
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ParameterError(f"{path}: not a model file ({exc})") from None


# -- subcommands -----------------------------------------------------------------


def cmd_simulate(args, out: Outputs):
    cfg = SimConfig.from_json_file(args.config) if args.config else flagship_config()
    if args.seed is not None:
        cfg = SimConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
    sim = generate(cfg)
    out.add("series.csv", sim.series_csv())
    out.add("events.csv", sim.events_csv())
    out.add("sim_config.json", _jsonio.dumps(cfg.to_dict(), indent=2) + "\n")


def cmd_peaks(args, out: Outputs):
    out.add("peaks.csv", reports.peaks_csv(_load_series(args)))


def cmd_fit_warning(args, out: Outputs):
    data = _load_series(args)
    out.add("warning_lines.json", reports.lines_json(reports.fit_lines(data, args.alpha, args.min_days)))


def cmd_detect(args, out: Outputs):
    data = _load_series(args)
    if args.lines:
        with open(args.lines, encoding="utf-8") as fh:
            lines = [WarningLine.from_dict(d) for d in json.load(fh)]
    else:
        lines = reports.fit_lines(data, args.alpha, args.min_days)
    out.add("alerts.jsonl", reports.alerts_jsonl(data, lines))


def cmd_evaluate(args, out: Outputs):
    data = _load_series(args)
    alphas = parse_real_range(args.alphas)
    cfg = MatchConfig(horizon_T=args.T, min_lead=args.min_lead)
    reps = reports.evaluation_reports(data, alphas, cfg, cluster=args.cluster, min_days=args.min_days)
    out.add("evaluation.csv", reports.evaluation_csv(reps))


def cmd_lag_hist(args, out: Outputs):
    data = _load_series(args)
    for poi in _pois(data, args):
        out.add(f"lag_hist_{reports.safe_name(poi)}.csv", reports.lag_hist_csv(reports.poi_lag_hist(data, poi)))


def cmd_mi(args, out: Outputs):
    data = _load_series(args)
    lags = parse_int_range(args.lags)
    for poi in _pois(data, args):
        curve = reports.poi_mi(data, poi, lags, args.bins)
        out.add(f"mi_{reports.safe_name(poi)}.csv", reports.mi_csv(curve))


def cmd_features(args, out: Outputs):
    data = _load_series(args)
    cal = _calendar(args)
    for poi in _pois(data, args):
        out.add(f"features_{reports.safe_name(poi)}.csv", reports.features_csv(reports.poi_features(data, poi, cal)))


def cmd_train(args, out: Outputs):
    data = _load_series(args)
    cal = _calendar(args)
    hp = _hyperparams(args)
    suffix = "" if args.with_query else "_noquery"
    for poi in _pois(data, args):
        table = reports.poi_features(data, poi, cal)
        model = reports.train_model(
            table, args.event_time, hp, args.seed, days=args.window_days, with_query=args.with_query
        )
        out.add(f"model_{reports.safe_name(poi)}{suffix}.json", reports.model_json(model))


def _model_table(args, model):
    data = _load_series(args)
    pois = model.training_meta.get("poi_ids") or data.poi_ids
    poi = args.poi or pois[0]
    return reports.poi_features(data, poi, _calendar(args))


def cmd_predict(args, out: Outputs):
    model = _load_model(args.model)
    table = _model_table(args, model)
    lo = args.start or (table[0].at if len(table) else datetime.min)
    hi = args.end or (table[-1].at + timedelta(hours=1) if len(table) else datetime.min)
    rows = reports.predictions_rows(model, table.between(lo, hi), label=args.label)
    out.add("predictions.csv", reports._csv(rows, reports.PREDICTION_HEADER))


def cmd_eval_mae(args, out: Outputs):
    model = _load_model(args.model)
    table = _model_table(args, model)
    hi = args.end or args.start + DAY
    sub = table.between(args.start, hi)
    mae = evaluate_mae(model, sub)
    doc = {
        "poi_id": sub[0].poi_id,
        "from": format_hour(args.start),
        "to": format_hour(hi),
        "n_rows": len(sub),
        "n_features": model.n_features,
        "mae": mae,
    }
    out.add("mae.json", _jsonio.dumps(doc, indent=2) + "\n")


def cmd_importance(args, out: Outputs):
    out.add("importance.csv", reports.importance_csv(_load_model(args.model)))


def cmd_reproduce(args, out: Outputs):
    from .experiments import reproduce

    cfg = SimConfig.from_json_file(args.config) if args.config else None
    for name, text in reproduce(seed=args.seed, config=cfg).items():
        out.add(name, text)


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="crowdwarn", description="Crowd-anomaly early warning from map-query and positioning counts.")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    def command(name, func, help_text, series=True):
        sp = sub.add_parser(name, help=help_text, description=help_text)
        sp.set_defaults(func=func)
        if series:
            sp.add_argument("--series", required=True, help="input CSV: poi_id,timestamp,query_count,positioning_count")
        sp.add_argument("--out", default="out", help="output directory (default: ./out)")
        return sp

    def min_days(sp):
        sp.add_argument("--min-days", type=int, default=None, help="minimum non-zero peak days per fit (default 14)")

    sp = command("simulate", cmd_simulate, "generate a synthetic series CSV and events.csv", series=False)
    sp.add_argument("--config", help="SimConfig JSON (default: the flagship fixture)")
    sp.add_argument("--seed", type=int, default=None, help="override the config seed")

    command("peaks", cmd_peaks, "daily peak value and hour per POI and signal")

    sp = command("fit-warning", cmd_fit_warning, "fit query (alpha) and positioning (alpha=3) warning lines")
    sp.add_argument("--alpha", type=float, default=2.0)
    min_days(sp)

    sp = command("detect", cmd_detect, "raise alerts where the query count reaches its warning line")
    sp.add_argument("--alpha", type=float, default=2.0)
    sp.add_argument("--T", type=int, default=3, help="warning horizon in hours (recorded for symmetry with evaluate)")
    sp.add_argument("--lines", help="use warning lines from a fit-warning JSON instead of refitting")
    min_days(sp)

    sp = command("evaluate", cmd_evaluate, "precision/recall/F1 of the alerts over a range of alpha")
    sp.add_argument("--alphas", default="0.5:4.0:0.25", help="start:stop:step or comma list")
    sp.add_argument("--T", type=int, default=3)
    sp.add_argument("--min-lead", type=int, default=1)
    sp.add_argument("--cluster", action="store_true", help="score recall over runs of consecutive truth hours")
    min_days(sp)

    sp = command("lag-hist", cmd_lag_hist, "histogram of daily peak-hour lags (query minus positioning)")
    sp.add_argument("--poi")

    sp = command("mi", cmd_mi, "mutual information between lagged query and positioning counts")
    sp.add_argument("--lags", default="-6:3", help="lo:hi inclusive (default -6:3)")
    sp.add_argument("--bins", type=int, default=DEFAULT_BINS)
    sp.add_argument("--poi")

    sp = command("features", cmd_features, "export the 47-feature matrix with next-hour targets")
    sp.add_argument("--holidays", help="file with one YYYY-MM-DD per line")
    sp.add_argument("--poi")

    sp = command("train", cmd_train, "fit a GBDT on the window before an event")
    sp.add_argument("--event-time", type=_hour, required=True, help="YYYY-MM-DDTHH:00")
    sp.add_argument("--window-days", type=int, default=60)
    sp.add_argument("--no-query", dest="with_query", action="store_false", help="drop MQ1, MQ2, MQY")
    sp.add_argument("--holidays")
    sp.add_argument("--poi")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--n-trees", type=int, default=200)
    sp.add_argument("--max-depth", type=int, default=3)
    sp.add_argument("--min-leaf", type=int, default=5)
    sp.add_argument("--learning-rate", type=float, default=0.1)
    sp.add_argument("--max-thresholds", type=int, default=32)

    for name, func, text in (
        ("predict", cmd_predict, "next-hour predictions from a model file"),
        ("eval-mae", cmd_eval_mae, "mean absolute error of a model over a time range"),
    ):
        sp = command(name, func, text)
        sp.add_argument("--model", required=True)
        sp.add_argument("--holidays")
        sp.add_argument("--poi")
        sp.add_argument("--from", dest="start", type=_hour, required=name == "eval-mae")
        sp.add_argument("--to", dest="end", type=_hour, help="exclusive end hour")
        if name == "predict":
            sp.add_argument("--label", default="", help="value for the model column")

    sp = command("importance", cmd_importance, "split-gain feature importance of a model", series=False)
    sp.add_argument("--model", required=True)

    sp = command("reproduce", cmd_reproduce, "run the whole pipeline on simulated data", series=False)
    sp.add_argument("--seed", type=int, default=42)
    sp.add_argument("--config", help="SimConfig JSON (default: the flagship fixture)")
    return p


def _fail(code: str, message: str, status: int) -> int:
    one_line = " ".join(str(message).split())
    print(f"{code}: {one_line}", file=sys.stderr)
    return status


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_glue_range_flags(argv))
    except UsageError as exc:
        return _fail("usage_error", exc, EXIT_USAGE)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    out = Outputs(args.out)
    try:
        args.func(args, out)
        out.flush()
    except CrowdWarnError as exc:
        return _fail(exc.code, exc, exc.exit_code)
    except argparse.ArgumentTypeError as exc:
        return _fail("usage_error", exc, EXIT_USAGE)
    except OSError as exc:
        return _fail("io_error", f"{exc.strerror or exc}: {exc.filename or ''}", EXIT_IO)
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to the documented code
        return _fail("internal_error", f"{type(exc).__name__}: {exc}", EXIT_INTERNAL)
    return EXIT_OK


def main() -> None:
    sys.exit(run())
