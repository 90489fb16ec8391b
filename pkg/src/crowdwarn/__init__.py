"""Crowd-anomaly early warning from hourly map-query and positioning counts."""

from .detector import MatchConfig, alpha_sweep, ground_truth, match_and_score, raise_alerts
from .errors import CrowdWarnError
from .features import FEATURE_NAMES, CalendarConfig, build_rows
from .gbdt import GbdtModel, Hyperparams, evaluate_mae, feature_importance, fit
from .lag_analytics import mutual_information, peak_lag_histogram
from .series import HourlySeries, Signal, daily_peaks, read_series_csv
from .simgen import SimConfig, flagship_config, generate
from .warning_lines import fit_log_peaks, warning_line

__version__ = "0.1.0"

__all__ = [
    "CalendarConfig",
    "CrowdWarnError",
    "FEATURE_NAMES",
    "GbdtModel",
    "HourlySeries",
    "Hyperparams",
    "MatchConfig",
    "Signal",
    "SimConfig",
    "alpha_sweep",
    "build_rows",
    "daily_peaks",
    "evaluate_mae",
    "feature_importance",
    "fit",
    "fit_log_peaks",
    "flagship_config",
    "generate",
    "ground_truth",
    "match_and_score",
    "mutual_information",
    "peak_lag_histogram",
    "raise_alerts",
    "read_series_csv",
    "warning_line",
]
