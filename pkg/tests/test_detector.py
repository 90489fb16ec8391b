from datetime import datetime, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_series
from crowdwarn.detector import (
    AlertRecord,
    GroundTruthPoint,
    MatchConfig,
    alpha_sweep,
    ground_truth,
    macro_average,
    match_and_score,
    raise_alerts,
    sweep_pois,
)
from crowdwarn.errors import ConfigError, ParameterError
from crowdwarn.series import Signal, daily_peaks
from crowdwarn.warning_lines import LogNormalPeakFit, fit_log_peaks, warning_line

T0 = datetime(2014, 5, 1)


def line_at(threshold, signal=Signal.MAP_QUERY, poi="p"):
    alpha = 3.0 if signal is Signal.POSITIONING else 1.0
    fit = LogNormalPeakFit(20, float(np.log(threshold)), 0.0, poi_id=poi, signal=signal)
    return warning_line(fit, alpha)


def alerts_at(hours, poi="p"):
    return [AlertRecord(poi, T0 + timedelta(hours=h), 99, 10.0, 1.0) for h in hours]


def truth_at(hours, poi="p"):
    return [GroundTruthPoint(poi, T0 + timedelta(hours=h), 500) for h in hours]


def brute_score(alert_hours, truth_hours, T=3, min_lead=1):
    """Double loop over every (alert, truth) pair."""
    tp = 0
    for a in alert_hours:
        hit = False
        for t in truth_hours:
            if min_lead <= t - a <= T:
                hit = True
        tp += hit
    det = 0
    for t in truth_hours:
        hit = False
        for a in alert_hours:
            if min_lead <= t - a <= T:
                hit = True
        det += hit
    p = tp / len(alert_hours) if alert_hours else 0.0
    r = det / len(truth_hours) if truth_hours else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return tp, len(alert_hours) - tp, det, len(truth_hours) - det, p, r, f


def test_raise_alerts_pointwise():
    s = make_series([3, 12, 9, 15], start=T0)
    alerts = raise_alerts(s, line_at(10))
    assert [a.time for a in alerts] == [T0 + timedelta(hours=1), T0 + timedelta(hours=3)]
    assert [a.query_count for a in alerts] == [12, 15]
    assert raise_alerts(make_series([1, 2, 3], start=T0), line_at(10)) == []


def test_ground_truth_pointwise():
    s = make_series([120, 90, 101], start=T0, signal=Signal.POSITIONING)
    pts = ground_truth(s, line_at(100, Signal.POSITIONING))
    assert [p.time for p in pts] == [T0, T0 + timedelta(hours=2)]
    assert ground_truth(make_series([1, 2], signal=Signal.POSITIONING), line_at(100, Signal.POSITIONING)) == []


def test_shared_comparator():
    vals = [5, 10, 11, 9, 10]
    a = raise_alerts(make_series(vals, start=T0), line_at(10))
    g = ground_truth(make_series(vals, start=T0, signal=Signal.POSITIONING), line_at(10, Signal.POSITIONING))
    assert [x.time for x in a] == [x.time for x in g]


def test_signal_mismatch_is_config_error():
    with pytest.raises(ConfigError):
        raise_alerts(make_series([1], signal=Signal.POSITIONING), line_at(10))
    with pytest.raises(ConfigError):
        ground_truth(make_series([1], signal=Signal.POSITIONING), line_at(10))
    with pytest.raises(ConfigError):
        raise_alerts(make_series([1], poi="other"), line_at(10))


def test_lead_two_is_hit():
    rep = match_and_score(alerts_at([20]), truth_at([22]), MatchConfig(3))
    assert (rep.precision, rep.recall, rep.f1) == (1.0, 1.0, 1.0)


def test_simultaneous_is_not_early_warning():
    rep = match_and_score(alerts_at([20]), truth_at([20]), MatchConfig(3))
    assert (rep.precision, rep.recall, rep.f1) == (0.0, 0.0, 0.0)


def test_hand_worked_window_example():
    rep = match_and_score(alerts_at([1, 2]), truth_at([3, 9]), MatchConfig(3))
    assert (rep.tp_alerts, rep.detected_events) == (2, 1)
    assert rep.precision == 1.0 and rep.recall == 0.5
    assert abs(rep.f1 - 2 / 3) < 1e-15


def test_both_empty_flag():
    rep = match_and_score([], [], MatchConfig())
    assert rep.both_empty and rep.f1 == 0.0
    rep = match_and_score(alerts_at([1]), [], MatchConfig())
    assert not rep.both_empty and rep.precision == 0.0


def test_match_config_validation():
    with pytest.raises(ParameterError):
        MatchConfig(horizon_T=2, min_lead=3)
    with pytest.raises(ParameterError):
        MatchConfig(horizon_T=3, min_lead=0)


hour_sets = st.lists(st.integers(0, 80), max_size=30, unique=True)


@settings(max_examples=300, deadline=None)
@given(hour_sets, hour_sets, st.integers(1, 5), st.integers(1, 5))
def test_matches_double_loop(a, t, T, lead):
    lead = min(lead, T)
    rep = match_and_score(alerts_at(a), truth_at(t), MatchConfig(T, lead))
    got = (rep.tp_alerts, rep.fp_alerts, rep.detected_events, rep.missed_events, rep.precision, rep.recall, rep.f1)
    assert got == brute_score(a, t, T, lead)


@settings(max_examples=100, deadline=None)
@given(hour_sets, hour_sets)
def test_every_tp_alert_has_truth_in_window(a, t):
    rep = match_and_score(alerts_at(a), truth_at(t))
    truth_times = {T0 + timedelta(hours=h) for h in t}
    for at in rep.tp_alert_times:
        assert any(at + timedelta(hours=k) in truth_times for k in (1, 2, 3))


def test_cluster_counts_runs():
    # truth run 10-12 and isolated 30; only the run is preceded by an alert
    rep = match_and_score(alerts_at([8]), truth_at([10, 11, 12, 30]), cluster=True)
    assert (rep.detected_events, rep.missed_events) == (1, 1)
    plain = match_and_score(alerts_at([8]), truth_at([10, 11, 12, 30]))
    assert (plain.detected_events, plain.missed_events) == (2, 2)


def _daily(n_days, rng, spike_days=(), poi="p", signal=Signal.MAP_QUERY, lead=0):
    vals = rng.poisson(100, size=24 * n_days)
    for d in spike_days:
        vals[24 * d + 20 - lead : 24 * d + 23 - lead] *= 8
    return make_series(vals, start=T0, poi=poi, signal=signal)


def test_sweep_monotone_counts_and_composition():
    rng = np.random.default_rng(0)
    q = _daily(40, rng, spike_days=(10, 25), lead=2)
    p = _daily(40, rng, spike_days=(10, 25), signal=Signal.POSITIONING)
    line_q = warning_line(fit_log_peaks(daily_peaks(p)))
    reps = alpha_sweep(q, p, line_q, [1, 2, 3])
    assert len(reps) == 3
    counts = [r.n_alerts for r in reps]
    assert counts == sorted(counts, reverse=True)
    assert alpha_sweep(q, p, line_q, []) == []
    fit_m = fit_log_peaks(daily_peaks(q))
    direct = match_and_score(raise_alerts(q, warning_line(fit_m, 2.0)), ground_truth(p, line_q), alpha=2.0)
    (single,) = alpha_sweep(q, p, line_q, [2.0])
    assert single == direct


def test_sweep_rejects_unsorted_alphas():
    rng = np.random.default_rng(1)
    q, p = _daily(20, rng), _daily(20, rng, signal=Signal.POSITIONING)
    with pytest.raises(ParameterError):
        alpha_sweep(q, p, warning_line(fit_log_peaks(daily_peaks(p))), [2, 1])


def test_macro_average_across_pois():
    rng = np.random.default_rng(2)
    pairs = {}
    for poi in ("b", "a"):
        pairs[poi] = (
            _daily(30, rng, spike_days=(12,), poi=poi, lead=2),
            _daily(30, rng, spike_days=(12,), poi=poi, signal=Signal.POSITIONING),
        )
    out = sweep_pois(pairs, [1.0, 2.0])
    assert [(r.alpha, r.poi_id) for r in out] == [(1.0, "a"), (1.0, "b"), (1.0, "ALL"), (2.0, "a"), (2.0, "b"), (2.0, "ALL")]
    a, b, agg = out[:3]
    assert agg.precision == (a.precision + b.precision) / 2
    assert agg.recall == (a.recall + b.recall) / 2
    assert agg.f1 == (a.f1 + b.f1) / 2
    assert macro_average([a]).precision == a.precision


def test_deterministic_reports(flagship):
    q, p, _ = flagship
    line_q = warning_line(fit_log_peaks(daily_peaks(p)))
    assert alpha_sweep(q, p, line_q, [1, 2]) == alpha_sweep(q, p, line_q, [1, 2])
