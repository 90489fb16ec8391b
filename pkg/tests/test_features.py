import io
from datetime import date, datetime, timedelta

import numpy as np
import pytest

from conftest import make_series
from crowdwarn.errors import InsufficientDataError, ParameterError
from crowdwarn.features import (
    FEATURE_NAMES,
    N_FEATURES,
    CalendarConfig,
    FeatureRow,
    FeatureTable,
    ablate_query_features,
    build_rows,
    load_holidays,
    read_feature_csv,
    select_features,
    train_window,
)
from crowdwarn.series import Signal

H = timedelta(hours=1)
D = timedelta(days=1)
MONDAY = datetime(2014, 1, 6)


def pair(m_vals, q_vals, start=MONDAY, poi="p"):
    return (
        make_series(m_vals, start=start, poi=poi),
        make_series(q_vals, start=start, poi=poi, signal=Signal.POSITIONING),
    )


def oracle(m: dict, q: dict, h: datetime, holidays=frozenset(), weekend=(6, 7)):
    """Feature vector by name, each value looked up by timestamp."""
    f = {}
    for i in range(1, 5):
        f[f"PN{i}"] = q[h - i * H]
    for d in range(1, 8):
        f[f"PNS{d}"] = q[h - d * D]
    f["MQ1"] = m[h - H]
    f["MQ2"] = m[h - 2 * H]
    prev = datetime.combine(h.date() - D, datetime.min.time())
    f["MQY"] = sum(m[prev + k * H] for k in (20, 21, 22, 23))
    for k in range(1, 25):
        f[f"CT{k}"] = 1.0 if h.hour == k % 24 else 0.0
    for k in range(1, 8):
        f[f"TW{k}"] = 1.0 if h.isoweekday() == k else 0.0
    f["WD"] = 1.0 if h.isoweekday() in weekend else 0.0
    f["HD"] = 1.0 if h.date() in holidays else 0.0
    return np.array([f[n] for n in FEATURE_NAMES], dtype=float)


def test_layout():
    assert N_FEATURES == 47
    assert FEATURE_NAMES[:4] == ("PN1", "PN2", "PN3", "PN4")
    assert FEATURE_NAMES[11:14] == ("MQ1", "MQ2", "MQY")
    assert FEATURE_NAMES[14] == "CT1" and FEATURE_NAMES[37] == "CT24"
    assert FEATURE_NAMES[-2:] == ("WD", "HD")


def test_constant_series_example():
    n = 24 * 9
    m, q = pair([3] * n, [5] * n)
    h = MONDAY + 8 * D + 13 * H
    (row,) = build_rows(m, q, window=(h, h))
    x = dict(zip(FEATURE_NAMES, row.x))
    assert all(x[f"PN{i}"] == 5 for i in range(1, 5))
    assert all(x[f"PNS{i}"] == 5 for i in range(1, 8))
    assert (x["MQ1"], x["MQ2"], x["MQY"]) == (3, 3, 12)
    assert row.y == 5


def test_monday_midnight_calendar():
    n = 24 * 15
    m, q = pair(list(range(n)), list(range(n)))
    h = MONDAY + 14 * D
    assert h.isoweekday() == 1 and h.hour == 0
    (row,) = build_rows(m, q, window=(h, h)).rows
    x = dict(zip(FEATURE_NAMES, row.x))
    assert x["CT24"] == 1 and sum(x[f"CT{i}"] for i in range(1, 25)) == 1
    assert x["TW1"] == 1 and sum(x[f"TW{i}"] for i in range(1, 8)) == 1
    assert x["WD"] == 0 and x["HD"] == 0


def test_matches_timestamp_oracle():
    n = 24 * 9
    rng = np.random.default_rng(11)
    mv = rng.permutation(n) + 1000
    qv = rng.permutation(n) + 5000
    m, q = pair(mv, qv)
    mdict = {MONDAY + k * H: int(v) for k, v in enumerate(mv)}
    qdict = {MONDAY + k * H: int(v) for k, v in enumerate(qv)}
    hols = frozenset({date(2014, 1, 14)})
    table = build_rows(m, q, CalendarConfig(holidays=hols))
    assert len(table) == 48 and table.skipped == n - 48
    assert sum(r.x[-1] for r in table) == 24
    for row in table:
        assert np.array_equal(row.x, oracle(mdict, qdict, row.at, hols))
        assert row.y == qdict[row.at]


def test_weekend_config():
    n = 24 * 14
    m, q = pair([1] * n, [1] * n)
    sat = MONDAY + 12 * D + 5 * H
    (row,) = build_rows(m, q, CalendarConfig(weekend_days={5, 6}), window=(sat, sat))
    assert dict(zip(FEATURE_NAMES, row.x))["WD"] == 1
    fri = MONDAY + 11 * D
    (row,) = build_rows(m, q, CalendarConfig(weekend_days={6, 7}), window=(fri, fri))
    assert dict(zip(FEATURE_NAMES, row.x))["WD"] == 0
    with pytest.raises(ParameterError):
        CalendarConfig(weekend_days={8})


def test_target_missing_beyond_series():
    n = 24 * 8
    m, q = pair([1] * (n + 1), [2] * n)
    h = q.end + H
    (row,) = build_rows(m, q, window=(h, h))
    assert row.y is None
    assert np.isnan(FeatureTable((row,)).targets()[0])


def test_translation_invariance():
    n = 24 * 9
    rng = np.random.default_rng(5)
    mv, qv = rng.integers(0, 500, n), rng.integers(0, 500, n)
    a = build_rows(*pair(mv, qv))
    b = build_rows(*pair(mv, qv, start=MONDAY + 7 * D))
    assert len(a) == len(b)
    for ra, rb in zip(a, b):
        assert rb.at - ra.at == 7 * D
        assert np.array_equal(ra.x, rb.x)


def _daily_table(days):
    n = 24 * days
    m, q = pair(np.arange(n) % 97, np.arange(n) % 89)
    return build_rows(m, q)


def test_train_window_sizes():
    table = _daily_table(90)
    event = MONDAY + 89 * D
    win = train_window(table, event, 60)
    assert len(win) == 60 * 24
    assert win[0].at == event - 60 * D and win[-1].at == event - H
    assert all(r.at < event for r in win)


def test_train_window_insufficient():
    table = _daily_table(30)
    with pytest.raises(InsufficientDataError) as info:
        train_window(table, MONDAY + 29 * D, 60)
    assert info.value.required == 60
    assert 0 < info.value.available < 60


def test_ablation_idempotent_and_ordered():
    table = _daily_table(10)
    ab = ablate_query_features(table)
    assert len(ab.feature_names) == 44
    assert not set(ab.feature_names) & {"MQ1", "MQ2", "MQY"}
    assert ab.feature_names == tuple(n for n in FEATURE_NAMES if n not in ("MQ1", "MQ2", "MQY"))
    again = ablate_query_features(ab)
    assert again.feature_names == ab.feature_names
    assert np.array_equal(again.matrix(), ab.matrix())
    assert np.array_equal(ab.column("PN1"), table.column("PN1"))


def test_select_features():
    table = _daily_table(10)
    sel = select_features(table, ["MQ1", "PN1"])
    assert sel.matrix().shape == (len(table), 2)
    with pytest.raises(ParameterError):
        select_features(table, ["nope"])


def test_csv_round_trip():
    table = _daily_table(9)
    buf = io.StringIO()
    from crowdwarn.features import write_feature_csv

    write_feature_csv(buf, [table])
    buf.seek(0)
    back = read_feature_csv(buf)
    assert back.feature_names == table.feature_names
    assert np.array_equal(back.matrix(), table.matrix())
    assert [r.at for r in back] == [r.at for r in table]
    assert [r.y for r in back] == [r.y for r in table]


def test_holiday_file(tmp_path):
    p = tmp_path / "hol.txt"
    p.write_text("# public holidays\n2014-01-14\n\n2014-01-20  # spare\n")
    assert load_holidays(p) == {date(2014, 1, 14), date(2014, 1, 20)}
    p.write_text("2014-13-01\n")
    with pytest.raises(ParameterError):
        load_holidays(p)


def test_mismatched_inputs():
    m, q = pair([1] * 200, [1] * 200)
    with pytest.raises(ParameterError):
        build_rows(q, m)
    other = make_series([1] * 200, poi="zz", signal=Signal.POSITIONING)
    with pytest.raises(ParameterError):
        build_rows(m, other)
    with pytest.raises(ParameterError):
        FeatureTable((FeatureRow("p", MONDAY, np.zeros(3)),))
