"""The 47 next-hour prediction features and their targets.

For a prediction hour ``h`` (the hour whose positioning count is the target):

====  ==========  ==============================================================
ID    name        value
====  ==========  ==============================================================
1-4   PN1..PN4    q(h-1) .. q(h-4)
5-11  PNS1..PNS7  q at the same hour-of-day 1..7 days before h
12    MQ1         m(h-1)
13    MQ2         m(h-2)
14    MQY         sum of m over 20:00-23:00 of the calendar day before h
15-38 CT1..CT24   hour-of-day of h one-hot; CT24 stands for hour 0
39-45 TW1..TW7    weekday of h one-hot, Monday = TW1
46    WD          h falls on a weekend day
47    HD          h falls on a holiday
====  ==========  ==============================================================
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import date, datetime
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import InsufficientDataError, ParameterError
from .series import DAY, HOUR, HourlySeries, Signal, format_hour, parse_hour

FEATURE_NAMES: tuple[str, ...] = (
    *(f"PN{i}" for i in range(1, 5)),
    *(f"PNS{i}" for i in range(1, 8)),
    "MQ1",
    "MQ2",
    "MQY",
    *(f"CT{i}" for i in range(1, 25)),
    *(f"TW{i}" for i in range(1, 8)),
    "WD",
    "HD",
)
N_FEATURES = len(FEATURE_NAMES)
QUERY_FEATURES = ("MQ1", "MQ2", "MQY")
LAG_FEATURES = FEATURE_NAMES[:14]

TRAIN_WINDOW_DAYS = 60
MQY_HOURS = (20, 21, 22, 23)


@dataclass(frozen=True)
class CalendarConfig:
    holidays: frozenset = frozenset()
    weekend_days: frozenset = frozenset({6, 7})  # ISO weekday numbers

    def __post_init__(self):
        object.__setattr__(self, "holidays", frozenset(self.holidays))
        object.__setattr__(self, "weekend_days", frozenset(int(d) for d in self.weekend_days))
        if not self.weekend_days or not self.weekend_days <= set(range(1, 8)):
            raise ParameterError("weekend_days must be a non-empty subset of 1..7 (Monday = 1)")
        for d in self.holidays:
            if not isinstance(d, date) or isinstance(d, datetime):
                raise ParameterError(f"holiday {d!r} is not a calendar date")


def load_holidays(path) -> frozenset:
    """One ``YYYY-MM-DD`` per line; blank lines and ``#`` comments are ignored."""
    out = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            try:
                out.add(date.fromisoformat(text))
            except ValueError:
                raise ParameterError(f"{path}:{lineno}: bad holiday date {text!r}") from None
    return frozenset(out)


@dataclass(frozen=True, eq=False)
class FeatureRow:
    poi_id: str
    at: datetime
    x: np.ndarray
    y: int | None = None


@dataclass(frozen=True, eq=False)
class FeatureTable:
    """Feature rows sharing one column layout, plus the count of hours skipped for lack of history."""

    rows: tuple[FeatureRow, ...]
    feature_names: tuple[str, ...] = FEATURE_NAMES
    skipped: int = 0

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        width = len(self.feature_names)
        for r in self.rows:
            if len(r.x) != width:
                raise ParameterError(f"row at {format_hour(r.at)} has {len(r.x)} features, expected {width}")

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self) -> Iterator[FeatureRow]:
        return iter(self.rows)

    def __getitem__(self, i):
        return self.rows[i]

    def matrix(self) -> np.ndarray:
        if not self.rows:
            return np.empty((0, len(self.feature_names)))
        return np.vstack([r.x for r in self.rows])

    def targets(self) -> np.ndarray:
        return np.array([np.nan if r.y is None else r.y for r in self.rows], dtype=float)

    def column(self, name: str) -> np.ndarray:
        return self.matrix()[:, self.feature_names.index(name)]

    def between(self, lo: datetime, hi: datetime) -> "FeatureTable":
        """Rows with ``lo <= at < hi``."""
        return FeatureTable(tuple(r for r in self.rows if lo <= r.at < hi), self.feature_names)


def as_table(rows) -> FeatureTable:
    if isinstance(rows, FeatureTable):
        return rows
    return FeatureTable(tuple(rows))


def _feature_vector(qv, mv, kq, km, h: datetime, cal: CalendarConfig) -> np.ndarray | None:
    """Features for prediction hour ``h``; ``kq``/``km`` are h's offsets into q and m."""
    q_idx = [kq - i for i in range(1, 5)] + [kq - 24 * d for d in range(1, 8)]
    day_start_m = km - h.hour
    m_idx = [km - 1, km - 2] + [day_start_m - 24 + hh for hh in MQY_HOURS]
    if min(q_idx) < 0 or max(q_idx) >= qv.size or min(m_idx) < 0 or max(m_idx) >= mv.size:
        return None
    x = np.zeros(N_FEATURES)
    x[0:11] = qv[q_idx]
    x[11] = mv[m_idx[0]]
    x[12] = mv[m_idx[1]]
    x[13] = mv[m_idx[2:]].sum()
    x[14 + (h.hour - 1) % 24] = 1.0  # hour 0 -> CT24 (index 37)
    wd = h.isoweekday()
    x[38 + wd - 1] = 1.0
    x[45] = float(wd in cal.weekend_days)
    x[46] = float(h.date() in cal.holidays)
    return x


def build_rows(
    query: HourlySeries,
    positioning: HourlySeries,
    cal: CalendarConfig = CalendarConfig(),
    window: tuple[datetime, datetime] | None = None,
) -> FeatureTable:
    """Feature rows for every prediction hour in ``window`` (both ends inclusive).

    Without a window, every hour of the positioning series is tried. Hours whose
    history reaches before either series start are skipped and counted.
    The target is left as ``None`` when ``q(h)`` is not in the series.
    """
    if query.signal is not Signal.MAP_QUERY or positioning.signal is not Signal.POSITIONING:
        raise ParameterError("build_rows expects (MapQuery, Positioning) series")
    if query.poi_id != positioning.poi_id:
        raise ParameterError("query and positioning series belong to different POIs")
    first, last = window if window is not None else (positioning.start, positioning.end)
    if last < first:
        raise ParameterError("window end precedes its start")
    qv = positioning.values
    mv = query.values
    rows = []
    skipped = 0
    h = first
    while h <= last:
        kq = positioning.index_of(h)
        km = query.index_of(h)
        x = _feature_vector(qv, mv, kq, km, h, cal)
        if x is None:
            skipped += 1
        else:
            y = int(qv[kq]) if 0 <= kq < qv.size else None
            rows.append(FeatureRow(positioning.poi_id, h, x, y))
        h += HOUR
    return FeatureTable(tuple(rows), FEATURE_NAMES, skipped)


def train_window(rows, event_time: datetime, days: int = TRAIN_WINDOW_DAYS) -> FeatureTable:
    """Rows whose prediction hour lies in ``[event_time - days, event_time)``."""
    table = as_table(rows)
    lo = event_time - days * DAY
    before = [r for r in table if r.at < event_time]
    if not before or before[0].at > lo:
        span = "none" if not before else f"{format_hour(before[0].at)}..{format_hour(before[-1].at)}"
        raise InsufficientDataError(
            f"training needs rows from {format_hour(lo)} up to {format_hour(event_time)}; "
            f"rows before the event span {span}",
            available=0 if not before else (event_time - before[0].at) / DAY,
            required=days,
        )
    return FeatureTable(
        tuple(sorted((r for r in before if r.at >= lo), key=lambda r: r.at)), table.feature_names
    )


def ablate_query_features(rows) -> FeatureTable:
    """Drop MQ1, MQ2 and MQY. Idempotent; other columns keep their order."""
    table = as_table(rows)
    keep = [i for i, n in enumerate(table.feature_names) if n not in QUERY_FEATURES]
    if len(keep) == len(table.feature_names):
        return table
    names = tuple(table.feature_names[i] for i in keep)
    new_rows = tuple(FeatureRow(r.poi_id, r.at, r.x[keep], r.y) for r in table)
    return FeatureTable(new_rows, names, table.skipped)


def select_features(rows, names: Sequence[str]) -> FeatureTable:
    """Project a table onto ``names`` (all must be present)."""
    table = as_table(rows)
    missing = [n for n in names if n not in table.feature_names]
    if missing:
        raise ParameterError(f"feature(s) missing from table: {', '.join(missing)}")
    idx = [table.feature_names.index(n) for n in names]
    return FeatureTable(tuple(FeatureRow(r.poi_id, r.at, r.x[idx], r.y) for r in table), tuple(names), table.skipped)


def _num(v: float) -> str:
    return format(v, ".17g")


def write_feature_csv(fh, tables: Iterable[FeatureTable]) -> None:
    tables = list(tables)
    names = tables[0].feature_names if tables else FEATURE_NAMES
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(("poi_id", "timestamp", *names, "target"))
    for t in tables:
        if t.feature_names != names:
            raise ParameterError("tables with different feature layouts cannot share a file")
        for r in t:
            w.writerow((r.poi_id, format_hour(r.at), *map(_num, r.x), "" if r.y is None else r.y))


def read_feature_csv(fh) -> FeatureTable:
    reader = csv.reader(fh)
    header = next(reader)
    if header[:2] != ["poi_id", "timestamp"] or header[-1] != "target":
        raise ParameterError("feature CSV header must be poi_id,timestamp,<features>,target")
    names = tuple(header[2:-1])
    rows = []
    for rec in reader:
        x = np.array([float(v) for v in rec[2:-1]])
        y = int(rec[-1]) if rec[-1] != "" else None
        rows.append(FeatureRow(rec[0], parse_hour(rec[1]), x, y))
    return FeatureTable(tuple(rows), names)
