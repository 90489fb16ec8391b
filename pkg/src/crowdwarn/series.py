"""Hourly count series: ingestion, daily peaks, alignment and normalization.

Timestamps are naive wall-clock ``datetime`` objects truncated to the hour.
No time-zone or DST arithmetic is done anywhere in the package.
"""
from __future__ import annotations

import csv
import enum
import io
import re
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DegenerateSeriesError, EmptyPeaksError, IngestError, NoOverlapError

HOUR = timedelta(hours=1)
DAY = timedelta(days=1)
CSV_HEADER = ("poi_id", "timestamp", "query_count", "positioning_count")

_TS_RE = re.compile(r"^(\d{4})-(\d{2})-(\d{2})T(\d{2}):00$")
_EPOCH = datetime(1970, 1, 1)


class Signal(str, enum.Enum):
    MAP_QUERY = "MapQuery"
    POSITIONING = "Positioning"


def parse_hour(text: str) -> datetime:
    """Parse ``YYYY-MM-DDTHH:00`` into a naive datetime; raises ValueError otherwise."""
    m = _TS_RE.match(text.strip())
    if not m:
        raise ValueError(f"malformed timestamp {text!r}, expected YYYY-MM-DDTHH:00")
    y, mo, d, h = (int(g) for g in m.groups())
    return datetime(y, mo, d, h)


def format_hour(t: datetime) -> str:
    return t.strftime("%Y-%m-%dT%H:00")


def hour_index(t: datetime) -> int:
    """Whole hours since 1970-01-01T00:00; differences of these are hour differences."""
    return (t - _EPOCH) // HOUR


def from_hour_index(k: int) -> datetime:
    return _EPOCH + k * HOUR


def _check_hour(t: datetime) -> datetime:
    if not isinstance(t, datetime):
        raise TypeError(f"expected datetime, got {type(t).__name__}")
    if t.tzinfo is not None or t.minute or t.second or t.microsecond:
        raise ValueError(f"{t!r} is not a naive whole-hour timestamp")
    return t


@dataclass(frozen=True, eq=False)
class HourlySeries:
    """Dense hourly counts for one POI and one signal; ``values[k]`` is the count at ``start + k`` hours."""

    poi_id: str
    signal: Signal
    start: datetime
    values: np.ndarray

    def __post_init__(self):
        _check_hour(self.start)
        vals = np.array(self.values, dtype=np.int64)
        if vals.ndim != 1 or vals.size == 0:
            raise ValueError("series needs at least one value")
        if (vals < 0).any():
            raise ValueError("counts must be non-negative")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "signal", Signal(self.signal))

    def __len__(self) -> int:
        return int(self.values.size)

    def __eq__(self, other):
        if not isinstance(other, HourlySeries):
            return NotImplemented
        return (
            self.poi_id == other.poi_id
            and self.signal == other.signal
            and self.start == other.start
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    @property
    def end(self) -> datetime:
        """Last covered hour (inclusive)."""
        return self.start + (len(self) - 1) * HOUR

    def time_at(self, k: int) -> datetime:
        return self.start + k * HOUR

    def index_of(self, t: datetime) -> int:
        """Offset of ``t`` from the series start; may fall outside ``[0, len)``."""
        return (t - self.start) // HOUR

    def value_at(self, t: datetime) -> int:
        k = self.index_of(t)
        if not 0 <= k < len(self):
            raise IndexError(f"{format_hour(t)} outside series range")
        return int(self.values[k])


@dataclass(frozen=True)
class GapReport:
    poi_id: str
    filled_hours: int
    first: datetime
    last: datetime

    def to_dict(self) -> dict:
        return {
            "poi_id": self.poi_id,
            "filled_hours": self.filled_hours,
            "first": format_hour(self.first),
            "last": format_hour(self.last),
        }


@dataclass(frozen=True)
class IngestResult:
    series: dict = field(default_factory=dict)  # (poi_id, Signal) -> HourlySeries
    gaps: tuple = ()

    @property
    def poi_ids(self) -> list[str]:
        return sorted({poi for poi, _ in self.series})

    def pair(self, poi_id: str) -> tuple[HourlySeries, HourlySeries]:
        """(query, positioning) series for one POI."""
        try:
            return self.series[poi_id, Signal.MAP_QUERY], self.series[poi_id, Signal.POSITIONING]
        except KeyError:
            raise KeyError(f"no series for POI {poi_id!r}") from None


def _parse_count(text, rowno: int, column: str) -> int:
    s = str(text).strip()
    if not s.isdigit():
        raise IngestError(f"row {rowno}: {column} must be a non-negative base-10 integer, got {text!r}")
    return int(s)


def ingest_series(rows: Iterable) -> IngestResult:
    """Build dense per-POI query and positioning series from parsed CSV rows.

    Each row is a mapping with the CSV header keys or a 4-sequence in header
    order. Rows are numbered from 1 (first data row) in error messages.
    Missing interior hours are zero-filled and counted in the gap report.
    """
    by_poi: dict[str, dict[int, tuple[int, int]]] = {}
    for rowno, row in enumerate(rows, start=1):
        if isinstance(row, Mapping):
            try:
                poi, ts, qc, pc = (row[k] for k in CSV_HEADER)
            except KeyError as exc:
                raise IngestError(f"row {rowno}: missing column {exc.args[0]!r}") from None
        else:
            if len(row) != 4:
                raise IngestError(f"row {rowno}: expected 4 fields, got {len(row)}")
            poi, ts, qc, pc = row
        poi = str(poi).strip()
        if not poi:
            raise IngestError(f"row {rowno}: empty poi_id")
        try:
            t = parse_hour(str(ts))
        except ValueError as exc:
            raise IngestError(f"row {rowno}: {exc}") from None
        counts = (_parse_count(qc, rowno, "query_count"), _parse_count(pc, rowno, "positioning_count"))
        k = hour_index(t)
        slots = by_poi.setdefault(poi, {})
        if k in slots:
            raise IngestError(f"row {rowno}: duplicate timestamp {format_hour(t)} for POI {poi!r}")
        slots[k] = counts

    series = {}
    gaps = []
    for poi in sorted(by_poi):
        slots = by_poi[poi]
        lo, hi = min(slots), max(slots)
        q = np.zeros(hi - lo + 1, dtype=np.int64)
        p = np.zeros(hi - lo + 1, dtype=np.int64)
        for k, (qc, pc) in slots.items():
            q[k - lo] = qc
            p[k - lo] = pc
        start = from_hour_index(lo)
        series[poi, Signal.MAP_QUERY] = HourlySeries(poi, Signal.MAP_QUERY, start, q)
        series[poi, Signal.POSITIONING] = HourlySeries(poi, Signal.POSITIONING, start, p)
        gaps.append(GapReport(poi, (hi - lo + 1) - len(slots), start, from_hour_index(hi)))
    return IngestResult(series, tuple(gaps))


def read_series_csv(path) -> IngestResult:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in CSV_HEADER if c not in (reader.fieldnames or ())]
        if missing:
            raise IngestError(f"{path}: header lacks column(s) {', '.join(missing)}")
        return ingest_series(reader)


def export_rows(query: HourlySeries, positioning: HourlySeries) -> list[tuple[str, str, int, int]]:
    """Inverse of :func:`ingest_series` for one POI: dense rows over the aligned range."""
    pair = align(query, positioning)
    return [
        (query.poi_id, format_hour(pair.time_at(k)), int(a), int(b))
        for k, (a, b) in enumerate(zip(pair.first, pair.second))
    ]


def write_series_csv(fh, pairs: Sequence[tuple[HourlySeries, HourlySeries]]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for query, positioning in pairs:
        w.writerows(export_rows(query, positioning))


def series_csv_text(pairs) -> str:
    buf = io.StringIO()
    write_series_csv(buf, pairs)
    return buf.getvalue()


# -- daily peaks ---------------------------------------------------------


@dataclass(frozen=True)
class DayPeak:
    day: date
    peak: int
    peak_hour: datetime


@dataclass(frozen=True)
class DailyPeaks:
    poi_id: str
    signal: Signal
    entries: tuple[DayPeak, ...]

    def __len__(self):
        return len(self.entries)

    @property
    def peaks(self) -> np.ndarray:
        return np.array([e.peak for e in self.entries], dtype=np.int64)

    def by_day(self) -> dict[date, DayPeak]:
        return {e.day: e for e in self.entries}


def daily_peaks(series: HourlySeries) -> DailyPeaks:
    """One entry per complete calendar day (hours 00..23); ties go to the earliest hour."""
    first_midnight = datetime.combine(series.start.date(), datetime.min.time())
    if series.start != first_midnight:
        first_midnight += DAY
    offset = series.index_of(first_midnight)
    n_days = (len(series) - offset) // 24
    if n_days <= 0:
        raise EmptyPeaksError(
            f"series {series.poi_id}/{series.signal.value} covers no complete calendar day"
        )
    block = series.values[offset : offset + 24 * n_days].reshape(n_days, 24)
    hours = block.argmax(axis=1)  # argmax returns the first maximum
    entries = tuple(
        DayPeak(
            day=(first_midnight + d * DAY).date(),
            peak=int(block[d, hours[d]]),
            peak_hour=first_midnight + d * DAY + int(hours[d]) * HOUR,
        )
        for d in range(n_days)
    )
    return DailyPeaks(series.poi_id, series.signal, entries)


def normalize_by_std(series: HourlySeries) -> np.ndarray:
    """Values divided by their sample standard deviation (n-1 denominator). Display only."""
    vals = series.values.astype(float)
    if vals.size < 2:
        raise DegenerateSeriesError("normalization needs at least two values")
    sd = vals.std(ddof=1)
    if sd == 0:
        raise DegenerateSeriesError(f"series {series.poi_id}/{series.signal.value} has zero standard deviation")
    return vals / sd


@dataclass(frozen=True, eq=False)
class AlignedPair:
    start: datetime
    first: np.ndarray
    second: np.ndarray

    def __len__(self):
        return int(self.first.size)

    def time_at(self, k: int) -> datetime:
        return self.start + k * HOUR

    def pairs(self) -> list[tuple[int, int]]:
        return list(zip(self.first.tolist(), self.second.tolist()))


def align(a: HourlySeries, b: HourlySeries) -> AlignedPair:
    """Restrict two series of the same POI to their common hour range."""
    if a.poi_id != b.poi_id:
        raise NoOverlapError(f"cannot align series of different POIs ({a.poi_id!r} vs {b.poi_id!r})")
    lo = max(a.start, b.start)
    hi = min(a.end, b.end)
    if hi < lo:
        raise NoOverlapError(
            f"series ranges {format_hour(a.start)}..{format_hour(a.end)} and "
            f"{format_hour(b.start)}..{format_hour(b.end)} do not overlap"
        )
    n = (hi - lo) // HOUR + 1
    ia, ib = a.index_of(lo), b.index_of(lo)
    return AlignedPair(lo, a.values[ia : ia + n], b.values[ib : ib + n])
