"""Seeded synthetic query/positioning counts with injected crowd events.

Expected positioning count at hour t::

    lam_q(t) = base * profile[hour(t)] * weekday_factor[weekday(t)] * day_factor[day(t)]

multiplied by ``positioning_multiplier`` during an event. Expected query
count::

    lam_m(t) = c * lam_q0(t + lead) + (1 - c) * lam_q0(t)

where ``lam_q0`` is the event-free positioning rate and ``c`` the query
coupling, multiplied by ``query_multiplier`` over the event's duration
starting ``lead`` hours before the positioning surge. Counts are Poisson.

Random stream
-------------
All randomness comes from :class:`CountStream`, fixed here so that outputs
do not depend on library versions:

* PCG64 (numpy's ``BitGenerator``, whose raw output is stable) seeded
  with ``seed + poi_index``;
* uniforms ``(word >> 11) * 2**-53`` from successive 64-bit words;
* standard normals by Box-Muller (two uniforms per normal, cosine branch);
* Poisson by multiplicative inversion for ``lam < 10`` and Hörmann's
  PTRS transformed rejection otherwise.

Draw order per POI: ``days + 1`` daily factors, then for each hour the
positioning count followed by the query count.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import asdict, dataclass, field
from datetime import datetime
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .series import CSV_HEADER, DAY, HOUR, IngestResult, format_hour, ingest_series, parse_hour


def _default_profile() -> tuple[float, ...]:
    # night floor, a broad afternoon hump and a sharp evening peak at 20:00
    return tuple(
        round(0.08 + 0.35 * math.exp(-((h - 13) ** 2) / 18.0) + math.exp(-((h - 20) ** 2) / 4.5), 6)
        for h in range(24)
    )


DEFAULT_WEEKDAY_FACTORS = (0.9, 0.9, 0.95, 1.0, 1.15, 1.3, 1.2)  # Monday..Sunday


@dataclass(frozen=True)
class EventSpec:
    day_index: int
    event_hour: int
    positioning_multiplier: float = 8.0
    query_multiplier: float = 10.0
    duration_hours: int = 3
    poi_id: str | None = None  # None applies the event to every POI


@dataclass(frozen=True)
class SimConfig:
    poi_count: int = 1
    days: int = 120
    seed: int = 42
    daily_profile: tuple = field(default_factory=_default_profile)
    weekday_factors: tuple = DEFAULT_WEEKDAY_FACTORS
    base_positioning_level: float = 300.0
    query_coupling: float = 0.8
    query_lead_hours: int = 2
    events: tuple = ()
    daily_noise_sigma: float = 0.1
    start: datetime = datetime(2014, 1, 1)
    poi_ids: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "daily_profile", tuple(float(v) for v in self.daily_profile))
        object.__setattr__(self, "weekday_factors", tuple(float(v) for v in self.weekday_factors))
        object.__setattr__(
            self, "events", tuple(e if isinstance(e, EventSpec) else EventSpec(**e) for e in self.events)
        )
        if self.poi_ids is not None:
            object.__setattr__(self, "poi_ids", tuple(self.poi_ids))
        self.validate()

    @property
    def poi_names(self) -> tuple[str, ...]:
        if self.poi_ids is not None:
            return self.poi_ids
        return ("bund",) + tuple(f"poi{i}" for i in range(1, self.poi_count))

    def validate(self) -> None:
        if self.poi_count < 1 or self.days < 1:
            raise ConfigError("poi_count and days must be >= 1")
        if self.poi_ids is not None and (len(self.poi_ids) != self.poi_count or len(set(self.poi_ids)) != self.poi_count):
            raise ConfigError("poi_ids must list poi_count distinct names")
        if len(self.daily_profile) != 24 or min(self.daily_profile) < 0:
            raise ConfigError("daily_profile needs 24 non-negative values")
        if len(self.weekday_factors) != 7 or min(self.weekday_factors) < 0:
            raise ConfigError("weekday_factors needs 7 non-negative values")
        if self.base_positioning_level < 0:
            raise ConfigError("base_positioning_level must be >= 0")
        if not 0 <= self.query_coupling <= 1:
            raise ConfigError("query_coupling must be in [0, 1]")
        if self.query_lead_hours < 1:
            raise ConfigError("query_lead_hours must be >= 1")
        if self.daily_noise_sigma < 0:
            raise ConfigError("daily_noise_sigma must be >= 0")
        if self.start.minute or self.start.second or self.start.microsecond:
            raise ConfigError("start must be a whole hour")
        n_hours = 24 * self.days
        for e in self.events:
            if not 0 <= e.event_hour <= 23:
                raise ConfigError(f"event hour {e.event_hour} outside 0..23")
            if e.positioning_multiplier < 1 or e.query_multiplier < 1:
                raise ConfigError("event multipliers must be >= 1")
            if e.duration_hours < 1:
                raise ConfigError("event duration must be >= 1 hour")
            t0 = 24 * e.day_index + e.event_hour - self.start.hour
            if e.day_index < 0 or t0 - self.query_lead_hours < 0 or t0 + e.duration_hours > n_hours:
                raise ConfigError(
                    f"event on day {e.day_index} at {e.event_hour}:00 does not fit in the "
                    f"{self.days}-day range (query surge starts {self.query_lead_hours} h earlier)"
                )
            if e.poi_id is not None and e.poi_id not in self.poi_names:
                raise ConfigError(f"event names unknown POI {e.poi_id!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["start"] = format_hour(self.start)
        d["daily_profile"] = list(self.daily_profile)
        d["weekday_factors"] = list(self.weekday_factors)
        d["events"] = [asdict(e) for e in self.events]
        d["poi_ids"] = list(self.poi_ids) if self.poi_ids is not None else None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown SimConfig field(s): {', '.join(sorted(unknown))}")
        kw = dict(d)
        if "start" in kw and isinstance(kw["start"], str):
            try:
                kw["start"] = parse_hour(kw["start"])
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        if "events" in kw:
            try:
                kw["events"] = tuple(EventSpec(**e) for e in kw["events"])
            except TypeError as exc:
                raise ConfigError(f"bad event entry: {exc}") from None
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json_file(cls, path) -> "SimConfig":
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        return cls.from_dict(data)


FLAGSHIP_EVENT_DAYS = (20, 38, 57, 76, 95, 110)


def flagship_config(seed: int = 42, *, lead: int = 2, coupling: float = 0.8, days: int = 120) -> SimConfig:
    """One POI ("bund"), 120 days, six evening events (positioning x8, query x10)."""
    events = tuple(EventSpec(day_index=d, event_hour=20) for d in FLAGSHIP_EVENT_DAYS if d < days)
    return SimConfig(days=days, seed=seed, query_lead_hours=lead, query_coupling=coupling, events=events)


class CountStream:
    """Deterministic uniform/normal/Poisson draws on top of PCG64 raw output."""

    _BLOCK = 4096

    def __init__(self, seed: int):
        self._bits = np.random.PCG64(seed)
        self._buf: list[int] = []
        self._pos = 0

    def uniform(self) -> float:
        if self._pos == len(self._buf):
            self._buf = self._bits.random_raw(self._BLOCK).tolist()
            self._pos = 0
        w = self._buf[self._pos]
        self._pos += 1
        return (w >> 11) * (1.0 / 9007199254740992.0)

    def normal(self) -> float:
        u1 = self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)

    def poisson(self, lam: float) -> int:
        if lam <= 0:
            return 0
        if lam < 10:
            limit = math.exp(-lam)
            k = 0
            prod = self.uniform()
            while prod > limit:
                k += 1
                prod *= self.uniform()
            return k
        return self._ptrs(lam)

    def _ptrs(self, lam: float) -> int:
        slam = math.sqrt(lam)
        loglam = math.log(lam)
        b = 0.931 + 2.53 * slam
        a = -0.059 + 0.02483 * b
        inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
        v_r = 0.9277 - 3.6224 / (b - 2)
        while True:
            u = self.uniform() - 0.5
            v = self.uniform()
            us = 0.5 - abs(u)
            k = math.floor((2 * a / us + b) * u + lam + 0.43)
            if us >= 0.07 and v <= v_r:
                return k
            if k < 0 or (us < 0.013 and v > us):
                continue
            if math.log(v) + math.log(inv_alpha) - math.log(a / (us * us) + b) <= -lam + k * loglam - math.lgamma(k + 1):
                return k


def _events_for(cfg: SimConfig, poi: str) -> list[EventSpec]:
    return [e for e in cfg.events if e.poi_id is None or e.poi_id == poi]


def expected_rates(cfg: SimConfig, poi_index: int, day_factors: Sequence[float] | None = None):
    """(lam_q, lam_m) arrays of length ``24 * days`` for one POI.

    ``day_factors`` (length ``days + 1``) defaults to all ones, the noise-free case.
    """
    n = 24 * cfg.days
    lead = cfg.query_lead_hours
    if day_factors is None:
        day_factors = np.ones(cfg.days + 1)
    day_factors = np.asarray(day_factors, dtype=float)
    t = np.arange(n + lead)
    hours = (cfg.start.hour + t) % 24
    day_of = (cfg.start.hour + t) // 24
    weekday0 = cfg.start.weekday()
    prof = np.asarray(cfg.daily_profile)[hours]
    wf = np.asarray(cfg.weekday_factors)[(weekday0 + day_of) % 7]
    base = cfg.base_positioning_level * prof * wf * day_factors[np.minimum(day_of, cfg.days)]
    c = cfg.query_coupling
    lam_q = base[:n].copy()
    lam_m = c * base[lead : n + lead] + (1 - c) * base[:n]
    poi = cfg.poi_names[poi_index]
    for e in _events_for(cfg, poi):
        t0 = 24 * e.day_index + e.event_hour - cfg.start.hour
        lo, hi = max(t0, 0), min(t0 + e.duration_hours, n)
        lam_q[lo:hi] *= e.positioning_multiplier
        lo, hi = max(t0 - lead, 0), min(t0 - lead + e.duration_hours, n)
        lam_m[lo:hi] *= e.query_multiplier
    return lam_q, lam_m


@dataclass(frozen=True)
class SimOutput:
    config: SimConfig
    rows: tuple  # (poi_id, timestamp, query_count, positioning_count)
    event_rows: tuple  # (poi_id, timestamp, lead_hours)

    def series(self) -> IngestResult:
        return ingest_series(self.rows)

    def series_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        w.writerows(self.rows)
        return buf.getvalue()

    def events_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("poi_id", "timestamp", "lead_hours"))
        w.writerows(self.event_rows)
        return buf.getvalue()

    def write(self, out_dir, series_name: str = "series.csv") -> None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, series_name), "w", encoding="utf-8", newline="") as fh:
            fh.write(self.series_csv())
        with open(os.path.join(out_dir, "events.csv"), "w", encoding="utf-8", newline="") as fh:
            fh.write(self.events_csv())


def generate(cfg: SimConfig) -> SimOutput:
    cfg.validate()
    rows = []
    event_rows = []
    for pi, poi in enumerate(cfg.poi_names):
        stream = CountStream(cfg.seed + pi)
        factors = [math.exp(cfg.daily_noise_sigma * stream.normal()) for _ in range(cfg.days + 1)]
        lam_q, lam_m = expected_rates(cfg, pi, factors)
        for k in range(lam_q.size):
            q = stream.poisson(float(lam_q[k]))
            m = stream.poisson(float(lam_m[k]))
            rows.append((poi, format_hour(cfg.start + k * HOUR), m, q))
        for e in sorted(_events_for(cfg, poi), key=lambda e: (e.day_index, e.event_hour)):
            t0 = cfg.start.replace(hour=0) + e.day_index * DAY + e.event_hour * HOUR
            event_rows.append((poi, format_hour(t0), cfg.query_lead_hours))
    return SimOutput(cfg, tuple(rows), tuple(event_rows))
