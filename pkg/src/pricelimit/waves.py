"""Waves of limit-down events and the structure of the stocks failing in them."""

from __future__ import annotations

import csv
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .contagion import CascadeResult
from .critical import pearson

log = logging.getLogger(__name__)

TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M"
DEFAULT_SESSIONS = ((time(9, 30), time(11, 30)), (time(13, 0), time(15, 0)))


@dataclass(frozen=True, order=True)
class FailureEvent:
    timestamp: datetime
    stock_id: str


def parse_sessions(items: Sequence[str]) -> tuple[tuple[time, time], ...]:
    """``["09:30-11:30", "13:00-15:00"]`` -> session tuples."""
    out = []
    for item in items:
        a, b = item.split("-")
        out.append((datetime.strptime(a.strip(), "%H:%M").time(), datetime.strptime(b.strip(), "%H:%M").time()))
    return tuple(out)


def _session_of(t: time, sessions) -> int | None:
    for k, (a, b) in enumerate(sessions):
        if a <= t <= b:
            return k
    return None


def normalize_events(events: Iterable[FailureEvent], sessions=DEFAULT_SESSIONS) -> list[FailureEvent]:
    """Keep the first event per stock and day, drop out-of-session events, sort."""
    first: dict[tuple[date, str], FailureEvent] = {}
    dropped = 0
    for ev in events:
        if _session_of(ev.timestamp.time(), sessions) is None:
            dropped += 1
            continue
        key = (ev.timestamp.date(), ev.stock_id)
        if key not in first or ev.timestamp < first[key].timestamp:
            first[key] = ev
    if dropped:
        log.warning("dropped %d events outside trading sessions", dropped)
    return sorted(first.values())


def read_events_csv(path: str | Path) -> list[FailureEvent]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["timestamp", "stock_id"]:
            raise ValueError(f"{path}: expected header timestamp,stock_id")
        return [FailureEvent(datetime.strptime(row[0].strip(), TIMESTAMP_FORMAT), row[1].strip()) for row in reader if row]


@dataclass
class Wave:
    day: date
    session: int
    start: datetime
    end: datetime
    counts: dict[datetime, int]
    peaks: list[datetime]

    @property
    def peak(self) -> datetime:
        """Earliest minute with the maximal count."""
        return self.peaks[0]


def detect_waves(
    events: Iterable[FailureEvent], gap_tolerance: int = 0, sessions=DEFAULT_SESSIONS
) -> list[Wave]:
    """Split failure minutes into waves.

    A wave is a maximal run of failure minutes whose gaps hold at most
    ``gap_tolerance`` empty minutes; a session boundary always ends a wave.
    """
    evs = normalize_events(events, sessions)
    counts: dict[tuple[date, int], dict[datetime, int]] = defaultdict(lambda: defaultdict(int))
    for ev in evs:
        k = _session_of(ev.timestamp.time(), sessions)
        counts[(ev.timestamp.date(), k)][ev.timestamp] += 1
    waves: list[Wave] = []
    for (day, k) in sorted(counts):
        minutes = sorted(counts[(day, k)])
        run = [minutes[0]]
        for t in minutes[1:]:
            if (t - run[-1]) > timedelta(minutes=gap_tolerance + 1):
                waves.append(_make_wave(day, k, run, counts[(day, k)]))
                run = [t]
            else:
                run.append(t)
        waves.append(_make_wave(day, k, run, counts[(day, k)]))
    return waves


def _make_wave(day, session, run, counts) -> Wave:
    c = {t: counts[t] for t in run}
    top = max(c.values())
    return Wave(day, session, run[0], run[-1], c, [t for t in run if c[t] == top])


@dataclass
class SideCorrelation:
    r: float
    p_value: float
    n: int

    @property
    def defined(self) -> bool:
        return not math.isnan(self.r)


@dataclass
class MaxPDTimeline:
    rows: list[tuple[datetime, int, int, float]]  # minute, wave index, minutes to peak, max P_D
    pre_peak: SideCorrelation
    post_peak: SideCorrelation
    per_wave: list[tuple[SideCorrelation, SideCorrelation]] = field(default_factory=list)
    n_missing: int = 0


def _side(points: list[tuple[int, float]]) -> SideCorrelation:
    if len(points) < 3:
        return SideCorrelation(math.nan, math.nan, len(points))
    r, p = pearson([d for d, _ in points], [v for _, v in points])
    return SideCorrelation(r, p, len(points))


def max_pd_timeline(events: Iterable[FailureEvent], p_d: Mapping[str, float], waves: Sequence[Wave], sessions=DEFAULT_SESSIONS) -> MaxPDTimeline:
    """Largest P_D among each minute's failures against signed minutes to the wave peak.

    Pearson correlations are computed separately for minutes up to and
    including the peak and from the peak on, pooled over waves and per wave.
    A side with fewer than 3 points or no variance is left undefined (NaN).
    """
    evs = normalize_events(events, sessions)
    by_minute: dict[datetime, list[str]] = defaultdict(list)
    for ev in evs:
        by_minute[ev.timestamp].append(ev.stock_id)
    rows = []
    missing = 0
    pre_all, post_all, per_wave = [], [], []
    for w_ix, wave in enumerate(waves):
        pre, post = [], []
        for t in sorted(wave.counts):
            vals = [p_d[s] for s in by_minute.get(t, []) if s in p_d]
            missing += sum(s not in p_d for s in by_minute.get(t, []))
            if not vals:
                continue
            dist = int((t - wave.peak).total_seconds() // 60)
            m = max(vals)
            rows.append((t, w_ix, dist, m))
            if dist <= 0:
                pre.append((dist, m))
            if dist >= 0:
                post.append((dist, m))
        pre_all += pre
        post_all += post
        per_wave.append((_side(pre), _side(post)))
    if missing:
        log.warning("%d failed stocks have no P_D and were skipped", missing)
    return MaxPDTimeline(rows, _side(pre_all), _side(post_all), per_wave, missing)


@dataclass
class BucketSummary:
    n: int
    mean: float
    q1: float
    median: float
    q3: float


def kcore_trajectory(ordered: Iterable[tuple[object, str]], k_core: Mapping[str, int]) -> dict[object, BucketSummary]:
    """Summarise k-core indices of failing stocks per bucket (step, minute, interval).

    Buckets come back in sorted order; stocks without a k-core value are skipped.
    """
    groups: dict[object, list[int]] = defaultdict(list)
    for bucket, stock in ordered:
        if stock in k_core:
            groups[bucket].append(k_core[stock])
    return _summaries(groups)


def cascade_buckets(result: CascadeResult) -> list[tuple[int, str]]:
    return [(tau, s) for tau, group in result.failure_timeline for s in group]


def event_buckets(events: Iterable[FailureEvent], interval: int = 1, sessions=DEFAULT_SESSIONS) -> list[tuple[datetime, str]]:
    """Bucket events into ``interval``-minute windows anchored at session open."""
    out = []
    for ev in normalize_events(events, sessions):
        k = _session_of(ev.timestamp.time(), sessions)
        open_ = datetime.combine(ev.timestamp.date(), sessions[k][0])
        offset = int((ev.timestamp - open_).total_seconds() // 60)
        out.append((open_ + timedelta(minutes=offset - offset % interval), ev.stock_id))
    return out


def simulated_kcore_trajectory(results: Iterable[CascadeResult], k_core: Mapping[str, int]) -> dict[int, BucketSummary]:
    """Distribution over shocks of the per-step mean k-core of failing stocks."""
    per_step: dict[int, list[float]] = defaultdict(list)
    for res in results:
        for tau, summary in kcore_trajectory(cascade_buckets(res), k_core).items():
            per_step[tau].append(summary.mean)
    return _summaries(per_step)


def _summaries(groups) -> dict:
    out = {}
    for b in sorted(groups):
        v = np.asarray(groups[b], dtype=float)
        q1, med, q3 = np.percentile(v, [25, 50, 75])
        out[b] = BucketSummary(len(v), float(v.mean()), float(q1), float(med), float(q3))
    return out
