"""Rolling-window scan of a market series and scoring against known crashes."""

from __future__ import annotations

import bisect
import logging
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import date
from typing import NamedTuple, Optional, Sequence

from .data import MarketSeries
from .model import ModelConfig, Signal, WindowAssessment, assess_window

log = logging.getLogger(__name__)

DEFAULT_WINDOW = 50
DEFAULT_TOLERANCE_DAYS = 60


class SignalEntry(NamedTuple):
    window_end_index: int
    window_end_date: date
    close: float
    assessment: WindowAssessment

    @property
    def signal(self) -> Signal:
        return self.assessment.signal


@dataclass(frozen=True)
class SignalSeries:
    entries: tuple[SignalEntry, ...] = ()
    window_length: int = DEFAULT_WINDOW
    name: str = ""

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def down_indices(self) -> list[int]:
        return [e.window_end_index for e in self.entries if e.signal is Signal.DOWN]


def _assess_chunk(args):
    series, window_length, config, ends = args
    return [assess_window(series.points(end - window_length + 1, end + 1), config) for end in ends]


def scan(
    series: MarketSeries,
    window_length: int = DEFAULT_WINDOW,
    config: ModelConfig = ModelConfig(),
    workers: Optional[int] = None,
) -> SignalSeries:
    """Assess every contiguous window, advancing one row at a time.

    With ``workers > 1`` windows are evaluated in a process pool; results are
    reassembled in index order so the output does not depend on ``workers``.
    """
    if window_length < 2:
        raise ValueError(f"window_length must be >= 2, got {window_length}")
    n = len(series)
    if n < window_length:
        log.warning("series %r has %d rows, fewer than window length %d", series.name, n, window_length)
        return SignalSeries((), window_length, series.name)

    ends = list(range(window_length - 1, n))
    if workers and workers > 1 and len(ends) > 1:
        size = -(-len(ends) // (workers * 4))
        chunks = [ends[i:i + size] for i in range(0, len(ends), size)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_assess_chunk, [(series, window_length, config, c) for c in chunks])
            assessments = [a for part in parts for a in part]
    else:
        assessments = _assess_chunk((series, window_length, config, ends))

    entries = tuple(
        SignalEntry(end, series.rows[end].date, series.rows[end].close, a)
        for end, a in zip(ends, assessments)
    )
    return SignalSeries(entries, window_length, series.name)


@dataclass(frozen=True)
class CrashEvent:
    label: str
    date: date


@dataclass
class EventResult:
    label: str
    date: date
    in_range: bool
    hit: bool = False
    event_index: Optional[int] = None
    lead_time_days: Optional[int] = None
    nearest_down_index: Optional[int] = None
    pre_event_down: list[int] = field(default_factory=list)
    post_event_down: list[int] = field(default_factory=list)


@dataclass
class EvaluationReport:
    events: list[EventResult]
    tolerance_days: int
    hit_rate: float
    down_signal_fraction: float
    up_signal_fraction: float
    invalid_fraction: float

    def to_dict(self) -> dict:
        return {
            "tolerance_days": self.tolerance_days,
            "hit_rate": self.hit_rate,
            "down_signal_fraction": self.down_signal_fraction,
            "up_signal_fraction": self.up_signal_fraction,
            "invalid_fraction": self.invalid_fraction,
            "events": [
                {
                    "label": e.label,
                    "date": e.date.isoformat(),
                    "in_range": e.in_range,
                    "hit": e.hit,
                    "event_index": e.event_index,
                    "lead_time_days": e.lead_time_days,
                    "nearest_down_index": e.nearest_down_index,
                    "pre_event_down": e.pre_event_down,
                    "post_event_down": e.post_event_down,
                }
                for e in self.events
            ],
        }


def _fractions(entries: Sequence[SignalEntry]) -> tuple[float, float, float]:
    n = len(entries)
    if n == 0:
        return 0.0, 0.0, 0.0
    down = sum(e.signal is Signal.DOWN for e in entries)
    invalid = sum(e.signal is Signal.INVALID for e in entries)
    return down / n, (n - down - invalid) / n, invalid / n


def evaluate_against_events(
    signals: SignalSeries,
    events: Sequence[CrashEvent],
    tolerance_days: int = DEFAULT_TOLERANCE_DAYS,
) -> EvaluationReport:
    """Score Down signals against labeled crash dates.

    An event maps to the first signal row dated on or after it; events
    outside the span of signal dates are reported as out of range. A hit is
    any Down within ``tolerance_days`` rows either side. The lead time is
    measured to the earliest such Down, so it is negative only when every
    nearby warning came after the event. Down signals after the event
    (post-crash echoes) are listed separately from the ones before it.
    """
    if tolerance_days < 0:
        raise ValueError("tolerance_days must be non-negative")
    entries = signals.entries
    dates = [e.window_end_date for e in entries]
    downs = signals.down_indices()

    results = []
    for ev in events:
        res = EventResult(ev.label, ev.date, in_range=bool(dates) and dates[0] <= ev.date <= dates[-1])
        if res.in_range:
            idx = entries[bisect.bisect_left(dates, ev.date)].window_end_index
            res.event_index = idx
            if downs:
                res.nearest_down_index = min(downs, key=lambda d: (abs(d - idx), d))
            near = [d for d in downs if abs(d - idx) <= tolerance_days]
            res.pre_event_down = [d for d in near if d <= idx]
            res.post_event_down = [d for d in near if d > idx]
            if near:
                res.hit = True
                res.lead_time_days = idx - near[0]
        results.append(res)

    scored = [r for r in results if r.in_range]
    hit_rate = sum(r.hit for r in scored) / len(scored) if scored else 0.0
    down, up, invalid = _fractions(entries)
    return EvaluationReport(results, tolerance_days, hit_rate, down, up, invalid)


def summarize(signals: SignalSeries) -> dict:
    entries = signals.entries
    counts = {s.value: sum(e.signal is s for e in entries) for s in Signal}
    down, up, invalid = _fractions(entries)

    longest = run = 0
    for e in entries:
        run = run + 1 if e.signal is Signal.DOWN else 0
        longest = max(longest, run)

    gaps = [e.assessment.gap for e in entries if e.assessment.gap is not None]
    return {
        "windows": len(entries),
        "counts": counts,
        "down_fraction": down,
        "up_fraction": up,
        "invalid_fraction": invalid,
        "longest_down_streak": longest,
        "gap_min": min(gaps) if gaps else None,
        "gap_median": statistics.median(gaps) if gaps else None,
        "gap_max": max(gaps) if gaps else None,
    }
