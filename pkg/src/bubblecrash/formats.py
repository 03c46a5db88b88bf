"""Text formats for scan output and crash-event lists."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from .backtest import CrashEvent, SignalEntry, SignalSeries
from .data import DataError, format_number, parse_date
from .model import Signal, WindowAssessment, WindowBounds

SIGNAL_COLUMNS = [
    "end_date", "end_index", "close", "p0", "px", "avg_return", "market_return",
    "instability_price", "signal", "diagnostics", "gap",
]


def _num(x) -> str:
    return "" if x is None else format_number(x)


def _round15(x):
    return None if x is None else float(format_number(x))


def round_floats(obj):
    """Recursively round floats to 15 significant digits for stable JSON."""
    if isinstance(obj, float):
        return _round15(obj)
    if isinstance(obj, dict):
        return {k: round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v) for v in obj]
    return obj


def signal_row(entry: SignalEntry) -> dict:
    a = entry.assessment
    return {
        "end_date": entry.window_end_date.isoformat(),
        "end_index": entry.window_end_index,
        "close": entry.close,
        "p0": a.bounds.p0 if a.bounds else None,
        "px": a.bounds.px if a.bounds else None,
        "avg_return": a.avg_return,
        "market_return": a.market_return,
        "instability_price": a.instability_price,
        "signal": a.signal.value,
        "diagnostics": list(a.diagnostics),
        "gap": a.gap,
    }


def dump_signals_csv(signals: SignalSeries) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SIGNAL_COLUMNS)
    for entry in signals:
        row = signal_row(entry)
        writer.writerow([
            row["end_date"], row["end_index"], _num(row["close"]), _num(row["p0"]), _num(row["px"]),
            _num(row["avg_return"]), _num(row["market_return"]), _num(row["instability_price"]),
            row["signal"], ";".join(row["diagnostics"]), _num(row["gap"]),
        ])
    return buf.getvalue()


def dump_signals_json(signals: SignalSeries) -> str:
    rows = [round_floats(signal_row(entry)) for entry in signals]
    return json.dumps(rows, indent=1) + "\n"


def load_signals_csv(path) -> SignalSeries:
    """Rebuild a SignalSeries from scan CSV output.

    Regression details are not part of the file, so the assessments come
    back without them.
    """
    def opt(text):
        return float(text) if text != "" else None

    entries = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c for c in SIGNAL_COLUMNS if c not in reader.fieldnames]:
            raise DataError(f"{path}: not a signals file (expected columns {SIGNAL_COLUMNS})")
        for i, rec in enumerate(reader, start=1):
            try:
                p0, px = opt(rec["p0"]), opt(rec["px"])
                assessment = WindowAssessment(
                    signal=Signal(rec["signal"]),
                    bounds=WindowBounds(p0, px) if p0 is not None else None,
                    avg_return=opt(rec["avg_return"]),
                    market_return=opt(rec["market_return"]),
                    instability_price=opt(rec["instability_price"]),
                    gap=opt(rec["gap"]),
                    diagnostics=tuple(d for d in rec["diagnostics"].split(";") if d),
                )
                entries.append(SignalEntry(
                    int(rec["end_index"]), parse_date(rec["end_date"]), float(rec["close"]), assessment
                ))
            except (ValueError, TypeError) as exc:
                raise DataError(f"{path}: row {i}: {exc}") from None
    idx = [e.window_end_index for e in entries]
    if any(b <= a for a, b in zip(idx, idx[1:])):
        raise DataError(f"{path}: end_index values are not strictly increasing")
    return SignalSeries(tuple(entries))


def load_events_csv(path) -> list[CrashEvent]:
    """Read ``label,date`` rows (header required)."""
    events = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"label", "date"} <= set(reader.fieldnames):
            raise DataError(f"{path}: events file needs 'label' and 'date' columns")
        for i, rec in enumerate(reader, start=1):
            try:
                events.append(CrashEvent(rec["label"], parse_date(rec["date"] or "")))
            except (ValueError, TypeError):
                raise DataError(f"{path}: row {i}: bad date {rec['date']!r}") from None
    return events
