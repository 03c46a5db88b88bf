"""Daily market data: CSV ingestion, cleaning, and a seeded bubble generator."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .model import PricePoint

DEFAULT_COLUMNS = {"date": "Date", "price": "Close", "volume": "Volume"}
MISSING_TOKENS = {"", "null", "nan", "NaN", "NA", "N/A", "-"}


class DataError(ValueError):
    pass


class MissingColumn(DataError):
    def __init__(self, column: str):
        super().__init__(f"missing column {column!r}")
        self.column = column


class UnparsableRow(DataError):
    def __init__(self, row: int, field: str, value: str):
        super().__init__(f"row {row}: cannot parse {field} value {value!r}")
        self.row = row
        self.field = field
        self.value = value


class EmptyFile(DataError):
    pass


class NonMonotonicDates(DataError):
    pass


class InvalidSpec(DataError):
    pass


class Row(NamedTuple):
    date: date
    close: Optional[float]
    volume: Optional[float]


@dataclass(frozen=True)
class MarketSeries:
    name: str
    rows: tuple[Row, ...]

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def dates(self) -> list[date]:
        return [r.date for r in self.rows]

    @property
    def closes(self) -> list[float]:
        return [r.close for r in self.rows]

    def points(self, start: int = 0, stop: Optional[int] = None) -> list[PricePoint]:
        return [PricePoint(r.close, r.volume, r.date) for r in self.rows[start:stop]]

    def between(self, start: date, end: date) -> "MarketSeries":
        return MarketSeries(self.name, tuple(r for r in self.rows if start <= r.date <= end))


def format_number(x: float) -> str:
    return format(x, ".15g")


def parse_date(text: str, us_dates: bool = False) -> date:
    text = text.strip()
    if us_dates:
        return datetime.strptime(text, "%m/%d/%Y").date()
    return date.fromisoformat(text[:10])


def _parse_number(text: str) -> Optional[float]:
    text = text.strip()
    if text in MISSING_TOKENS:
        return None
    return float(text.replace(",", ""))


def load_csv(
    path,
    column_map: Optional[dict] = None,
    us_dates: bool = False,
    name: Optional[str] = None,
) -> MarketSeries:
    """Read a header-first CSV into a MarketSeries, keeping file order.

    Blank or NA-like numeric cells load as ``None`` and are left for
    :func:`validate_series` to drop. Row numbers in errors count data rows
    from 1.
    """
    cols = {**DEFAULT_COLUMNS, **(column_map or {})}
    path = Path(path)
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise EmptyFile(f"{path} is empty")
        header = [h.strip() for h in reader.fieldnames]
        reader.fieldnames = header
        for key in ("date", "price", "volume"):
            if cols[key] not in header:
                raise MissingColumn(cols[key])

        rows = []
        for i, rec in enumerate(reader, start=1):
            values = {}
            for key in ("date", "price", "volume"):
                raw = rec[cols[key]]
                if raw is None:
                    raise UnparsableRow(i, cols[key], "")
                try:
                    values[key] = parse_date(raw, us_dates) if key == "date" else _parse_number(raw)
                except ValueError:
                    raise UnparsableRow(i, cols[key], raw) from None
            rows.append(Row(values["date"], values["price"], values["volume"]))
    if not rows:
        raise EmptyFile(f"{path} has no data rows")
    return MarketSeries(name or path.stem, tuple(rows))


def dump_csv(series: MarketSeries) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["Date", "Close", "Volume"])
    for r in series.rows:
        writer.writerow([
            r.date.isoformat(),
            "" if r.close is None else format_number(r.close),
            "" if r.volume is None else format_number(r.volume),
        ])
    return buf.getvalue()


def write_csv(series: MarketSeries, path) -> None:
    Path(path).write_text(dump_csv(series), encoding="utf-8")


@dataclass
class CleaningReport:
    input_rows: int
    retained_rows: int = 0
    dropped: list[tuple[int, date, str]] = field(default_factory=list)

    @property
    def dropped_rows(self) -> int:
        return len(self.dropped)


def validate_series(series: MarketSeries, drop_zero_volume: bool = True):
    """Drop unusable rows and check date order.

    Returns ``(clean_series, report)``. Rows go when close is missing or
    non-positive, volume is missing or negative, volume is zero (unless
    ``drop_zero_volume`` is off), or the date repeats an earlier one. A date
    earlier than its predecessor raises :class:`NonMonotonicDates`.
    """
    report = CleaningReport(input_rows=len(series.rows))
    kept = []
    last = None
    for i, row in enumerate(series.rows, start=1):
        if last is not None and row.date < last:
            raise NonMonotonicDates(f"row {i}: {row.date} comes after {last}")
        if last is not None and row.date == last:
            report.dropped.append((i, row.date, "duplicate date"))
            continue
        last = row.date
        reason = None
        if row.close is None or not math.isfinite(row.close):
            reason = "missing close"
        elif row.close <= 0:
            reason = "non-positive close"
        elif row.volume is None or not math.isfinite(row.volume):
            reason = "missing volume"
        elif row.volume < 0:
            reason = "negative volume"
        elif row.volume == 0 and drop_zero_volume:
            reason = "zero volume"
        if reason:
            report.dropped.append((i, row.date, reason))
        else:
            kept.append(row)
    report.retained_rows = len(kept)
    return MarketSeries(series.name, tuple(kept)), report


@dataclass(frozen=True)
class ScenarioSpec:
    """Scripted bubble: flat base, run-up, one-day crash, flat tail.

    During the run-up the daily log growth rate is ``growth_rate`` times the
    price relative to ``base_price``: rising prices attract buyers, which
    raises prices faster. The path is ``base / (1 - growth_rate * t)`` and
    must stay finite until the crash.

    Volume follows ``volume_base + volume_price_slope * (price - base_price)``
    plus noise. A negative slope makes volume dry up as the bubble inflates;
    it is floored at ``volume_floor * volume_base`` so every row keeps some
    trading activity.
    """

    n_days: int = 300
    base_price: float = 100.0
    bubble_start: int = 100
    crash_index: int = 220
    growth_rate: float = 0.008
    crash_drop_fraction: float = 0.4
    volume_base: float = 1_000_000.0
    volume_price_slope: float = -4_000.0
    noise_scale: float = 0.01
    seed: int = 42
    volume_floor: float = 0.02
    start_date: date = date(2020, 1, 1)

    def check(self) -> None:
        if not (0 <= self.bubble_start < self.crash_index < self.n_days):
            raise InvalidSpec("need 0 <= bubble_start < crash_index < n_days")
        if not 0 <= self.growth_rate * (self.crash_index - 1 - self.bubble_start) < 1:
            raise InvalidSpec("growth_rate must be non-negative and keep the run-up finite")
        if not self.base_price > 0:
            raise InvalidSpec("base_price must be positive")
        if not 0 < self.crash_drop_fraction < 1:
            raise InvalidSpec("crash_drop_fraction must be in (0, 1)")
        if not self.volume_base > 0:
            raise InvalidSpec("volume_base must be positive")
        if not self.noise_scale >= 0:
            raise InvalidSpec("noise_scale must be non-negative")
        if not 0 < self.volume_floor <= 1:
            raise InvalidSpec("volume_floor must be in (0, 1]")


def business_days(start: date, n: int) -> list[date]:
    out = []
    d = start
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += timedelta(days=1)
    return out


def generate_bubble_scenario(spec: ScenarioSpec = ScenarioSpec()) -> MarketSeries:
    spec.check()
    rng = np.random.default_rng(spec.seed)
    t = np.arange(spec.n_days)
    run = np.clip(t, spec.bubble_start, spec.crash_index - 1) - spec.bubble_start
    trend = spec.base_price / (1.0 - spec.growth_rate * run)
    trend[spec.crash_index:] *= 1.0 - spec.crash_drop_fraction
    price = trend * np.exp(spec.noise_scale * rng.standard_normal(spec.n_days))

    volume = spec.volume_base + spec.volume_price_slope * (price - spec.base_price)
    volume += spec.noise_scale * spec.volume_base * rng.standard_normal(spec.n_days)
    volume = np.maximum(volume, spec.volume_floor * spec.volume_base)

    # round through the CSV text form so a write/read cycle is lossless
    rows = tuple(
        Row(d, float(format_number(p)), float(format_number(v)))
        for d, p, v in zip(business_days(spec.start_date, spec.n_days), price, volume)
    )
    return MarketSeries("synthetic", rows)


def series_from_points(points: Sequence[PricePoint], name: str = "series") -> MarketSeries:
    return MarketSeries(name, tuple(Row(p.date, p.price, p.volume) for p in points))
