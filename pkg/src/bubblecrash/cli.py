"""Command-line entry point: ``bubblecrash {scan,assess,synth,report,plot}``.

Exit codes: 0 success, 1 data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import backtest, formats, plot
from .data import (
    DataError, ScenarioSpec, dump_csv, generate_bubble_scenario, load_csv, parse_date,
    validate_series, write_csv,
)
from .model import ModelConfig, SearchConfig, assess_window

log = logging.getLogger("bubblecrash")

EXIT_OK, EXIT_DATA, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _add_input_flags(p):
    p.add_argument("--input", required=True, help="daily OHLCV CSV")
    p.add_argument("--date-col", default="Date")
    p.add_argument("--price-col", default="Close")
    p.add_argument("--volume-col", default="Volume")
    p.add_argument("--us-dates", action="store_true", help="dates are MM/DD/YYYY")
    p.add_argument("--keep-zero-volume", action="store_true")


def _add_model_flags(p):
    p.add_argument("--p0-rule", choices=["min", "first"], default="min")
    p.add_argument("--solver-tol", type=float, default=SearchConfig.tolerance)
    p.add_argument("--solver-cap-multiple", type=float, default=SearchConfig.cap_multiple)
    p.add_argument("--price-bins", type=int, default=None,
                   help="aggregate volume into this many price bins before regressing")


def _model_config(args) -> ModelConfig:
    search = SearchConfig(tolerance=args.solver_tol, cap_multiple=args.solver_cap_multiple)
    try:
        search.check()
        return ModelConfig(p0_rule=args.p0_rule, search=search, price_bins=args.price_bins)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load(args):
    cols = {"date": args.date_col, "price": args.price_col, "volume": args.volume_col}
    series = load_csv(args.input, cols, us_dates=args.us_dates)
    series, report = validate_series(series, drop_zero_volume=not args.keep_zero_volume)
    for row, day, reason in report.dropped:
        log.info("dropped row %d (%s): %s", row, day, reason)
    if report.dropped:
        log.warning("dropped %d of %d rows from %s", report.dropped_rows, report.input_rows, args.input)
    return series


def _emit(text: str, output) -> None:
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(output).write_text(text, encoding="utf-8")


def cmd_scan(args) -> int:
    if args.window < 2:
        raise UsageError("--window must be >= 2")
    config = _model_config(args)
    series = _load(args)
    signals = backtest.scan(series, args.window, config, workers=args.workers)
    if args.format == "csv":
        text = formats.dump_signals_csv(signals)
    elif args.format == "json":
        text = formats.dump_signals_json(signals)
    else:
        text = plot.render_overlay(series.closes, _aligned_signals(signals, len(series)), series.name)
    _emit(text, args.output)
    return EXIT_OK


def cmd_assess(args) -> int:
    config = _model_config(args)
    series = _load(args)
    try:
        start, end = parse_date(args.start), parse_date(args.end)
    except ValueError as exc:
        raise UsageError(f"bad date: {exc}") from None
    window = series.between(start, end)
    if len(window) < 2:
        log.error("range %s..%s selects %d rows; need at least 2", start, end, len(window))
        return EXIT_DATA
    result = assess_window(window.points(), config)
    _emit(json.dumps(formats.round_floats(result.to_dict()), indent=2) + "\n", args.output)
    return EXIT_OK


SYNTH_FLAGS = {
    "n_days": int, "base_price": float, "bubble_start": int, "crash_index": int,
    "growth_rate": float, "crash_drop_fraction": float, "volume_base": float,
    "volume_price_slope": float, "noise_scale": float, "seed": int, "volume_floor": float,
}


def cmd_synth(args) -> int:
    kwargs = {k: getattr(args, k) for k in SYNTH_FLAGS if getattr(args, k) is not None}
    spec = ScenarioSpec(**kwargs)
    try:
        series = generate_bubble_scenario(spec)
    except DataError as exc:
        raise UsageError(str(exc)) from None
    if args.output in (None, "-"):
        sys.stdout.write(dump_csv(series))
    else:
        write_csv(series, args.output)
    return EXIT_OK


def _report_table(report: backtest.EvaluationReport) -> str:
    lines = [f"{'event':<24} {'date':<10} {'index':>6} {'hit':>4} {'lead':>5}  post-event echoes"]
    for e in report.events:
        if not e.in_range:
            lines.append(f"{e.label:<24} {e.date.isoformat():<10} {'-':>6} {'out of range':>11}")
            continue
        lead = "" if e.lead_time_days is None else str(e.lead_time_days)
        echoes = ",".join(map(str, e.post_event_down)) or "-"
        lines.append(
            f"{e.label:<24} {e.date.isoformat():<10} {e.event_index:>6} "
            f"{'yes' if e.hit else 'no':>4} {lead:>5}  {echoes}"
        )
    lines.append(
        f"hit rate {report.hit_rate:.3f}  down {report.down_signal_fraction:.3f}  "
        f"up {report.up_signal_fraction:.3f}  invalid {report.invalid_fraction:.3f}"
    )
    return "\n".join(lines) + "\n"


def cmd_report(args) -> int:
    if args.tolerance_days < 0:
        raise UsageError("--tolerance-days must be >= 0")
    signals = formats.load_signals_csv(args.signals)
    events = formats.load_events_csv(args.events)
    report = backtest.evaluate_against_events(signals, events, args.tolerance_days)
    _emit(json.dumps(formats.round_floats(report.to_dict()), indent=2) + "\n", args.output)
    sys.stderr.write(_report_table(report))
    return EXIT_OK


def _aligned_signals(signals, n):
    out = [None] * n
    for e in signals:
        out[e.window_end_index] = e.signal.value
    return out


def cmd_plot(args) -> int:
    series = _load(args)
    signals = formats.load_signals_csv(args.signals)
    n = len(series)
    for e in signals:
        i = e.window_end_index
        if i >= n:
            raise DataError(f"signal index {i} is past the end of {n} price rows")
        close = series.rows[i].close
        if abs(close - e.close) > 1e-12 * abs(close) or series.rows[i].date != e.window_end_date:
            raise DataError(f"signal row {i} ({e.window_end_date}) does not match price row ({series.rows[i].date})")
    svg = plot.render_overlay(series.closes, _aligned_signals(signals, n), series.name)
    _emit(svg, args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bubblecrash", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", help="rolling-window scan of a CSV")
    _add_input_flags(p)
    _add_model_flags(p)
    p.add_argument("--window", type=int, default=backtest.DEFAULT_WINDOW)
    p.add_argument("--format", choices=["csv", "json", "svg"], default="csv")
    p.add_argument("--output", default=None)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("assess", help="assess one date range")
    _add_input_flags(p)
    _add_model_flags(p)
    p.add_argument("--start", required=True)
    p.add_argument("--end", required=True)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_assess)

    p = sub.add_parser("synth", help="write a synthetic bubble scenario CSV")
    for name, typ in SYNTH_FLAGS.items():
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="score a signals file against crash events")
    p.add_argument("--signals", required=True)
    p.add_argument("--events", required=True, help="CSV with label,date columns")
    p.add_argument("--tolerance-days", type=int, default=backtest.DEFAULT_TOLERANCE_DAYS)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("plot", help="SVG overlay of prices and signals")
    _add_input_flags(p)
    p.add_argument("--signals", required=True)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (DataError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
