"""Rational-bubble crash model with a rolling-window backtest."""

from .backtest import (
    CrashEvent, EvaluationReport, SignalEntry, SignalSeries, evaluate_against_events, scan, summarize,
)
from .data import MarketSeries, ScenarioSpec, generate_bubble_scenario, load_csv, validate_series, write_csv
from .model import (
    ModelConfig, PricePoint, SearchConfig, Signal, VolumeRegression, WindowAssessment, WindowBounds,
    assess_window, average_return_closed_form, average_return_quadrature, fit_volume_regression,
    market_return, purchase_return, solve_instability_price,
)

__version__ = "0.1.0"
