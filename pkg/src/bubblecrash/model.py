"""Rational-bubble crash model.

A window of daily (close, volume) rows is reduced to a volume-vs-price
regression line. That line weights the purchase returns ``px / p`` over
entry prices ``p`` in ``[p0, px]``, giving the average investor return.
The instability price is the smallest nontrivial price at which the market
return ``p / p0`` catches up with that average return.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from typing import Optional, Sequence

import numpy as np


class ModelError(ValueError):
    pass


class TooFewPoints(ModelError):
    pass


class ZeroPriceVariance(ModelError):
    pass


class DegenerateDenominator(ModelError):
    pass


class InvalidSearchConfig(ModelError):
    pass


class Signal(str, Enum):
    DOWN = "Down"
    UP = "Up"
    INVALID = "Invalid"


# diagnostic flags
NEGATIVE_VOLUME_IN_RANGE = "NEGATIVE_VOLUME_IN_RANGE"
NO_ROOT = "NO_ROOT"
FLAT_WINDOW = "FLAT_WINDOW"
TOO_FEW_POINTS = "TOO_FEW_POINTS"
ZERO_PRICE_VARIANCE = "ZERO_PRICE_VARIANCE"
DEGENERATE_DENOMINATOR = "DEGENERATE_DENOMINATOR"
PRICE_BELOW_BASE = "PRICE_BELOW_BASE"

# relative floor below which the modeled total volume counts as zero
DENOMINATOR_RTOL = 1e-12


@dataclass(frozen=True)
class PricePoint:
    price: float
    volume: float
    date: Optional[date] = None

    def __post_init__(self):
        if not self.price > 0:
            raise ValueError(f"price must be positive, got {self.price}")
        if not self.volume >= 0:
            raise ValueError(f"volume must be non-negative, got {self.volume}")


@dataclass(frozen=True)
class VolumeRegression:
    slope_a: float
    intercept_b: float
    corr_r: float
    mean_price: float
    mean_volume: float
    sd_price: float
    sd_volume: float
    n_points: int

    @classmethod
    def from_line(cls, a: float, b: float) -> "VolumeRegression":
        """Bare line ``v = a*p + b``; the summary fields are placeholders."""
        return cls(a, b, math.copysign(1.0, a) if a else 0.0, 1.0, a + b, 0.0, 0.0, 2)

    def volume_at(self, price):
        return self.slope_a * price + self.intercept_b


@dataclass(frozen=True)
class WindowBounds:
    p0: float
    px: float

    def __post_init__(self):
        if not (0 < self.p0 <= self.px):
            raise ValueError(f"need 0 < p0 <= px, got p0={self.p0}, px={self.px}")


@dataclass(frozen=True)
class SearchConfig:
    epsilon_rel: float = 1e-6
    grid_points: int = 512
    cap_multiple: float = 20.0
    tolerance: float = 1e-9
    max_iter: int = 200

    def check(self) -> None:
        if not self.tolerance > 0:
            raise InvalidSearchConfig(f"tolerance must be positive, got {self.tolerance}")
        if self.grid_points < 2:
            raise InvalidSearchConfig(f"grid_points must be >= 2, got {self.grid_points}")
        if not self.cap_multiple >= 1:
            raise InvalidSearchConfig(f"cap_multiple must be >= 1, got {self.cap_multiple}")
        if not self.epsilon_rel > 0:
            raise InvalidSearchConfig(f"epsilon_rel must be positive, got {self.epsilon_rel}")
        if self.max_iter < 1:
            raise InvalidSearchConfig(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass(frozen=True)
class ModelConfig:
    """Per-window model settings.

    ``p0_rule`` is ``"min"`` (lowest close in the window) or ``"first"``.
    ``price_bins`` switches on equal-width price binning before the
    regression; ``None`` regresses on the raw daily pairs.
    """

    p0_rule: str = "min"
    min_points: int = 2
    search: SearchConfig = field(default_factory=SearchConfig)
    price_bins: Optional[int] = None

    def __post_init__(self):
        if self.p0_rule not in ("min", "first"):
            raise ValueError(f"p0_rule must be 'min' or 'first', got {self.p0_rule!r}")
        if self.price_bins is not None and self.price_bins < 2:
            raise ValueError("price_bins must be >= 2")


@dataclass(frozen=True)
class WindowAssessment:
    signal: Signal
    bounds: Optional[WindowBounds] = None
    regression: Optional[VolumeRegression] = None
    avg_return: Optional[float] = None
    market_return: Optional[float] = None
    instability_price: Optional[float] = None
    gap: Optional[float] = None
    diagnostics: tuple[str, ...] = ()
    reason: Optional[str] = None
    start_date: Optional[date] = None
    end_date: Optional[date] = None

    def to_dict(self) -> dict:
        def _fields(obj):
            if obj is None:
                return None
            return {k: getattr(obj, k) for k in obj.__dataclass_fields__}

        return {
            "start_date": self.start_date.isoformat() if self.start_date else None,
            "end_date": self.end_date.isoformat() if self.end_date else None,
            "bounds": _fields(self.bounds),
            "regression": _fields(self.regression),
            "avg_return": self.avg_return,
            "market_return": self.market_return,
            "instability_price": self.instability_price,
            "signal": self.signal.value,
            "reason": self.reason,
            "diagnostics": list(self.diagnostics),
            "gap": self.gap,
        }


def fit_volume_regression(points: Sequence[PricePoint]) -> VolumeRegression:
    """Least-squares line of volume on price, from population moments."""
    n = len(points)
    if n < 2:
        raise TooFewPoints(f"need at least 2 points, got {n}")
    p = np.array([pt.price for pt in points], dtype=float)
    v = np.array([pt.volume for pt in points], dtype=float)
    mp, mv = p.mean(), v.mean()
    dp, dv = p - mp, v - mv
    sd_p = math.sqrt(np.mean(dp * dp))
    sd_v = math.sqrt(np.mean(dv * dv))
    if sd_p == 0.0:
        raise ZeroPriceVariance("all prices are equal")
    if sd_v == 0.0:
        r = 0.0
    else:
        r = float(np.mean(dp * dv)) / (sd_p * sd_v)
        r = min(1.0, max(-1.0, r))
    a = r * sd_v / sd_p
    b = mv - a * mp
    return VolumeRegression(a, float(b), r, float(mp), float(mv), sd_p, sd_v, n)


def bin_by_price(points: Sequence[PricePoint], bins: int) -> list[PricePoint]:
    """Aggregate points into equal-width price bins.

    Each non-empty bin becomes one point at the bin midpoint carrying the
    summed volume of its members.
    """
    prices = np.array([pt.price for pt in points], dtype=float)
    lo, hi = prices.min(), prices.max()
    if lo == hi:
        return [PricePoint(float(lo), float(sum(pt.volume for pt in points)))]
    width = (hi - lo) / bins
    idx = np.minimum(((prices - lo) / width).astype(int), bins - 1)
    totals = np.zeros(bins)
    np.add.at(totals, idx, [pt.volume for pt in points])
    occupied = np.zeros(bins, dtype=bool)
    occupied[idx] = True
    return [
        PricePoint(float(lo + (k + 0.5) * width), float(totals[k]))
        for k in range(bins)
        if occupied[k]
    ]


def market_return(bounds: WindowBounds) -> float:
    return bounds.px / bounds.p0


def purchase_return(entry_price: float, current_price: float) -> float:
    return current_price / entry_price


def _denominator_scale(a, b, p0, px):
    return (abs(a) * px + abs(b)) * (px - p0)


def average_return_quadrature(reg: VolumeRegression, bounds: WindowBounds, steps: int) -> float:
    """Trapezoid-rule ratio of the return-weighted and plain volume integrals."""
    if steps < 2:
        raise ValueError(f"steps must be >= 2, got {steps}")
    p0, px = bounds.p0, bounds.px
    if not px > p0:
        raise ValueError("quadrature needs px > p0")
    p = np.linspace(p0, px, steps + 1)
    h = (px - p0) / steps
    vol = p * reg.slope_a
    vol += reg.intercept_b
    # uniform-grid trapezoid: h * (sum - half the endpoints)
    denom = h * (vol.sum() - 0.5 * (vol[0] + vol[-1]))
    scale = _denominator_scale(reg.slope_a, reg.intercept_b, p0, px)
    if not denom > DENOMINATOR_RTOL * scale:
        raise DegenerateDenominator(f"modeled volume integral is {denom!r}")
    vol /= p
    vol *= px
    num = h * (vol.sum() - 0.5 * (vol[0] + vol[-1]))
    return float(num / denom)


def average_return_closed_form(reg: VolumeRegression, bounds: WindowBounds) -> float:
    """Closed-form average investor return in 1+R format.

    Evaluated with ``px - p0`` factored out of both integrals so that the
    ratio stays accurate as ``px`` approaches ``p0``.
    """
    a, b = reg.slope_a, reg.intercept_b
    p0, px = bounds.p0, bounds.px
    d = px - p0
    if d == 0.0:
        raise ValueError("closed form needs px > p0")
    log_ratio = math.log1p(d / p0)
    num = px * (a * d + b * log_ratio)
    den = d * (0.5 * a * (px + p0) + b)
    if not den > DENOMINATOR_RTOL * _denominator_scale(a, b, p0, px):
        raise DegenerateDenominator(f"modeled volume integral is {den!r}")
    return num / den


def _return_gap(a, b, p0, p):
    """``p/p0 - E(R)(p)``; vectorised over ``p``; nan where undefined."""
    d = p - p0
    num = p * (a * d + b * np.log1p(d / p0))
    den = d * (0.5 * a * (p + p0) + b)
    with np.errstate(divide="ignore", invalid="ignore"):
        return p / p0 - num / den


def _scan_range(a, b, p0, px, search):
    lower = p0 * (1.0 + search.epsilon_rel)
    upper = search.cap_multiple * px
    # total modeled volume over [p0, p] is (p - p0) * (a*(p + p0)/2 + b)
    if a != 0.0:
        crossing = -2.0 * b / a - p0
        if a < 0:
            upper = min(upper, crossing * (1.0 - search.epsilon_rel))
        else:
            lower = max(lower, crossing * (1.0 + search.epsilon_rel))
    elif b <= 0:
        raise DegenerateDenominator("regression line is non-positive everywhere")
    if not lower < upper:
        raise DegenerateDenominator("no price range with positive modeled volume")
    return lower, upper


def solve_instability_price(
    reg: VolumeRegression, bounds: WindowBounds, search: SearchConfig = SearchConfig()
) -> Optional[float]:
    """Smallest nontrivial price where market return equals average return.

    Scans a logarithmic grid above ``p0`` for the first sign change of the
    return gap, then bisects that bracket. Returns ``None`` when the gap
    never changes sign inside the admissible range.
    """
    search.check()
    a, b, p0 = reg.slope_a, reg.intercept_b, bounds.p0
    lower, upper = _scan_range(a, b, p0, bounds.px, search)
    grid = np.geomspace(lower, upper, search.grid_points)
    f = _return_gap(a, b, p0, grid)
    finite = np.isfinite(f)
    grid, f = grid[finite], f[finite]
    if f.size == 0:
        return None
    exact = np.flatnonzero(f == 0.0)
    change = np.flatnonzero(np.sign(f[:-1]) * np.sign(f[1:]) < 0)
    first_exact = exact[0] if exact.size else None
    first_change = change[0] if change.size else None
    if first_exact is not None and (first_change is None or first_exact <= first_change):
        return float(grid[first_exact])
    if first_change is None:
        return None

    lo, hi = float(grid[first_change]), float(grid[first_change + 1])
    f_lo = float(f[first_change])
    mid = 0.5 * (lo + hi)
    for _ in range(search.max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = float(_return_gap(a, b, p0, mid))
        if f_mid == 0.0 or mid <= lo or mid >= hi:
            break
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return mid


def _invalid(reason: str, start, end, **kw) -> WindowAssessment:
    diags = tuple(sorted({reason, *kw.pop("diagnostics", ())}))
    return WindowAssessment(
        signal=Signal.INVALID, reason=reason, diagnostics=diags,
        start_date=start, end_date=end, **kw,
    )


def assess_window(points: Sequence[PricePoint], config: ModelConfig = ModelConfig()) -> WindowAssessment:
    """Run the full model on one window of consecutive daily rows.

    Degenerate windows come back with signal ``Invalid`` and a reason flag
    instead of raising, so a rolling scan never stops midway.
    """
    start = points[0].date if points else None
    end = points[-1].date if points else None
    if len(points) < max(2, config.min_points):
        return _invalid(TOO_FEW_POINTS, start, end)
    prices = [pt.price for pt in points]
    if min(prices) == max(prices):
        return _invalid(FLAT_WINDOW, start, end)

    p0 = min(prices) if config.p0_rule == "min" else prices[0]
    px = prices[-1]
    if px < p0:
        return _invalid(PRICE_BELOW_BASE, start, end)
    bounds = WindowBounds(p0, px)

    sample = bin_by_price(points, config.price_bins) if config.price_bins else points
    try:
        reg = fit_volume_regression(sample)
    except TooFewPoints:
        return _invalid(TOO_FEW_POINTS, start, end, bounds=bounds)
    except ZeroPriceVariance:
        return _invalid(ZERO_PRICE_VARIANCE, start, end, bounds=bounds)

    diags = set()
    if min(reg.volume_at(p0), reg.volume_at(px)) < 0:
        diags.add(NEGATIVE_VOLUME_IN_RANGE)
    m_r = market_return(bounds)
    try:
        # a window ending on its own low has no spread of entry prices
        e_r = 1.0 if px == p0 else average_return_closed_form(reg, bounds)
        p_alpha = solve_instability_price(reg, bounds, config.search)
    except DegenerateDenominator:
        return _invalid(
            DEGENERATE_DENOMINATOR, start, end,
            bounds=bounds, regression=reg, market_return=m_r, diagnostics=diags,
        )

    if p_alpha is None:
        diags.add(NO_ROOT)
        signal = Signal.UP
    else:
        signal = Signal.DOWN if px >= p_alpha else Signal.UP
    return WindowAssessment(
        signal=signal,
        bounds=bounds,
        regression=reg,
        avg_return=e_r,
        market_return=m_r,
        instability_price=p_alpha,
        gap=m_r - e_r,
        diagnostics=tuple(sorted(diags)),
        start_date=start,
        end_date=end,
    )
