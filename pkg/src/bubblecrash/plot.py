"""SVG overlay chart: price in black, signal direction in blue.

Up windows draw the blue line above the price, Down windows below it,
offset by a fixed fraction of the price range. Invalid windows are left
blank. Geometry is pinned so tests can read coordinates back.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from typing import Optional, Sequence
from xml.sax.saxutils import escape

WIDTH = 1600
HEIGHT = 600
MARGIN = 40
OFFSET_FRACTION = 0.02
PRICE_COLOR = "#000000"
SIGNAL_COLOR = "#0000ff"


def _fmt(x: float) -> str:
    return f"{x:.3f}"


def render_overlay(
    prices: Sequence[float],
    signals: Sequence[Optional[str]],
    title: str = "",
) -> str:
    """``signals[i]`` is ``"Up"``, ``"Down"`` or ``None``/``"Invalid"`` for row ``i``."""
    n = len(prices)
    if len(signals) != n:
        raise ValueError("signals must align with prices")
    lo, hi = (min(prices), max(prices)) if n else (0.0, 1.0)
    span = hi - lo if hi > lo else max(abs(hi), 1.0)
    offset = OFFSET_FRACTION * span
    y_lo, y_hi = lo - 2 * offset, hi + 2 * offset
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 1, y_hi + 1

    def x_at(i):
        if n == 1:
            return WIDTH / 2
        return MARGIN + i * (WIDTH - 2 * MARGIN) / (n - 1)

    def y_at(p):
        return HEIGHT - MARGIN - (p - y_lo) * (HEIGHT - 2 * MARGIN) / (y_hi - y_lo)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" y2="{HEIGHT - MARGIN}" stroke="#888888"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="#888888"/>',
    ]
    if title:
        parts.append(f'<text x="{WIDTH / 2}" y="{MARGIN / 2}" text-anchor="middle">{escape(title)}</text>')
    if n:
        parts.append(f'<text x="{MARGIN + 4}" y="{_fmt(y_at(hi))}" font-size="12">{hi:.6g}</text>')
        parts.append(f'<text x="{MARGIN + 4}" y="{_fmt(y_at(lo))}" font-size="12">{lo:.6g}</text>')
        pts = " ".join(f"{_fmt(x_at(i))},{_fmt(y_at(p))}" for i, p in enumerate(prices))
        parts.append(
            f'<polyline class="price" points="{pts}" fill="none" stroke="{PRICE_COLOR}" stroke-width="1.5"/>'
        )

    # one blue polyline per run of equal Up/Down signals
    i = 0
    while i < n:
        sig = signals[i]
        if sig not in ("Up", "Down"):
            i += 1
            continue
        j = i
        while j + 1 < n and signals[j + 1] == sig:
            j += 1
        shift = offset if sig == "Up" else -offset
        pts = " ".join(f"{_fmt(x_at(k))},{_fmt(y_at(prices[k] + shift))}" for k in range(i, j + 1))
        parts.append(
            f'<polyline class="signal {sig.lower()}" points="{pts}" fill="none" '
            f'stroke="{SIGNAL_COLOR}" stroke-width="1.5"/>'
        )
        i = j + 1

    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def parse_polylines(svg: str) -> list[tuple[str, str, list[tuple[float, float]]]]:
    """Read back ``(class, stroke, points)`` for every polyline in an emitted chart."""
    root = ET.fromstring(svg)
    out = []
    for el in root.iter("{http://www.w3.org/2000/svg}polyline"):
        pts = [tuple(float(c) for c in pair.split(",")) for pair in el.get("points", "").split()]
        out.append((el.get("class", ""), el.get("stroke", ""), pts))
    return out
