"""Minimal self-contained SVG line charts; no plotting dependency.

Good enough for convergence curves: axes, ticks, a handful of colored
polylines, and a legend.  Output is deterministic text so chart files can be
compared byte for byte across reruns.
"""

from __future__ import annotations

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

_MARGIN_LEFT = 62
_MARGIN_RIGHT = 18
_MARGIN_TOP = 34
_MARGIN_BOTTOM = 46


def _fmt(value: float) -> str:
    text = f"{value:.6g}"
    return "0" if text == "-0" else text


def _ticks(low: float, high: float, count: int = 5) -> list[float]:
    if high <= low:
        high = low + 1.0
    step = (high - low) / (count - 1)
    return [low + i * step for i in range(count)]


def write_line_chart(
    path: str,
    series: list[tuple[str, list[float], list[float]]],
    *,
    title: str = "",
    x_label: str = "",
    y_label: str = "",
    width: int = 720,
    height: int = 440,
    y_range: tuple[float, float] | None = None,
) -> None:
    """Write one chart; series is a list of (label, xs, ys) triples."""
    if not series:
        raise ValueError("nothing to chart")
    for label, xs, ys in series:
        if len(xs) != len(ys) or not xs:
            raise ValueError(f"series {label!r} needs matching non-empty x and y")
    x_low = min(min(xs) for _, xs, _ in series)
    x_high = max(max(xs) for _, xs, _ in series)
    if y_range is None:
        y_low = min(min(ys) for _, _, ys in series)
        y_high = max(max(ys) for _, _, ys in series)
        pad = 0.05 * (y_high - y_low or 1.0)
        y_low, y_high = y_low - pad, y_high + pad
    else:
        y_low, y_high = y_range
    if x_high <= x_low:
        x_high = x_low + 1.0
    if y_high <= y_low:
        y_high = y_low + 1.0

    plot_w = width - _MARGIN_LEFT - _MARGIN_RIGHT
    plot_h = height - _MARGIN_TOP - _MARGIN_BOTTOM

    def sx(x: float) -> float:
        return _MARGIN_LEFT + (x - x_low) / (x_high - x_low) * plot_w

    def sy(y: float) -> float:
        return _MARGIN_TOP + (1.0 - (y - y_low) / (y_high - y_low)) * plot_h

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}"'
        f' viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        lines.append(
            f'<text x="{width / 2:.1f}" y="20" text-anchor="middle"'
            f' font-family="sans-serif" font-size="14" font-weight="bold">{title}</text>'
        )
    # gridlines and tick labels
    for y in _ticks(y_low, y_high):
        py = sy(y)
        lines.append(
            f'<line x1="{_MARGIN_LEFT}" y1="{py:.1f}" x2="{width - _MARGIN_RIGHT}"'
            f' y2="{py:.1f}" stroke="#dddddd" stroke-width="1"/>'
        )
        lines.append(
            f'<text x="{_MARGIN_LEFT - 8}" y="{py + 4:.1f}" text-anchor="end"'
            f' font-family="sans-serif" font-size="11">{_fmt(y)}</text>'
        )
    for x in _ticks(x_low, x_high):
        px = sx(x)
        lines.append(
            f'<line x1="{px:.1f}" y1="{_MARGIN_TOP}" x2="{px:.1f}"'
            f' y2="{height - _MARGIN_BOTTOM}" stroke="#eeeeee" stroke-width="1"/>'
        )
        lines.append(
            f'<text x="{px:.1f}" y="{height - _MARGIN_BOTTOM + 16}" text-anchor="middle"'
            f' font-family="sans-serif" font-size="11">{_fmt(x)}</text>'
        )
    # axes
    lines.append(
        f'<line x1="{_MARGIN_LEFT}" y1="{_MARGIN_TOP}" x2="{_MARGIN_LEFT}"'
        f' y2="{height - _MARGIN_BOTTOM}" stroke="black" stroke-width="1.5"/>'
    )
    lines.append(
        f'<line x1="{_MARGIN_LEFT}" y1="{height - _MARGIN_BOTTOM}"'
        f' x2="{width - _MARGIN_RIGHT}" y2="{height - _MARGIN_BOTTOM}"'
        f' stroke="black" stroke-width="1.5"/>'
    )
    if x_label:
        lines.append(
            f'<text x="{(_MARGIN_LEFT + width - _MARGIN_RIGHT) / 2:.1f}"'
            f' y="{height - 10}" text-anchor="middle" font-family="sans-serif"'
            f' font-size="12">{x_label}</text>'
        )
    if y_label:
        cy = (_MARGIN_TOP + height - _MARGIN_BOTTOM) / 2
        lines.append(
            f'<text x="16" y="{cy:.1f}" text-anchor="middle" font-family="sans-serif"'
            f' font-size="12" transform="rotate(-90 16 {cy:.1f})">{y_label}</text>'
        )
    # data
    for i, (label, xs, ys) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        points = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
        lines.append(
            f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="1.6"/>'
        )
        ly = _MARGIN_TOP + 14 + 16 * i
        lx = width - _MARGIN_RIGHT - 150
        lines.append(
            f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}"'
            f' stroke="{color}" stroke-width="2"/>'
        )
        lines.append(
            f'<text x="{lx + 28}" y="{ly}" font-family="sans-serif"'
            f' font-size="11">{label}</text>'
        )
    lines.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
