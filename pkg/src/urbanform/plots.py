"""Small deterministic SVG emitters (no plotting dependency, no
timestamps, fixed float formatting) for the pipeline's figure outputs.
"""

from __future__ import annotations

import math

import numpy as np

WIDTH = 640
HEIGHT = 420
MARGIN = 56

PALETTE = (
    "#4c78a8", "#f58518", "#54a24b", "#e45756",
    "#72b7b2", "#eeca3b", "#b279a2", "#9d755d",
)


def _f(v: float) -> str:
    return f"{v:.2f}"


def _header(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH/2:.0f}" y="24" text-anchor="middle" font-size="15">{title}</text>',
    ]


def _write(path, parts: list[str]) -> None:
    with open(path, "w") as fh:
        fh.write("\n".join(parts + ["</svg>"]))
        fh.write("\n")


def bar_chart(path, labels: list[str], values, title: str) -> None:
    values = np.asarray(values, dtype=float)
    vmax = float(values.max()) if len(values) else 1.0
    vmax = vmax if vmax > 0 else 1.0
    inner_w = WIDTH - 2 * MARGIN
    inner_h = HEIGHT - 2 * MARGIN
    step = inner_w / max(1, len(values))
    parts = _header(title)
    for i, (label, v) in enumerate(zip(labels, values)):
        h = inner_h * v / vmax
        x = MARGIN + i * step
        y = HEIGHT - MARGIN - h
        parts.append(
            f'<rect x="{_f(x + step * 0.125)}" y="{_f(y)}" width="{_f(step * 0.75)}" '
            f'height="{_f(h)}" fill="{PALETTE[0]}"/>'
        )
        parts.append(
            f'<text x="{_f(x + step / 2)}" y="{HEIGHT - MARGIN + 12}" text-anchor="end" '
            f'font-size="9" transform="rotate(-60 {_f(x + step / 2)} {HEIGHT - MARGIN + 12})">{label}</text>'
        )
    parts.append(
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" '
        f'y2="{HEIGHT - MARGIN}" stroke="black"/>'
    )
    _write(path, parts)


def _scale(points: np.ndarray):
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    span = np.where(hi - lo <= 0, 1.0, hi - lo)

    def to_px(p):
        x = MARGIN + (p[0] - lo[0]) / span[0] * (WIDTH - 2 * MARGIN)
        y = HEIGHT - MARGIN - (p[1] - lo[1]) / span[1] * (HEIGHT - 2 * MARGIN)
        return x, y

    return to_px


def scatter(path, points, groups, title: str) -> None:
    """2-D scatter colored by integer group (cluster / type id)."""
    points = np.asarray(points, dtype=float)
    parts = _header(title)
    if len(points):
        to_px = _scale(points)
        for p, g in zip(points, groups):
            x, y = to_px(p)
            color = PALETTE[int(g) % len(PALETTE)]
            parts.append(f'<circle cx="{_f(x)}" cy="{_f(y)}" r="3" fill="{color}"/>')
    _write(path, parts)


def regression_plot(path, series: dict[str, tuple], title: str) -> None:
    """Log-log scatter with fitted power-law curves.

    ``series`` maps a group name to (x, y, log_a, b).
    """
    parts = _header(title)
    all_pts = []
    for x, y, _, _ in series.values():
        all_pts.extend(zip(np.log10(x), np.log10(y)))
    if all_pts:
        pts = np.asarray(all_pts)
        to_px = _scale(pts)
        for k, (name, (x, y, log_a, b)) in enumerate(sorted(series.items())):
            color = PALETTE[k % len(PALETTE)]
            for xi, yi in zip(np.log10(x), np.log10(y)):
                px, py = to_px((xi, yi))
                parts.append(
                    f'<circle cx="{_f(px)}" cy="{_f(py)}" r="2" fill="{color}" fill-opacity="0.45"/>'
                )
            xs = np.linspace(min(np.log10(x)), max(np.log10(x)), 50)
            ys = (log_a + b * xs * math.log(10.0)) / math.log(10.0)
            pieces = []
            for xi, yi in zip(xs, ys):
                px, py = to_px((xi, yi))
                pieces.append(f"{_f(px)},{_f(py)}")
            parts.append(
                f'<polyline points="{" ".join(pieces)}" fill="none" stroke="{color}" stroke-width="2"/>'
            )
            parts.append(
                f'<text x="{WIDTH - MARGIN}" y="{40 + 16 * k}" text-anchor="end" '
                f'font-size="11" fill="{color}">{name} (b={b:.3f})</text>'
            )
    _write(path, parts)
