"""Static SVG figures: tree supports (d <= 2) and ratio-versus-N charts."""
from __future__ import annotations

import math
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .weight import WeightTree

__all__ = ["tree_svg", "ratio_chart_svg", "PlotError"]

_PALETTE = ["#1b6ca8", "#d1495b", "#edae49", "#00798c", "#66a182", "#8d6a9f", "#2e4057"]


class PlotError(ValueError):
    pass


def _svg(width: int, height: int, body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">')
    return "\n".join([head, '<rect x="0" y="0" width="100%" height="100%" fill="white"/>', *body, "</svg>\n"])


def _f(v: float) -> str:
    return f"{v:.6g}"


def tree_svg(tree: WeightTree, size: int = 600) -> str:
    """Support blocks (J-cubes and leaf blocks), chosen vertices and cone axes.

    One ``<rect>`` per merged support block.  In d=1 the unit interval is
    drawn as a strip.
    """
    d = tree.d
    if d > 2:
        raise PlotError("support plots exist for d <= 2 only")
    pad = 20
    S = size - 2 * pad
    body = []
    strip = 60
    height = size if d == 2 else strip + 2 * pad
    body.append(f'<rect class="frame" x="{pad}" y="{pad}" width="{S}" height="{S if d == 2 else strip}" '
                'fill="none" stroke="#999" stroke-width="0.5"/>')
    for b in tree.support_blocks(merged=True):
        h = 3.0 ** (-b["level"])
        kind = escape(b["kind"])
        color = "#d1495b" if b["kind"] == "J" else "#bbbbbb"
        for row in np.asarray(b["coords"]):
            x = pad + S * row[0] * h
            if d == 2:
                # y axis points up
                y = pad + S * (1 - (row[1] + 1) * h)
                wh = S * h
                body.append(f'<rect class="{kind}" data-k="{b["k"]}" x="{_f(x)}" y="{_f(y)}" width="{_f(wh)}" '
                            f'height="{_f(wh)}" fill="{color}" stroke="none"/>')
            else:
                body.append(f'<rect class="{kind}" data-k="{b["k"]}" x="{_f(x)}" y="{pad}" width="{_f(S * h)}" '
                            f'height="{strip}" fill="{color}" stroke="none"/>')
    # vertices and cone axes of generations 0 and 1
    for k in range(min(tree.K, 1) + 1):
        for node in tree.nodes(k):
            v = [float(c) for c in node.vertex]
            vx = pad + S * v[0]
            vy = pad + S * (1 - v[1]) if d == 2 else pad + strip / 2
            body.append(f'<circle class="vertex" cx="{_f(vx)}" cy="{_f(vy)}" r="2" fill="#2e4057"/>')
            if d == 2:
                ax = tree.cones.child_axis(node.branch)
                L = S * float(node.hat.side) * 0.5
                body.append(f'<line class="cone-axis" x1="{_f(vx)}" y1="{_f(vy)}" x2="{_f(vx + L * ax[0])}" '
                            f'y2="{_f(vy - L * ax[1])}" stroke="#2e4057" stroke-width="0.7"/>')
    return _svg(size, height, body)


def ratio_chart_svg(series: Mapping[str, Sequence[tuple[float, float]]], title: str = "",
                    xlabel: str = "N", ylabel: str = "ratio", width: int = 640, height: int = 420) -> str:
    """Line chart with one ``<polyline>`` per named series of ``(x, y)`` points.

    An empty mapping gives a valid chart with axes only.
    """
    pad_l, pad_r, pad_t, pad_b = 60, 20, 30, 45
    W, H = width - pad_l - pad_r, height - pad_t - pad_b
    pts = [p for s in series.values() for p in s if all(map(math.isfinite, p))]
    if pts:
        xs, ys = [p[0] for p in pts], [p[1] for p in pts]
        x0, x1 = min(xs), max(xs)
        y0, y1 = min(0.0, min(ys)), max(ys)
    else:
        x0, x1, y0, y1 = 0.0, 1.0, 0.0, 1.0
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y1 = y0 + 1

    def X(v):
        return pad_l + W * (v - x0) / (x1 - x0)

    def Y(v):
        return pad_t + H * (1 - (v - y0) / (y1 - y0))

    body = [
        f'<line class="axis" x1="{pad_l}" y1="{pad_t + H}" x2="{pad_l + W}" y2="{pad_t + H}" stroke="black"/>',
        f'<line class="axis" x1="{pad_l}" y1="{pad_t}" x2="{pad_l}" y2="{pad_t + H}" stroke="black"/>',
        f'<text x="{pad_l + W / 2}" y="{height - 10}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="15" y="{pad_t + H / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 15 {pad_t + H / 2})">{escape(ylabel)}</text>',
    ]
    if title:
        body.append(f'<text x="{pad_l + W / 2}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>')
    for t in np.linspace(y0, y1, 5):
        body.append(f'<text x="{pad_l - 5}" y="{_f(Y(t) + 4)}" text-anchor="end" font-size="10">{t:.3g}</text>')
    for t in sorted({p[0] for p in pts}):
        body.append(f'<text x="{_f(X(t))}" y="{pad_t + H + 15}" text-anchor="middle" font-size="10">{t:g}</text>')
    for i, (name, s) in enumerate(series.items()):
        good = sorted(p for p in s if all(map(math.isfinite, p)))
        color = _PALETTE[i % len(_PALETTE)]
        coords = " ".join(f"{_f(X(x))},{_f(Y(y))}" for x, y in good)
        body.append(f'<polyline class="series" data-name="{escape(str(name))}" points="{coords}" fill="none" '
                    f'stroke="{color}" stroke-width="1.5"/>')
        if good:
            x, y = good[-1]
            body.append(f'<text x="{_f(X(x) - 4)}" y="{_f(Y(y) - 6)}" text-anchor="end" font-size="10" '
                        f'fill="{color}">{escape(str(name))}</text>')
    return _svg(width, height, body)
