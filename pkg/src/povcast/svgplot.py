"""Tiny dependency-free SVG chart writer for the report commands."""

from __future__ import annotations

from pathlib import Path

import numpy as np


class SvgCanvas:
    def __init__(self, width: int, height: int):
        self.width = width
        self.height = height
        self.parts: list[str] = []

    def line(self, x1, y1, x2, y2, stroke="black", width=1.0, dash=None):
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
            f'stroke="{stroke}" stroke-width="{width}"{extra}/>'
        )

    def rect(self, x, y, w, h, fill="steelblue"):
        self.parts.append(
            f'<rect x="{x:.2f}" y="{y:.2f}" width="{w:.2f}" height="{h:.2f}" fill="{fill}"/>'
        )

    def circle(self, cx, cy, r, fill="black"):
        self.parts.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="{r:.2f}" fill="{fill}"/>')

    def text(self, x, y, content, size=10, anchor="start", rotate=None):
        transform = f' transform="rotate({rotate} {x:.2f} {y:.2f})"' if rotate is not None else ""
        safe = str(content).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
        self.parts.append(
            f'<text x="{x:.2f}" y="{y:.2f}" font-size="{size}" font-family="sans-serif" '
            f'text-anchor="{anchor}"{transform}>{safe}</text>'
        )

    def render(self) -> str:
        body = "\n".join(self.parts)
        return (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
            f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">\n'
            f'<rect width="{self.width}" height="{self.height}" fill="white"/>\n'
            f"{body}\n</svg>\n"
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.render(), encoding="utf-8")


def zero_probability_chart(names, p_next, p_next2, path, error_bar: float = 0.03) -> None:
    """Sorted point chart of per-entity zero probabilities for both horizons."""
    order = np.argsort(-np.asarray(p_next))
    n = len(names)
    width, height = max(60 + 30 * n, 400), 420
    left, top, bottom = 50, 20, 110
    plot_h = height - top - bottom
    svg = SvgCanvas(width, height)
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = top + plot_h * (1 - frac)
        svg.line(left, y, width - 20, y, stroke="#dddddd")
        svg.text(left - 6, y + 3, f"{frac:.2f}", anchor="end", size=9)
    for rank, i in enumerate(order):
        x = left + 20 + rank * 30
        for p, color in ((p_next2[i], "#4477cc"), (p_next[i], "black")):
            y = top + plot_h * (1 - p)
            svg.line(x, y - plot_h * error_bar, x, y + plot_h * error_bar, stroke=color)
            svg.circle(x, y, 3.5, fill=color)
        svg.text(x, height - bottom + 14, names[i], size=9, anchor="end", rotate=-60)
    svg.save(path)


def coverage_chart(alphas, actual, path, title="coverage") -> None:
    """Nominal-vs-actual coverage with the diagonal for reference."""
    size = 360
    margin = 50
    span = size - 2 * margin
    svg = SvgCanvas(size, size)
    svg.line(margin, size - margin, size - margin, margin, stroke="#999999", dash="4 3")
    for a, c in zip(alphas, actual):
        x = margin + span * a
        y = size - margin - span * c
        svg.circle(x, y, 4)
    for frac in (0.0, 0.5, 1.0):
        svg.text(margin + span * frac, size - margin + 16, f"{frac:.1f}", anchor="middle", size=9)
        svg.text(margin - 8, size - margin - span * frac + 3, f"{frac:.1f}", anchor="end", size=9)
    svg.text(size / 2, 18, title, anchor="middle", size=12)
    svg.text(size / 2, size - 12, "nominal", anchor="middle", size=10)
    svg.save(path)


def interval_chart(names, truths, interval50, interval80, path) -> None:
    """Backtest chart: credible intervals with the realized values as dots."""
    order = np.argsort([0.5 * (lo + hi) for lo, hi in interval50])
    n = len(names)
    width, height = max(60 + 46 * n, 360), 380
    left, top, bottom = 50, 20, 90
    plot_h = height - top - bottom
    top_val = max(max(hi for _, hi in interval80), max(truths), 1)

    def y_of(v):
        return top + plot_h * (1 - v / top_val)

    svg = SvgCanvas(width, height)
    for rank, i in enumerate(order):
        x = left + 25 + rank * 46
        lo8, hi8 = interval80[i]
        lo5, hi5 = interval50[i]
        svg.line(x, y_of(lo8), x, y_of(hi8), stroke="#4477cc", width=1.5, dash="5 3")
        svg.line(x, y_of(lo5), x, y_of(hi5), stroke="black", width=3)
        svg.circle(x, y_of(truths[i]), 4, fill="#cc3333")
        svg.text(x, height - bottom + 14, names[i], size=9, anchor="end", rotate=-60)
    for v in np.linspace(0, top_val, 5):
        svg.text(left - 6, y_of(v) + 3, f"{v:.0f}", anchor="end", size=9)
    svg.save(path)


def histogram_chart(values, path, title="", max_bar=None) -> None:
    """Bar chart of one entity's predictive histogram."""
    values = np.asarray(values)
    width, height = max(40 + 18 * values.size, 200), 240
    left, top, bottom = 40, 28, 30
    plot_h = height - top - bottom
    peak = max_bar or max(int(values.max()), 1)
    svg = SvgCanvas(width, height)
    for k, v in enumerate(values):
        h = plot_h * v / peak
        svg.rect(left + k * 18 + 2, top + plot_h - h, 14, h)
        if k % 2 == 0:
            svg.text(left + k * 18 + 9, height - bottom + 12, str(k), anchor="middle", size=8)
    svg.text(width / 2, 16, title, anchor="middle", size=11)
    svg.save(path)
