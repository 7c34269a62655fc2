"""Minimal deterministic SVG writer: fixed viewport, 3-decimal coordinates."""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape, quoteattr

WIDTH = 1000
HEIGHT = 600
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def num(v: float) -> str:
    s = f"{v:.3f}"
    return "0.000" if s == "-0.000" else s


class Canvas:
    def __init__(self, title: str = ""):
        self.parts: list[str] = []
        if title:
            self.text(WIDTH / 2, 24, title, anchor="middle", size=18)

    def _attrs(self, attrs: dict) -> str:
        return "".join(f" {k.replace('_', '-')}={quoteattr(str(v))}" for k, v in attrs.items() if v is not None)

    def element(self, tag: str, **attrs):
        self.parts.append(f"<{tag}{self._attrs(attrs)}/>")

    def line(self, x1, y1, x2, y2, **attrs):
        self.element("line", x1=num(x1), y1=num(y1), x2=num(x2), y2=num(y2), **attrs)

    def circle(self, x, y, r=2.5, **attrs):
        self.element("circle", cx=num(x), cy=num(y), r=num(r), **attrs)

    def rect(self, x, y, w, h, **attrs):
        self.element("rect", x=num(x), y=num(y), width=num(w), height=num(h), **attrs)

    def polyline(self, points, **attrs):
        pts = " ".join(f"{num(x)},{num(y)}" for x, y in points)
        self.element("polyline", points=pts, fill="none", **attrs)

    def polygon(self, points, **attrs):
        pts = " ".join(f"{num(x)},{num(y)}" for x, y in points)
        self.element("polygon", points=pts, **attrs)

    def text(self, x, y, content, *, anchor="start", size=12, rotate=None, **attrs):
        transform = f"rotate({num(rotate)} {num(x)} {num(y)})" if rotate is not None else None
        self.parts.append(
            f"<text{self._attrs(dict(x=num(x), y=num(y), font_size=size, text_anchor=anchor, transform=transform, **attrs))}>"
            f"{escape(str(content))}</text>")

    def to_string(self) -> str:
        body = "\n".join(self.parts)
        return (f'<?xml version="1.0" encoding="UTF-8"?>\n'
                f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
                f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">\n'
                f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>\n'
                f"{body}\n</svg>\n")

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_string())
        return path


class Axes:
    """Linear data-to-pixel mapping over a plot rectangle."""

    def __init__(self, canvas: Canvas, left, top, width, height, xlim, ylim):
        self.c = canvas
        self.left, self.top, self.width, self.height = left, top, width, height
        self.xlim = xlim if xlim[1] > xlim[0] else (xlim[0] - 1, xlim[0] + 1)
        self.ylim = ylim if ylim[1] > ylim[0] else (ylim[0] - 1, ylim[0] + 1)

    def x(self, v):
        x0, x1 = self.xlim
        return self.left + (v - x0) / (x1 - x0) * self.width

    def y(self, v):
        y0, y1 = self.ylim
        return self.top + self.height - (v - y0) / (y1 - y0) * self.height

    def frame(self, xlabel, ylabel, xticks, yticks):
        c = self.c
        c.rect(self.left, self.top, self.width, self.height, fill="none", stroke="black")
        bottom = self.top + self.height
        for value, label in xticks:
            px = self.x(value)
            c.line(px, bottom, px, bottom + 5, stroke="black")
            c.text(px, bottom + 20, label, anchor="middle", size=11)
        for value, label in yticks:
            py = self.y(value)
            c.line(self.left - 5, py, self.left, py, stroke="black")
            c.text(self.left - 8, py + 4, label, anchor="end", size=11)
        c.text(self.left + self.width / 2, bottom + 45, xlabel, anchor="middle", size=13)
        c.text(self.left - 50, self.top + self.height / 2, ylabel, anchor="middle", size=13, rotate=-90)


def nice_ticks(lo: float, hi: float, count: int = 6) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=raw)
    start = -(-lo // step) * step
    ticks = []
    v = start
    while v <= hi + 1e-9:
        ticks.append(round(v, 10))
        v += step
    return ticks
