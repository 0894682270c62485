"""Minimal static SVG 1.1 log-log line plots; enough for width-versus-error figures."""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 480
LEFT, RIGHT, TOP, BOTTOM = 80, 20, 40, 60

DASHES = {"solid": None, "dashed": "8,5", "dotdash": "8,4,2,4", "dotted": "2,4"}


@dataclass
class Series:
    x: list
    y: list
    label: str
    color: str = "black"
    line: str | None = "solid"
    marker: bool = False


def _positive_pairs(xs, ys):
    return [(float(x), float(y)) for x, y in zip(xs, ys) if x > 0 and y > 0 and math.isfinite(x) and math.isfinite(y)]


def _decades(lo, hi):
    a, b = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
    if a == b:
        b += 1
    return a, b


def _fmt(x):
    return f"{x:.2f}"


def loglog_svg(series, title="", xlabel="", ylabel=""):
    """Render ``series`` on shared log-log axes; returns the SVG document text."""
    pts = [p for s in series for p in _positive_pairs(s.x, s.y)]
    if not pts:
        raise ValueError("nothing positive and finite to plot")
    xa, xb = _decades(min(p[0] for p in pts), max(p[0] for p in pts))
    ya, yb = _decades(min(p[1] for p in pts), max(p[1] for p in pts))
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(x):
        return LEFT + (math.log10(x) - xa) / (xb - xa) * pw

    def sy(y):
        return TOP + ph - (math.log10(y) - ya) / (yb - ya) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for k in range(xa, xb + 1):
        x = sx(10.0**k)
        out.append(f'<line x1="{_fmt(x)}" y1="{TOP}" x2="{_fmt(x)}" y2="{TOP + ph}" stroke="#ddd"/>')
        out.append(f'<text x="{_fmt(x)}" y="{TOP + ph + 18}" text-anchor="middle">1e{k}</text>')
    for k in range(ya, yb + 1):
        y = sy(10.0**k)
        out.append(f'<line x1="{LEFT}" y1="{_fmt(y)}" x2="{LEFT + pw}" y2="{_fmt(y)}" stroke="#ddd"/>')
        out.append(f'<text x="{LEFT - 6}" y="{_fmt(y + 4)}" text-anchor="end">1e{k}</text>')
    if title:
        out.append(f'<text x="{WIDTH / 2}" y="{TOP - 14}" text-anchor="middle" font-size="14">{escape(title)}</text>')
    if xlabel:
        out.append(f'<text x="{LEFT + pw / 2}" y="{HEIGHT - 16}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(
            f'<text x="18" y="{TOP + ph / 2}" text-anchor="middle" '
            f'transform="rotate(-90 18 {TOP + ph / 2})">{escape(ylabel)}</text>'
        )

    out.append(f'<clipPath id="plot"><rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}"/></clipPath>')
    for s in series:
        pairs = _positive_pairs(s.x, s.y)
        if not pairs:
            continue
        if s.line:
            path = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in pairs)
            dash = DASHES[s.line]
            dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
            out.append(
                f'<polyline points="{path}" fill="none" stroke="{s.color}" stroke-width="1.5"'
                f'{dash_attr} clip-path="url(#plot)"/>'
            )
        if s.marker:
            for x, y in pairs:
                out.append(f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="3" fill="{s.color}"/>')

    ly = TOP + 14
    for s in series:
        lx = LEFT + 12
        if s.line:
            dash = DASHES[s.line]
            dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
            out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 28}" y2="{ly - 4}" stroke="{s.color}" '
                       f'stroke-width="1.5"{dash_attr}/>')
        if s.marker:
            out.append(f'<circle cx="{lx + 14}" cy="{ly - 4}" r="3" fill="{s.color}"/>')
        out.append(f'<text x="{lx + 36}" y="{ly}">{escape(s.label)}</text>')
        ly += 16
    out.append("</svg>")
    return "\n".join(out) + "\n"
