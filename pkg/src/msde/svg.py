"""Tiny self-contained SVG line plots.

Deterministic output (no timestamps, no randomness, repr-based number
formatting), so rerunning a command produces byte-identical files.  Only
what the command line needs: line series on linear or log axes, ticks,
a legend and axis labels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


class SvgError(ValueError):
    """Raised for unplottable input (empty series, log of nonpositive)."""


@dataclass
class Series:
    label: str
    x: list[float]
    y: list[float]


@dataclass
class LinePlot:
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    xscale: str = "linear"  # or "log"
    yscale: str = "linear"
    width: int = 640
    height: int = 420
    series: list[Series] = field(default_factory=list)

    def add(self, label: str, x, y) -> None:
        xs = [float(v) for v in x]
        ys = [float(v) for v in y]
        if len(xs) != len(ys):
            raise SvgError(f"series '{label}': x has {len(xs)} points, y has {len(ys)}")
        if not xs:
            raise SvgError(f"series '{label}' is empty")
        self.series.append(Series(label, xs, ys))

    def to_svg(self) -> str:
        return _render(self)

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(self.to_svg(), encoding="utf-8", newline="\n")
        return path


def _fmt(value: float) -> str:
    """Short coordinate text: two decimals is plenty at pixel scale."""
    text = f"{value:.2f}"
    return text.rstrip("0").rstrip(".") if "." in text else text


def _tick_label(value: float) -> str:
    if value == 0.0:
        return "0"
    if abs(value) >= 1e4 or abs(value) < 1e-3:
        return f"{value:.0e}".replace("e-0", "e-").replace("e+0", "e").replace("e+", "e")
    text = f"{value:.6g}"
    return text


def _nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(target, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        step = mult * mag
        if raw <= step:
            break
    first = math.ceil(lo / step) * step
    ticks = []
    v = first
    while v <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return ticks


def _log_ticks(lo: float, hi: float) -> list[float]:
    first = math.ceil(math.log10(lo) - 1e-9)
    last = math.floor(math.log10(hi) + 1e-9)
    return [10.0**k for k in range(first, last + 1)] or [lo, hi]


def _transform(scale: str, values, what: str) -> list[float]:
    if scale == "linear":
        return list(values)
    if scale != "log":
        raise SvgError(f"unknown {what} scale {scale!r}; use 'linear' or 'log'")
    out = []
    for v in values:
        if v <= 0.0:
            raise SvgError(f"log {what} axis cannot show the nonpositive value {v!r}")
        out.append(math.log10(v))
    return out


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _render(plot: LinePlot) -> str:
    if not plot.series:
        raise SvgError("nothing to plot: add at least one series")
    ml, mr, mt, mb = 62, 16, 34 if plot.title else 16, 46
    iw = plot.width - ml - mr
    ih = plot.height - mt - mb

    tx = [_transform(plot.xscale, s.x, "x") for s in plot.series]
    ty = [_transform(plot.yscale, s.y, "y") for s in plot.series]
    finite_x = [v for col in tx for v in col if math.isfinite(v)]
    finite_y = [v for col in ty for v in col if math.isfinite(v)]
    if not finite_x or not finite_y:
        raise SvgError("no finite points to plot")
    xlo, xhi = min(finite_x), max(finite_x)
    ylo, yhi = min(finite_y), max(finite_y)
    if xhi == xlo:
        xlo, xhi = xlo - 0.5, xhi + 0.5
    if yhi == ylo:
        ylo, yhi = ylo - 0.5, yhi + 0.5
    ypad = 0.05 * (yhi - ylo)
    ylo, yhi = ylo - ypad, yhi + ypad

    def px(v: float) -> float:
        return ml + (v - xlo) / (xhi - xlo) * iw

    def py(v: float) -> float:
        return mt + (yhi - v) / (yhi - ylo) * ih

    if plot.xscale == "log":
        xticks = [(math.log10(v), _tick_label(v)) for v in _log_ticks(10.0**xlo, 10.0**xhi)]
    else:
        xticks = [(v, _tick_label(v)) for v in _nice_ticks(xlo, xhi)]
    if plot.yscale == "log":
        yticks = [(math.log10(v), _tick_label(v)) for v in _log_ticks(10.0**ylo, 10.0**yhi)]
    else:
        yticks = [(v, _tick_label(v)) for v in _nice_ticks(ylo, yhi)]

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{plot.width}" '
        f'height="{plot.height}" viewBox="0 0 {plot.width} {plot.height}">',
        f'<rect width="{plot.width}" height="{plot.height}" fill="white"/>',
        f'<rect x="{ml}" y="{mt}" width="{iw}" height="{ih}" fill="none" '
        'stroke="#444" stroke-width="1"/>',
    ]
    font = 'font-family="Helvetica, Arial, sans-serif"'
    if plot.title:
        parts.append(
            f'<text x="{plot.width / 2:.0f}" y="21" text-anchor="middle" {font} '
            f'font-size="14">{_escape(plot.title)}</text>'
        )
    for v, label in xticks:
        if v < xlo - 1e-9 or v > xhi + 1e-9:
            continue
        X = px(v)
        parts.append(
            f'<line x1="{_fmt(X)}" y1="{mt}" x2="{_fmt(X)}" y2="{mt + ih}" '
            'stroke="#ddd" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_fmt(X)}" y="{mt + ih + 16}" text-anchor="middle" {font} '
            f'font-size="11">{_escape(label)}</text>'
        )
    for v, label in yticks:
        if v < ylo - 1e-9 or v > yhi + 1e-9:
            continue
        Y = py(v)
        parts.append(
            f'<line x1="{ml}" y1="{_fmt(Y)}" x2="{ml + iw}" y2="{_fmt(Y)}" '
            'stroke="#ddd" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{ml - 6}" y="{_fmt(Y + 4)}" text-anchor="end" {font} '
            f'font-size="11">{_escape(label)}</text>'
        )
    if plot.xlabel:
        parts.append(
            f'<text x="{ml + iw / 2:.0f}" y="{plot.height - 10}" text-anchor="middle" '
            f'{font} font-size="12">{_escape(plot.xlabel)}</text>'
        )
    if plot.ylabel:
        cy = mt + ih / 2
        parts.append(
            f'<text x="16" y="{cy:.0f}" text-anchor="middle" {font} font-size="12" '
            f'transform="rotate(-90 16 {cy:.0f})">{_escape(plot.ylabel)}</text>'
        )

    for k, series in enumerate(plot.series):
        color = PALETTE[k % len(PALETTE)]
        points = [
            (px(a), py(b))
            for a, b in zip(tx[k], ty[k])
            if math.isfinite(a) and math.isfinite(b)
        ]
        if not points:
            continue
        if len(points) == 1:
            X, Y = points[0]
            parts.append(f'<circle cx="{_fmt(X)}" cy="{_fmt(Y)}" r="3" fill="{color}"/>')
        else:
            coords = " ".join(f"{_fmt(X)},{_fmt(Y)}" for X, Y in points)
            parts.append(
                f'<polyline points="{coords}" fill="none" stroke="{color}" '
                'stroke-width="1.6"/>'
            )
        for X, Y in points:
            parts.append(f'<circle cx="{_fmt(X)}" cy="{_fmt(Y)}" r="2.4" fill="{color}"/>')

    labelled = [s for s in plot.series if s.label]
    if labelled:
        ly = mt + 10
        for k, series in enumerate(plot.series):
            if not series.label:
                continue
            color = PALETTE[k % len(PALETTE)]
            parts.append(
                f'<line x1="{ml + iw - 150}" y1="{ly}" x2="{ml + iw - 128}" y2="{ly}" '
                f'stroke="{color}" stroke-width="2"/>'
            )
            parts.append(
                f'<text x="{ml + iw - 122}" y="{ly + 4}" {font} font-size="11">'
                f"{_escape(series.label)}</text>"
            )
            ly += 16
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
