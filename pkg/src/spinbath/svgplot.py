"""Minimal SVG line plots with linear or log axes, written via xml.etree."""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

WIDTH, HEIGHT = 640, 440
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 80, 150, 40, 60
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


@dataclass(frozen=True)
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    dashed: bool = False


def _transform(v: np.ndarray, log: bool) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if log:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(v > 0, np.log10(v), np.nan)
    return v


def _ticks(lo: float, hi: float, log: bool) -> list[tuple[float, str]]:
    if log:
        a, b = math.floor(lo), math.ceil(hi)
        step = max(1, (b - a) // 8 + 1)
        return [(float(k), f"1e{k}") for k in range(a, b + 1, step) if lo - 1e-9 <= k <= hi + 1e-9]
    span = hi - lo
    raw = span / 5 if span > 0 else 1.0
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-9 * step:
        out.append((v, f"{v:.4g}"))
        v += step
    return out


def line_plot(
    path: str | Path,
    series: Sequence[Series],
    xlabel: str = "",
    ylabel: str = "",
    title: str = "",
    xlog: bool = False,
    ylog: bool = False,
) -> Path:
    """Write one polyline per series. Points that cannot be drawn (non-finite,
    or non-positive on a log axis) split the line rather than being invented."""
    pts = []
    for s in series:
        tx, ty = _transform(s.x, xlog), _transform(s.y, ylog)
        pts.append((tx, ty))
    allx = np.concatenate([p[0] for p in pts]) if pts else np.array([0.0])
    ally = np.concatenate([p[1] for p in pts]) if pts else np.array([0.0])
    fx, fy = allx[np.isfinite(allx)], ally[np.isfinite(ally)]
    x0, x1 = (float(fx.min()), float(fx.max())) if fx.size else (0.0, 1.0)
    y0, y1 = (float(fy.min()), float(fy.max())) if fy.size else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.04 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B

    def sx(v):
        return MARGIN_L + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return MARGIN_T + (1.0 - (v - y0) / (y1 - y0)) * ph

    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=str(WIDTH), height=str(HEIGHT),
                     viewBox=f"0 0 {WIDTH} {HEIGHT}")
    ET.SubElement(svg, "rect", x="0", y="0", width=str(WIDTH), height=str(HEIGHT), fill="white")
    ET.SubElement(svg, "rect", x=str(MARGIN_L), y=str(MARGIN_T), width=str(pw), height=str(ph),
                  fill="none", stroke="black")
    axis_font = {"font-family": "sans-serif", "font-size": "11"}
    for v, lab in _ticks(x0, x1, xlog):
        X = sx(v)
        ET.SubElement(svg, "line", x1=f"{X:.2f}", x2=f"{X:.2f}", y1=str(MARGIN_T + ph), y2=str(MARGIN_T + ph + 5), stroke="black")
        ET.SubElement(svg, "text", x=f"{X:.2f}", y=str(MARGIN_T + ph + 18), **{"text-anchor": "middle"}, **axis_font).text = lab
    for v, lab in _ticks(y0, y1, ylog):
        Y = sy(v)
        ET.SubElement(svg, "line", x1=str(MARGIN_L - 5), x2=str(MARGIN_L), y1=f"{Y:.2f}", y2=f"{Y:.2f}", stroke="black")
        ET.SubElement(svg, "text", x=str(MARGIN_L - 8), y=f"{Y + 4:.2f}", **{"text-anchor": "end"}, **axis_font).text = lab
    ET.SubElement(svg, "text", x=str(MARGIN_L + pw / 2), y=str(HEIGHT - 15), **{"text-anchor": "middle"}, **axis_font).text = xlabel
    ET.SubElement(svg, "text", x="15", y=str(MARGIN_T + ph / 2), transform=f"rotate(-90 15 {MARGIN_T + ph / 2})",
                  **{"text-anchor": "middle"}, **axis_font).text = ylabel
    if title:
        ET.SubElement(svg, "text", x=str(WIDTH / 2), y="22", **{"text-anchor": "middle", "font-family": "sans-serif", "font-size": "14"}).text = title

    for k, (s, (tx, ty)) in enumerate(zip(series, pts)):
        color = COLORS[k % len(COLORS)]
        group = ET.SubElement(svg, "g", attrib={"class": "series", "data-label": s.label, "data-points": str(len(tx))})
        ok = np.isfinite(tx) & np.isfinite(ty)
        run: list[str] = []
        runs = []
        for good, a, b in zip(ok, tx, ty):
            if good:
                run.append(f"{sx(a):.2f},{sy(b):.2f}")
            elif run:
                runs.append(run)
                run = []
        if run:
            runs.append(run)
        style = {"fill": "none", "stroke": color, "stroke-width": "1.5"}
        if s.dashed:
            style["stroke-dasharray"] = "5,3"
        for r in runs:
            ET.SubElement(group, "polyline", points=" ".join(r), **style)
        ly = MARGIN_T + 14 + 16 * k
        ET.SubElement(svg, "line", x1=str(WIDTH - MARGIN_R + 10), x2=str(WIDTH - MARGIN_R + 30),
                      y1=str(ly), y2=str(ly), stroke=color, **{"stroke-width": "2"})
        ET.SubElement(svg, "text", x=str(WIDTH - MARGIN_R + 34), y=str(ly + 4), **axis_font).text = s.label

    path = Path(path)
    ET.ElementTree(svg).write(path, encoding="utf-8", xml_declaration=True)
    return path
