"""Minimal deterministic figure emitters: line-plot SVGs and heatmap PPMs."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from ..raster import write_ppm

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

_W, _H = 480, 360
_MARGIN = 50


def _scale(values, lo, hi, out_lo, out_hi):
    span = hi - lo
    if span == 0:
        span = 1.0
    return [(out_lo + (v - lo) / span * (out_hi - out_lo)) for v in values]


def line_plot_svg(
    path: str | Path,
    curves: list[tuple[str, np.ndarray, np.ndarray]],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    diagonal: bool = False,
    y_zero: bool = True,
) -> None:
    """Write a fixed-size SVG line plot; curves are (name, xs, ys)."""
    xs_all = np.concatenate([np.asarray(xs, float) for _, xs, _ in curves])
    ys_all = np.concatenate([np.asarray(ys, float) for _, _, ys in curves])
    x_lo, x_hi = float(xs_all.min()), float(xs_all.max())
    y_lo = 0.0 if y_zero else float(ys_all.min())
    y_hi = float(ys_all.max())
    if diagonal:
        y_lo = min(y_lo, x_lo)
        y_hi = max(y_hi, x_hi)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.0f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<text x="{_W / 2:.0f}" y="{_H - 8}" text-anchor="middle" font-size="12">{xlabel}</text>',
        f'<text x="14" y="{_H / 2:.0f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {_H / 2:.0f})">{ylabel}</text>',
        f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{_W - 2 * _MARGIN}" '
        f'height="{_H - 2 * _MARGIN}" fill="none" stroke="black"/>',
    ]
    for value, anchor in ((x_lo, "start"), (x_hi, "end")):
        x = _MARGIN if anchor == "start" else _W - _MARGIN
        parts.append(
            f'<text x="{x}" y="{_H - _MARGIN + 16}" text-anchor="{anchor}" '
            f'font-size="10">{value:.2f}</text>'
        )
    for value, y in ((y_lo, _H - _MARGIN), (y_hi, _MARGIN)):
        parts.append(
            f'<text x="{_MARGIN - 4}" y="{y}" text-anchor="end" font-size="10">{value:.2f}</text>'
        )
    if diagonal:
        dx = _scale([x_lo, x_hi], x_lo, x_hi, _MARGIN, _W - _MARGIN)
        dy = _scale([x_lo, x_hi], y_lo, y_hi, _H - _MARGIN, _MARGIN)
        parts.append(
            f'<line x1="{dx[0]:.1f}" y1="{dy[0]:.1f}" x2="{dx[1]:.1f}" y2="{dy[1]:.1f}" '
            f'stroke="gray" stroke-dasharray="4 3"/>'
        )
    for k, (name, xs, ys) in enumerate(curves):
        px = _scale(np.asarray(xs, float), x_lo, x_hi, _MARGIN, _W - _MARGIN)
        py = _scale(np.asarray(ys, float), y_lo, y_hi, _H - _MARGIN, _MARGIN)
        points = " ".join(f"{x:.1f},{y:.1f}" for x, y in zip(px, py))
        color = _COLORS[k % len(_COLORS)]
        parts.append(f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        parts.append(
            f'<text x="{_W - _MARGIN - 4}" y="{_MARGIN + 14 + 13 * k}" text-anchor="end" '
            f'font-size="11" fill="{color}">{name}</text>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts), encoding="utf-8")


def _hot_color(t: float) -> tuple[int, int, int]:
    t = min(max(t, 0.0), 1.0)
    if t < 1 / 3:
        return (int(255 * 3 * t + 0.5), 0, 0)
    if t < 2 / 3:
        return (255, int(255 * (3 * t - 1) + 0.5), 0)
    return (255, 255, int(255 * (3 * t - 2) + 0.5))


def heatmap_ppm(matrix: np.ndarray, path: str | Path, v_max: float | None = None,
                cell: int = 4) -> None:
    """Color-mapped PPM of a matrix (row 0 rendered at the top)."""
    m = np.asarray(matrix, dtype=float)
    top = float(v_max) if v_max else max(float(m.max()), 1e-12)
    img = np.zeros((m.shape[0] * cell, m.shape[1] * cell, 3), dtype=np.uint8)
    for i in range(m.shape[0]):
        for j in range(m.shape[1]):
            img[i * cell : (i + 1) * cell, j * cell : (j + 1) * cell] = _hot_color(m[i, j] / top)
    write_ppm(img, path)


def matrix_csv(matrix: np.ndarray, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for row in np.asarray(matrix):
            writer.writerow([f"{v:.6f}" for v in np.atleast_1d(row)])


def curve_csv(xs: np.ndarray, ys: np.ndarray, header: tuple[str, str], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for x, y in zip(xs, ys):
            writer.writerow([f"{x:.6f}", f"{y:.6f}"])
