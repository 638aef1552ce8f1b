"""Minimal SVG line chart of a run's time series (no plotting library needed)."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["series_svg", "write_series_svg"]

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def series_svg(t, curves: dict[str, np.ndarray], title: str = "", width: int = 640,
               height: int = 400) -> str:
    """Render ``curves`` (name -> values) against ``t`` as an SVG document."""
    t = np.asarray(t, dtype=float)
    left, right, top, bottom = 70, 130, 30, 45
    pw, ph = width - left - right, height - top - bottom
    allv = np.concatenate([np.asarray(v, dtype=float) for v in curves.values()]) if curves else np.zeros(1)
    ymin, ymax = float(np.min(allv)), float(np.max(allv))
    if ymax - ymin < 1e-300:
        ymin, ymax = ymin - 1.0, ymax + 1.0
    pad = 0.05 * (ymax - ymin)
    ymin, ymax = ymin - pad, ymax + pad
    tmin, tmax = float(t.min()), float(t.max())
    if tmax <= tmin:
        tmax = tmin + 1.0

    def px(x):
        return left + (x - tmin) / (tmax - tmin) * pw

    def py(y):
        return top + (ymax - y) / (ymax - ymin) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>',
    ]
    if title:
        out.append(f'<text x="{left}" y="{top - 10}">{escape(title)}</text>')
    for frac in np.linspace(0, 1, 5):
        yv = ymin + frac * (ymax - ymin)
        tv = tmin + frac * (tmax - tmin)
        out.append(f'<text x="{left - 6}" y="{py(yv) + 4:.1f}" text-anchor="end">{yv:.3g}</text>')
        out.append(f'<text x="{px(tv):.1f}" y="{top + ph + 16}" text-anchor="middle">{tv:.3g}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{height - 8}" text-anchor="middle">t</text>')
    for i, (name, vals) in enumerate(curves.items()):
        col = _COLORS[i % len(_COLORS)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(t, np.asarray(vals, dtype=float)))
        out.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.5" points="{pts}"/>')
        ly = top + 16 + 18 * i
        out.append(f'<line x1="{left + pw + 10}" y1="{ly - 4}" x2="{left + pw + 30}" y2="{ly - 4}" '
                   f'stroke="{col}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 35}" y="{ly}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_series_svg(records, path, title: str = "") -> Path:
    t = [r.t for r in records]
    curves = {
        "E_mag": [r.E_mag for r in records],
        "E_kin": [r.E_kin for r in records],
        "H_total": [r.H_total for r in records],
    }
    path = Path(path)
    path.write_text(series_svg(t, curves, title))
    return path
