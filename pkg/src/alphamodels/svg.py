"""Minimal log-log scatter plots written as plain SVG text."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

WIDTH, HEIGHT, PAD = 640, 440, 60
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo: float, hi: float):
    a, b = math.floor(lo), math.ceil(hi)
    return list(range(a, b + 1))


def loglog_svg(series: list[dict], title: str = "", xlabel: str = "x", ylabel: str = "error") -> str:
    """``series``: dicts with ``label``, ``x``, ``y`` and ``style`` in {points, line, dashed}."""
    pts = [(x, y) for s in series for x, y in zip(s["x"], s["y"]) if x > 0 and y > 0]
    if not pts:
        raise ValueError("nothing positive to plot")
    lx = [math.log10(x) for x, _ in pts]
    ly = [math.log10(y) for _, y in pts]
    x0, x1 = min(lx), max(lx)
    y0, y1 = min(ly), max(ly)
    if x1 - x0 < 1e-9:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 - y0 < 1e-9:
        y0, y1 = y0 - 0.5, y1 + 0.5
    x0, x1 = x0 - 0.05 * (x1 - x0), x1 + 0.05 * (x1 - x0)
    y0, y1 = y0 - 0.05 * (y1 - y0), y1 + 0.05 * (y1 - y0)

    def px(v):
        return PAD + (math.log10(v) - x0) / (x1 - x0) * (WIDTH - 2 * PAD)

    def py(v):
        return HEIGHT - PAD - (math.log10(v) - y0) / (y1 - y0) * (HEIGHT - 2 * PAD)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<rect x="{PAD}" y="{PAD}" width="{WIDTH - 2 * PAD}" height="{HEIGHT - 2 * PAD}" fill="none" stroke="black"/>',
    ]
    for e in _ticks(x0, x1):
        if x0 <= e <= x1:
            x = px(10.0**e)
            out.append(f'<line x1="{x:.2f}" y1="{HEIGHT - PAD}" x2="{x:.2f}" y2="{HEIGHT - PAD + 5}" stroke="black"/>')
            out.append(f'<text x="{x:.2f}" y="{HEIGHT - PAD + 20}" font-size="11" text-anchor="middle">1e{e}</text>')
    for e in _ticks(y0, y1):
        if y0 <= e <= y1:
            y = py(10.0**e)
            out.append(f'<line x1="{PAD - 5}" y1="{y:.2f}" x2="{PAD}" y2="{y:.2f}" stroke="black"/>')
            out.append(f'<text x="{PAD - 8}" y="{y + 4:.2f}" font-size="11" text-anchor="end">1e{e}</text>')
    for i, s in enumerate(series):
        color = s.get("color", COLORS[i % len(COLORS)])
        xy = [(px(x), py(y)) for x, y in zip(s["x"], s["y"]) if x > 0 and y > 0]
        style = s.get("style", "points")
        if style == "points":
            for x, y in xy:
                out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="4" fill="{color}"/>')
        else:
            dash = ' stroke-dasharray="6,4"' if style == "dashed" else ""
            path = " ".join(f"{'M' if j == 0 else 'L'}{x:.2f},{y:.2f}" for j, (x, y) in enumerate(xy))
            out.append(f'<path d="{path}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>')
        out.append(f'<text x="{WIDTH - PAD + 4 - 150}" y="{PAD + 16 + 14 * i}" font-size="11" fill="{color}">{escape(s["label"])}</text>')
    out.append(f'<text x="{WIDTH / 2}" y="{PAD / 2}" font-size="14" text-anchor="middle">{escape(title)}</text>')
    out.append(f'<text x="{WIDTH / 2}" y="{HEIGHT - 15}" font-size="12" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="15" y="{HEIGHT / 2}" font-size="12" text-anchor="middle" transform="rotate(-90 15 {HEIGHT / 2})">{escape(ylabel)}</text>'
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def sweep_svg(result) -> str:
    """Scatter of measured errors, fitted power law and bound curve per model."""
    series = []
    squared = result.kind == "combined"
    for i, (name, fit) in enumerate(sorted(result.fits.items())):
        rows = [r for r in result.rows if r["model"] == name] if result.kind == "alpha" else result.rows
        if name == "combined_lambda":
            continue
        color = COLORS[i % len(COLORS)]
        xs = [r["fit_x"] for r in rows]
        ys = [r["error_sq"] if squared else r["error"] for r in rows]
        bs = [r["bound_sq"] if squared else math.sqrt(r["bound_sq"]) for r in rows]
        series.append({"label": f"{name} measured", "x": xs, "y": ys, "style": "points", "color": color})
        series.append({"label": f"{name} fit p={fit.order:.2f}", "x": xs, "y": [fit.prefactor * x**fit.order for x in xs], "style": "line", "color": color})
        series.append({"label": f"{name} bound", "x": xs, "y": bs, "style": "dashed", "color": color})
    ylabel = "sup_t error^2" if squared else "sup_t error"
    xlabel = next(iter(result.fits.values())).form
    return loglog_svg(series, title=f"{result.kind} sweep", xlabel=xlabel, ylabel=ylabel)
