"""Comparison tables and SVG loss curves from metrics CSVs.

Everything here is a pure function of the input records.
"""

from __future__ import annotations

import math
from collections import defaultdict
from html import escape

import numpy as np

from .metrics import MetricsRecord

COLORS = {
    "lwpd": "#d62728",
    "kac": "#1f77b4",
    "gc": "#2ca02c",
    "centralized": "#7f7f7f",
}
_FALLBACK = ["#9467bd", "#8c564b", "#e377c2", "#bcbd22", "#17becf"]


def median_curves(records) -> dict[str, list[tuple[float, float]]]:
    """Per scheme, the median test loss across seeds at every recorded time.

    Each seed's curve is read as a step function, so seeds with different
    checkpoint grids still combine.
    """
    runs: dict[str, dict[int, list[MetricsRecord]]] = defaultdict(lambda: defaultdict(list))
    for r in records:
        runs[r.scheme][r.seed].append(r)
    out = {}
    for scheme in sorted(runs):
        seeds = runs[scheme]
        times = sorted({r.sim_time for rs in seeds.values() for r in rs})
        curve = []
        for tm in times:
            vals = []
            for rs in seeds.values():
                before = [r for r in rs if r.sim_time <= tm]
                if before:
                    vals.append(before[-1].test_loss)
            curve.append((tm, float(np.median(vals))))
        out[scheme] = curve
    return out


def time_to_target(curve, target: float) -> float:
    for tm, loss in curve:
        if loss <= target:
            return tm
    return math.inf


def comparison_table(records, target: float | None = None) -> str:
    """Markdown table with one row per scheme (medians over seeds)."""
    by_scheme: dict[str, dict[int, list[MetricsRecord]]] = defaultdict(lambda: defaultdict(list))
    for r in records:
        by_scheme[r.scheme][r.seed].append(r)
    curves = median_curves(records)
    head = ["scheme", "seeds", "final test loss", "best test loss", "final accuracy",
            "updates", "comm floats", "decode mults"]
    if target is not None:
        head.append(f"time to loss <= {target:g}")
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for scheme in sorted(by_scheme):
        finals = [rs[-1] for rs in by_scheme[scheme].values()]
        best = [min(r.test_loss for r in rs) for rs in by_scheme[scheme].values()]
        row = [
            scheme,
            str(len(finals)),
            f"{np.median([f.test_loss for f in finals]):.6g}",
            f"{np.median(best):.6g}",
            f"{np.median([f.test_accuracy for f in finals]):.4f}",
            f"{np.median([f.updates for f in finals]):g}",
            f"{np.median([f.comm_floats for f in finals]):g}",
            f"{np.median([f.decode_mults for f in finals]):g}",
        ]
        if target is not None:
            row.append(f"{time_to_target(curves[scheme], target):g}")
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


def _ticks(lo, hi, count=5):
    if hi <= lo:
        return [lo]
    return list(np.linspace(lo, hi, count))


def svg_chart(records, log_scale: bool = False, width: int = 720, height: int = 440,
              title: str = "test loss vs simulated time") -> str:
    """One polyline per scheme of the median test loss against simulated time."""
    curves = median_curves(records)
    pad_l, pad_r, pad_t, pad_b = 70, 150, 40, 50
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b
    pts = [p for c in curves.values() for p in c]
    if not pts:
        raise ValueError("no records to plot")
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    if log_scale:
        ys = [math.log10(max(y, 1e-12)) for y in ys]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def sx(x):
        return pad_l + (x - x0) / (x1 - x0) * pw

    def sy(y):
        if log_scale:
            y = math.log10(max(y, 1e-12))
        return pad_t + (1 - (y - y0) / (y1 - y0)) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{pad_l}" y="22" font-family="sans-serif" font-size="14">{escape(title)}</text>',
        f'<rect x="{pad_l}" y="{pad_t}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for xv in _ticks(x0, x1):
        x = sx(xv)
        parts.append(f'<line x1="{x:.2f}" y1="{pad_t + ph}" x2="{x:.2f}" y2="{pad_t + ph + 5}" stroke="black"/>')
        parts.append(f'<text x="{x:.2f}" y="{pad_t + ph + 18}" font-family="sans-serif" font-size="11" '
                     f'text-anchor="middle">{xv:g}</text>')
    for yv in _ticks(y0, y1):
        y = pad_t + (1 - (yv - y0) / (y1 - y0)) * ph
        label = f"{10 ** yv:.3g}" if log_scale else f"{yv:.3g}"
        parts.append(f'<line x1="{pad_l - 5}" y1="{y:.2f}" x2="{pad_l}" y2="{y:.2f}" stroke="black"/>')
        parts.append(f'<text x="{pad_l - 8}" y="{y + 4:.2f}" font-family="sans-serif" font-size="11" '
                     f'text-anchor="end">{label}</text>')
    parts.append(f'<text x="{pad_l + pw / 2}" y="{height - 10}" font-family="sans-serif" font-size="12" '
                 f'text-anchor="middle">simulated time</text>')
    ylabel = "test loss (log)" if log_scale else "test loss"
    parts.append(f'<text x="16" y="{pad_t + ph / 2}" font-family="sans-serif" font-size="12" '
                 f'text-anchor="middle" transform="rotate(-90 16 {pad_t + ph / 2})">{ylabel}</text>')
    for i, (scheme, curve) in enumerate(curves.items()):
        color = COLORS.get(scheme, _FALLBACK[i % len(_FALLBACK)])
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in curve)
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}">'
                     f'<title>{escape(scheme)}</title></polyline>')
        ly = pad_t + 16 + 18 * i
        lx = pad_l + pw + 12
        parts.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 22}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 28}" y="{ly + 4}" font-family="sans-serif" font-size="12">'
                     f'{escape(scheme)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
