"""Dependency-free SVG rendering of convergence curves on log-log axes."""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

# metric -> (colour, legend label)
FIGURE_METRICS = {
    "dist_sq": ("red", "||w_k - w*||^2"),
    "avg_gap": ("cyan", "f(w̄_k) - f(w*)"),
    "f_gap": ("blue", "f(w_k) - f(w*)"),
    "min_grad_norm_sq": ("magenta", "min_k ||∇f(w_k)||^2"),
}
BOUND_COLOURS = ("green", "orange", "purple", "brown", "olive")

WIDTH, HEIGHT = 640, 480
LEFT, RIGHT, TOP, BOTTOM = 80, 180, 30, 60


def _series(trace, metric):
    if isinstance(trace, dict):
        return np.asarray(trace["k"], float), np.asarray(trace[metric], float)
    return np.asarray(trace.k, float), np.asarray(trace.column(metric), float)


def reference_points(c0: float, slope: float, kmin: float, kmax: float) -> list[tuple[float, float]]:
    """End points of the line c0 * k**slope, which passes through (1, c0)."""
    return [(k, c0 * k**slope) for k in (kmin, kmax)]


def _fmt(x: float) -> str:
    return format(x, ".2f")


def emit_plot(traces, bound_curves, path, *, metrics=tuple(FIGURE_METRICS),
              reference: tuple[float, float] | None = None, title: str = "") -> Path:
    """Write an SVG with one polyline per (trace, metric) and per bound curve.

    ``reference=(C0, slope)`` adds a dashed line through (1, C0) with the
    given log-log slope, e.g. ``(C0, -1)`` for O(1/k).  Nonpositive values
    cannot be drawn on log axes and are skipped.
    """
    traces = list(traces)
    bound_curves = list(bound_curves or [])
    if not traces or all(len(_series(t, metrics[0])[0]) == 0 for t in traces):
        raise ValueError("nothing to plot: empty trace")

    lines = []  # (xs, ys, colour, label)
    for ti, tr in enumerate(traces):
        for m in metrics:
            k, v = _series(tr, m)
            colour, label = FIGURE_METRICS.get(m, ("black", m))
            if len(traces) > 1:
                label = f"{label} [{ti}]"
            lines.append((k, v, colour, label))
    for bi, bc in enumerate(bound_curves):
        colour = BOUND_COLOURS[bi % len(BOUND_COLOURS)]
        lines.append((np.asarray(bc.k, float), np.asarray(bc.values, float), colour, f"bound {bc.theorem}"))

    pos = [(k[(v > 0) & np.isfinite(v)], v[(v > 0) & np.isfinite(v)]) for k, v, *_ in lines]
    all_k = np.concatenate([p[0] for p in pos if p[0].size] or [np.array([1.0])])
    all_v = np.concatenate([p[1] for p in pos if p[1].size] or [np.array([1.0])])
    kmin, kmax = max(float(all_k.min()), 1.0), float(all_k.max())
    if reference is not None:
        kmin = 1.0
    if kmax <= kmin:
        kmax = kmin * 10
    if reference is not None:
        all_v = np.append(all_v, [v for _, v in reference_points(*reference, kmin, kmax)])
    lx0, lx1 = math.log10(kmin), math.log10(kmax)
    ly0, ly1 = math.floor(math.log10(all_v.min())), math.ceil(math.log10(all_v.max()))
    if ly1 <= ly0:
        ly1 = ly0 + 1
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(k):
        return LEFT + (math.log10(k) - lx0) / (lx1 - lx0) * pw

    def sy(v):
        return TOP + (ly1 - math.log10(v)) / (ly1 - ly0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<g id="axes" stroke="black" fill="none">'
        f'<path d="M{LEFT},{TOP} V{TOP + ph} H{LEFT + pw}"/></g>',
    ]
    ticks = ['<g id="ticks" fill="black">']
    for e in range(int(math.floor(lx0)), int(math.ceil(lx1)) + 1):
        if lx0 <= e <= lx1:
            x = sx(10.0**e)
            ticks.append(f'<text x="{_fmt(x)}" y="{TOP + ph + 16}" text-anchor="middle">1e{e}</text>')
    for e in range(ly0, ly1 + 1):
        y = sy(10.0**e)
        ticks.append(f'<text x="{LEFT - 6}" y="{_fmt(y + 4)}" text-anchor="end">1e{e}</text>')
    ticks.append(f'<text x="{LEFT + pw / 2}" y="{HEIGHT - 15}" text-anchor="middle">iteration k</text>')
    if title:
        ticks.append(f'<text x="{LEFT + pw / 2}" y="18" text-anchor="middle">{escape(title)}</text>')
    ticks.append("</g>")
    out.extend(ticks)

    legend = ['<g id="legend">']
    for i, ((k, v), (_, _, colour, label)) in enumerate(zip(pos, lines)):
        pts = " ".join(f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in zip(k, v) if a >= kmin)
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{pts}"/>')
        ly = TOP + 14 * i + 8
        legend.append(f'<text x="{LEFT + pw + 10}" y="{ly}" fill="{colour}">{escape(label)}</text>')
    if reference is not None:
        c0, slope = reference
        pts = " ".join(f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in reference_points(c0, slope, kmin, kmax))
        out.append(f'<polyline id="reference" fill="none" stroke="black" stroke-width="1" '
                   f'stroke-dasharray="6,4" points="{pts}"/>')
        ly = TOP + 14 * len(lines) + 8
        legend.append(f'<text x="{LEFT + pw + 10}" y="{ly}" fill="black">O(k^{slope:g})</text>')
    legend.append("</g>")
    out.extend(legend)
    out.append("</svg>")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(out) + "\n")
    return path
