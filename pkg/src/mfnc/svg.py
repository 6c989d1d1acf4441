"""Minimal static SVG charts (log-log curves and histograms) with no plotting dependency."""

import math
from xml.sax.saxutils import escape

import numpy as np

W, H = 560, 380
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 50
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd")


def _fmt(v):
    return f"{v:.4g}"


def _frame(title, xlabel, ylabel):
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">',
             f'<rect width="{W}" height="{H}" fill="white"/>',
             f'<text x="{W / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
             f'<text x="{W / 2}" y="{H - 10}" text-anchor="middle">{escape(xlabel)}</text>',
             f'<text x="16" y="{H / 2}" text-anchor="middle" transform="rotate(-90 16 {H / 2})">{escape(ylabel)}</text>',
             f'<rect x="{LEFT}" y="{TOP}" width="{W - LEFT - RIGHT}" height="{H - TOP - BOTTOM}" fill="none" stroke="black"/>']
    return parts


class _Axes:
    def __init__(self, xlim, ylim, logx=False, logy=False):
        self.logx, self.logy = logx, logy
        self.x0, self.x1 = (math.log10(v) if logx else v for v in xlim)
        self.y0, self.y1 = (math.log10(v) if logy else v for v in ylim)
        if self.x1 == self.x0:
            self.x1 += 1.0
        if self.y1 == self.y0:
            self.y1 += 1.0

    def px(self, x):
        x = math.log10(x) if self.logx else x
        return LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)

    def py(self, y):
        y = math.log10(y) if self.logy else y
        return H - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)

    def ticks(self, values_x, values_y):
        out = []
        for v in values_x:
            x = self.px(v)
            out.append(f'<line x1="{x:.1f}" y1="{H - BOTTOM}" x2="{x:.1f}" y2="{H - BOTTOM + 5}" stroke="black"/>')
            out.append(f'<text x="{x:.1f}" y="{H - BOTTOM + 18}" text-anchor="middle">{_fmt(v)}</text>')
        for v in values_y:
            y = self.py(v)
            out.append(f'<line x1="{LEFT - 5}" y1="{y:.1f}" x2="{LEFT}" y2="{y:.1f}" stroke="black"/>')
            out.append(f'<text x="{LEFT - 8}" y="{y + 4:.1f}" text-anchor="end">{_fmt(v)}</text>')
        return out


def loglog(series, title, xlabel, ylabel, bands=None):
    """series: list of (label, xs, ys, dashed); bands: optional (xs, lo, hi) error bars for series 0."""
    xs = np.concatenate([np.asarray(s[1], float) for s in series])
    ys = np.concatenate([np.asarray(s[2], float) for s in series])
    if bands is not None:
        ys = np.concatenate((ys, np.asarray(bands[1], float), np.asarray(bands[2], float)))
    ys = ys[ys > 0]
    ax = _Axes((xs.min() / 1.15, xs.max() * 1.15), (ys.min() / 1.2, ys.max() * 1.2), True, True)
    parts = _frame(title, xlabel, ylabel)
    parts += ax.ticks(sorted(set(xs.tolist())), np.geomspace(ys.min(), ys.max(), 4).tolist())
    for k, (label, sx, sy, dashed) in enumerate(series):
        col = COLORS[k % len(COLORS)]
        pts = " ".join(f"{ax.px(x):.1f},{ax.py(y):.1f}" for x, y in zip(sx, sy) if y > 0)
        dash = ' stroke-dasharray="6,4"' if dashed else ""
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{col}" stroke-width="2"{dash}/>')
        if not dashed:
            for x, y in zip(sx, sy):
                parts.append(f'<circle cx="{ax.px(x):.1f}" cy="{ax.py(y):.1f}" r="3" fill="{col}"/>')
        parts.append(f'<text x="{W - RIGHT - 8}" y="{TOP + 16 + 16 * k}" text-anchor="end" fill="{col}">{escape(label)}</text>')
    if bands is not None:
        for x, lo, hi in zip(*bands):
            if lo > 0:
                parts.append(f'<line x1="{ax.px(x):.1f}" y1="{ax.py(lo):.1f}" x2="{ax.px(x):.1f}" '
                             f'y2="{ax.py(hi):.1f}" stroke="{COLORS[0]}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def histogram(groups, title, xlabel, bins=30):
    """groups: list of (label, values); overlaid step histograms on shared bins."""
    allv = np.concatenate([np.asarray(v, float) for _, v in groups])
    lo, hi = float(allv.min()), float(allv.max())
    if hi == lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    counts = [np.histogram(np.asarray(v, float), edges)[0] for _, v in groups]
    ax = _Axes((lo, hi), (0.0, max(1, max(int(c.max()) for c in counts)) * 1.1))
    parts = _frame(title, xlabel, "count")
    parts += ax.ticks(np.linspace(lo, hi, 5).tolist(), np.linspace(0, ax.y1 / 1.1, 4).tolist())
    for k, ((label, _), c) in enumerate(zip(groups, counts)):
        col = COLORS[k % len(COLORS)]
        pts = [f"{ax.px(edges[0]):.1f},{ax.py(0):.1f}"]
        for j, n in enumerate(c):
            pts.append(f"{ax.px(edges[j]):.1f},{ax.py(n):.1f}")
            pts.append(f"{ax.px(edges[j + 1]):.1f},{ax.py(n):.1f}")
        pts.append(f"{ax.px(edges[-1]):.1f},{ax.py(0):.1f}")
        parts.append(f'<polyline points="{" ".join(pts)}" fill="none" stroke="{col}" stroke-width="1.5"/>')
        parts.append(f'<text x="{W - RIGHT - 8}" y="{TOP + 16 + 16 * k}" text-anchor="end" fill="{col}">{escape(label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
