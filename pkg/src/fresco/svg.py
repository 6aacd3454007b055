"""Minimal standalone SVG charts (axes, polylines, scatter points)."""

from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 400
MARGIN = 56
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _fmt(v):
    return f"{v:.2f}"


def _scale(lo, hi, a, b):
    span = (hi - lo) or 1.0
    return lambda v: a + (v - lo) / span * (b - a)


def _frame(title, xlabel, ylabel, xlim, ylim):
    x0, x1 = MARGIN, WIDTH - MARGIN // 2
    y0, y1 = HEIGHT - MARGIN, MARGIN // 2
    sx, sy = _scale(xlim[0], xlim[1], x0, x1), _scale(ylim[0], ylim[1], y0, y1)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="16" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{(x0 + x1) / 2}" y="{HEIGHT - 12}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="14" y="{(y0 + y1) / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {(y0 + y1) / 2})">{escape(ylabel)}</text>',
    ]
    for frac in (0.0, 0.5, 1.0):
        xv = xlim[0] + frac * (xlim[1] - xlim[0])
        yv = ylim[0] + frac * (ylim[1] - ylim[0])
        parts.append(f'<text x="{_fmt(sx(xv))}" y="{y0 + 16}" text-anchor="middle" font-size="10">{xv:.3g}</text>')
        parts.append(f'<text x="{x0 - 4}" y="{_fmt(sy(yv) + 3)}" text-anchor="end" font-size="10">{yv:.3g}</text>')
    return parts, sx, sy


def _limits(values):
    lo, hi = min(values), max(values)
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    return lo, hi


def _legend(parts, names):
    for i, name in enumerate(names):
        y = MARGIN // 2 + 14 * i + 8
        color = COLORS[i % len(COLORS)]
        parts.append(f'<rect x="{WIDTH - 170}" y="{y - 8}" width="10" height="10" fill="{color}"/>')
        parts.append(f'<text x="{WIDTH - 155}" y="{y + 1}" font-size="11">{escape(name)}</text>')


def line_plot(series, title, xlabel, ylabel):
    """``series`` maps a label to ``(xs, ys)``."""
    xs = [x for s in series.values() for x in s[0]]
    ys = [y for s in series.values() for y in s[1]]
    parts, sx, sy = _frame(title, xlabel, ylabel, _limits(xs), _limits(ys))
    for i, (xv, yv) in enumerate(series.values()):
        pts = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in zip(xv, yv))
        parts.append(f'<polyline fill="none" stroke="{COLORS[i % len(COLORS)]}" stroke-width="1.5" points="{pts}"/>')
    _legend(parts, list(series))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def scatter_plot(points, title, xlabel, ylabel):
    """``points`` maps a label to a single ``(x, y)``."""
    xs = [p[0] for p in points.values()]
    ys = [p[1] for p in points.values()]
    parts, sx, sy = _frame(title, xlabel, ylabel, _limits(xs), _limits(ys))
    for i, (x, y) in enumerate(points.values()):
        parts.append(f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="5" fill="{COLORS[i % len(COLORS)]}"/>')
    _legend(parts, list(points))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
