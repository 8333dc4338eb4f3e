"""Minimal SVG charts (box plots and line plots) written as plain text."""

from html import escape

import numpy as np

W, H = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 60
COLOURS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _num(x):
    return f"{x:.2f}"


def _scale(lo, hi, a, b):
    span = hi - lo if hi > lo else 1.0
    return lambda v: a + (v - lo) / span * (b - a)


def _ticks(lo, hi, n=5):
    if hi <= lo:
        return [lo]
    step = 10 ** np.floor(np.log10((hi - lo) / n))
    for mult in (1, 2, 5, 10):
        if (hi - lo) / (step * mult) <= n:
            step *= mult
            break
    start = np.ceil(lo / step) * step
    return list(np.arange(start, hi + step * 1e-9, step))


def _frame(title, ylabel, ylo, yhi, y):
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{H - BOTTOM}" stroke="black"/>',
        f'<line x1="{LEFT}" y1="{H - BOTTOM}" x2="{W - RIGHT}" y2="{H - BOTTOM}" stroke="black"/>',
        f'<text x="16" y="{H / 2}" transform="rotate(-90 16 {H / 2})" text-anchor="middle">{escape(ylabel)}</text>',
    ]
    for t in _ticks(ylo, yhi):
        yy = _num(y(t))
        out.append(f'<line x1="{LEFT - 4}" y1="{yy}" x2="{LEFT}" y2="{yy}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 6}" y="{yy}" text-anchor="end" dominant-baseline="middle">{t:.3g}</text>')
    return out


def boxplot(groups, title="", ylabel="", reference=None):
    """Box plot of ``{label: values}``; ``reference`` draws a dashed horizontal line."""
    labels = list(groups)
    data = [np.asarray(groups[k], dtype=float) for k in labels]
    allv = np.concatenate(data + [np.array([reference])] if reference is not None else data) if data else np.zeros(1)
    lo, hi = float(allv.min()), float(allv.max())
    pad = 0.05 * (hi - lo or 1.0)
    y = _scale(lo - pad, hi + pad, H - BOTTOM, TOP)
    out = _frame(title, ylabel, lo - pad, hi + pad, y)
    if reference is not None:
        out.append(
            f'<line x1="{LEFT}" y1="{_num(y(reference))}" x2="{W - RIGHT}" y2="{_num(y(reference))}" '
            'stroke="grey" stroke-dasharray="4 3"/>'
        )
    slot = (W - LEFT - RIGHT) / max(len(labels), 1)
    for k, (label, v) in enumerate(zip(labels, data)):
        cx = LEFT + slot * (k + 0.5)
        half = min(30, slot * 0.3)
        colour = COLOURS[k % len(COLOURS)]
        if len(v):
            q1, med, q3 = np.percentile(v, [25, 50, 75])
            iqr = q3 - q1
            low = v[v >= q1 - 1.5 * iqr].min()
            high = v[v <= q3 + 1.5 * iqr].max()
            out.append(f'<line x1="{_num(cx)}" y1="{_num(y(low))}" x2="{_num(cx)}" y2="{_num(y(q1))}" stroke="{colour}"/>')
            out.append(f'<line x1="{_num(cx)}" y1="{_num(y(q3))}" x2="{_num(cx)}" y2="{_num(y(high))}" stroke="{colour}"/>')
            out.append(
                f'<rect x="{_num(cx - half)}" y="{_num(y(q3))}" width="{_num(2 * half)}" '
                f'height="{_num(max(y(q1) - y(q3), 0.5))}" fill="{colour}" fill-opacity="0.3" stroke="{colour}"/>'
            )
            out.append(
                f'<line x1="{_num(cx - half)}" y1="{_num(y(med))}" x2="{_num(cx + half)}" y2="{_num(y(med))}" '
                f'stroke="{colour}" stroke-width="2"/>'
            )
            for o in v[(v < low) | (v > high)]:
                out.append(f'<circle cx="{_num(cx)}" cy="{_num(y(o))}" r="2.5" fill="none" stroke="{colour}"/>')
        out.append(f'<text x="{_num(cx)}" y="{H - BOTTOM + 18}" text-anchor="middle">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def line_plot(series, title="", xlabel="", ylabel="", bars=False):
    """Lines for ``{label: (x, y)}``; ``bars=True`` draws vertical sticks (for ACFs)."""
    xs = [np.asarray(x, dtype=float) for x, _ in series.values()]
    ys = [np.asarray(v, dtype=float) for _, v in series.values()]
    xlo = min(float(x.min()) for x in xs) if xs else 0.0
    xhi = max(float(x.max()) for x in xs) if xs else 1.0
    ylo = min(0.0, min(float(v.min()) for v in ys)) if ys else 0.0
    yhi = max(float(v.max()) for v in ys) if ys else 1.0
    x = _scale(xlo, xhi, LEFT, W - RIGHT)
    y = _scale(ylo, yhi * 1.05 if yhi > 0 else 1.0, H - BOTTOM, TOP)
    out = _frame(title, ylabel, ylo, yhi, y)
    out.append(f'<text x="{(LEFT + W - RIGHT) / 2}" y="{H - 15}" text-anchor="middle">{escape(xlabel)}</text>')
    for t in _ticks(xlo, xhi):
        out.append(f'<text x="{_num(x(t))}" y="{H - BOTTOM + 16}" text-anchor="middle">{t:.3g}</text>')
    n = len(series)
    for k, (label, xv, yv) in enumerate(zip(series, xs, ys)):
        colour = COLOURS[k % len(COLOURS)]
        if bars:
            shift = (k - (n - 1) / 2) * 2.0
            for a, b in zip(xv, yv):
                out.append(
                    f'<line x1="{_num(x(a) + shift)}" y1="{_num(y(0))}" x2="{_num(x(a) + shift)}" '
                    f'y2="{_num(y(b))}" stroke="{colour}"/>'
                )
        else:
            pts = " ".join(f"{_num(x(a))},{_num(y(b))}" for a, b in zip(xv, yv))
            out.append(f'<polyline points="{pts}" fill="none" stroke="{colour}" stroke-width="1.5"/>')
        out.append(f'<text x="{W - RIGHT - 5}" y="{TOP + 14 * (k + 1)}" text-anchor="end" fill="{colour}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
