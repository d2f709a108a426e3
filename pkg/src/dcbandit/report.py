"""CSV export and SVG regret plots."""
from __future__ import annotations

import csv
import io
from xml.sax.saxutils import escape

import numpy as np

from .sim import RegretTrace

TRACE_HEADER = ("agent", "seed", "step", "regret", "cum_regret", "retrain_event")
SUMMARY_HEADER = ("agent", "runs", "fcr_mean", "fcr_stderr", "fcr_min", "fcr_max")
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def fmt(x):
    """6 significant digits, with negative zero folded to ``0``."""
    s = f"{float(x):.6g}"
    return "0" if s == "-0" else s


def ordered(traces):
    """Sort by (agent in first-seen order, seed)."""
    rank = {}
    for t in traces:
        rank.setdefault(t.agent, len(rank))
    return sorted(traces, key=lambda t: (rank[t.agent], t.seed))


def emit_csv(traces):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for t in ordered(traces):
        retrain = set(t.retrain_steps)
        cum = t.cumulative
        for i in range(t.horizon):
            step = i + 1
            w.writerow((t.agent, t.seed, step, fmt(t.regret[i]), fmt(cum[i]), int(step in retrain)))
    return buf.getvalue()


def emit_summary_csv(curves):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_HEADER)
    for c in curves:
        w.writerow((c.agent, len(c.fcrs), fmt(c.fcr_mean), fmt(c.fcr_stderr),
                    fmt(c.fcr_min), fmt(c.fcr_max)))
    return buf.getvalue()


def parse_traces_csv(text):
    """Rebuild traces from :func:`emit_csv` output.

    Regret values come back at the 6 significant digits they were written
    with; the stored cumulative column is returned alongside for checks.
    """
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != TRACE_HEADER:
        raise ValueError(f"unexpected traces.csv header {reader.fieldnames}")
    runs = {}
    for row in reader:
        key = (row["agent"], int(row["seed"]))
        run = runs.setdefault(key, {"regret": [], "cum": [], "retrain": []})
        step = int(row["step"])
        if step != len(run["regret"]) + 1:
            raise ValueError(f"{key}: steps out of order at step {step}")
        run["regret"].append(float(row["regret"]))
        run["cum"].append(float(row["cum_regret"]))
        if row["retrain_event"] == "1":
            run["retrain"].append(step)
    traces, cums = [], []
    for (agent, seed), run in runs.items():
        traces.append(RegretTrace(agent, "", seed, np.array(run["regret"]), run["retrain"]))
        cums.append(np.array(run["cum"]))
    return traces, cums


# -- SVG --------------------------------------------------------------------

def _nice_ticks(lo, hi, n=5):
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / n
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    first = np.ceil(lo / step) * step
    return [float(v) for v in np.arange(first, hi + step * 1e-9, step)]


def _thin(y, limit):
    """Indices to draw: evenly spaced, plus the first, last and extreme points."""
    n = len(y)
    if n <= limit:
        return np.arange(n)
    idx = np.linspace(0, n - 1, limit).round().astype(int)
    return np.unique(np.concatenate([idx, [0, n - 1, int(np.argmax(y)), int(np.argmin(y))]]))


def emit_svg(curves, title="Cumulative regret", width=800, height=500, max_points=1500):
    """Standalone SVG 1.1 plot with one polyline per aggregated curve.

    The y axis spans exactly ``[min(0, lowest value), highest mean value]``, so
    the top of the plot area is the largest cumulative regret shown.
    """
    curves = list(curves)
    if not curves:
        raise ValueError("no curves to plot")
    left, right, top, bottom = 80, 220, 40, 60
    pw, ph = width - left - right, height - top - bottom
    t_max = max(len(c.mean) for c in curves)
    y_hi = max(float(np.max(c.mean)) for c in curves)
    y_lo = min(0.0, min(float(np.min(c.mean)) for c in curves))
    span = y_hi - y_lo if y_hi > y_lo else 1.0
    x_span = max(t_max - 1, 1)

    def sx(step):
        return left + pw * (step - 1) / x_span

    def sy(v):
        return top + ph * (1.0 - (v - y_lo) / span)

    out = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<title>{escape(title)}</title>',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{left + pw / 2:.1f}" y="{top - 15}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="16">{escape(title)}</text>',
    ]
    grid = ['<g id="axes" stroke="black" stroke-width="1" font-family="sans-serif" font-size="11">',
            f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}"/>',
            f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}"/>']
    for v in _nice_ticks(1, t_max):
        x = sx(v)
        grid.append(f'<line x1="{x:.2f}" y1="{top + ph}" x2="{x:.2f}" y2="{top + ph + 5}"/>')
        grid.append(f'<text x="{x:.2f}" y="{top + ph + 18}" text-anchor="middle" '
                    f'stroke="none">{v:g}</text>')
    for v in _nice_ticks(y_lo, y_hi if y_hi > y_lo else y_lo + 1.0):
        y = sy(v)
        grid.append(f'<line x1="{left - 5}" y1="{y:.2f}" x2="{left}" y2="{y:.2f}"/>')
        grid.append(f'<text x="{left - 8}" y="{y + 4:.2f}" text-anchor="end" '
                    f'stroke="none">{v:g}</text>')
    grid.append('</g>')
    out += grid
    out.append(f'<text id="xlabel" x="{left + pw / 2:.1f}" y="{height - 15}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="13">steps</text>')
    out.append(f'<text id="ylabel" x="20" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="13" '
               f'transform="rotate(-90 20 {top + ph / 2:.1f})">cumulative regret</text>')

    legend = ['<g id="legend" font-family="sans-serif" font-size="12">']
    for k, c in enumerate(curves):
        color = PALETTE[k % len(PALETTE)]
        idx = _thin(c.mean, max_points)
        if np.any(c.stderr > 0):
            upper = " ".join(f"{sx(i + 1):.2f},{sy(c.mean[i] + c.stderr[i]):.2f}" for i in idx)
            lower = " ".join(f"{sx(i + 1):.2f},{sy(c.mean[i] - c.stderr[i]):.2f}"
                             for i in idx[::-1])
            out.append(f'<polygon class="band" points="{upper} {lower}" fill="{color}" '
                       f'fill-opacity="0.15" stroke="none"/>')
        pts = " ".join(f"{sx(i + 1):.2f},{sy(c.mean[i]):.2f}" for i in idx)
        out.append(f'<polyline class="curve" data-agent="{escape(c.agent)}" points="{pts}" '
                   f'fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = top + 10 + 20 * k
        legend.append(f'<line x1="{left + pw + 15}" y1="{ly}" x2="{left + pw + 40}" y2="{ly}" '
                      f'stroke="{color}" stroke-width="2"/>')
        legend.append(f'<text class="legend-entry" x="{left + pw + 45}" y="{ly + 4}">'
                      f'{escape(c.agent)} (FCR {c.fcr_mean:,.0f})</text>')
    legend.append('</g>')
    out += legend
    out.append('</svg>')
    return "\n".join(out) + "\n"
