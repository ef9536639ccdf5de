"""Small deterministic SVG charts for sweep and bench CSV files.

Output depends only on the input rows: fixed canvas size, fixed number
formatting, no timestamps or generated ids.
"""
from __future__ import annotations

import csv
import io
import json
import math
import statistics
from collections import defaultdict
from pathlib import Path
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 400
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 130, 40, 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


class ChartError(ValueError):
    pass


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _read_rows(text: str) -> list[dict]:
    reader = csv.DictReader(io.StringIO(text))
    if not reader.fieldnames:
        raise ChartError("CSV has no header")
    return list(reader)


def _series(rows, ycol, transform):
    """{method: [(n, y), ...]} skipping rows whose y is not a finite number."""
    out = defaultdict(list)
    for i, row in enumerate(rows, 2):
        try:
            n = float(row["n"])
            y = float(row[ycol])
        except (KeyError, TypeError, ValueError):
            raise ChartError(f"line {i}: malformed row {row!r}") from None
        if n <= 0:
            raise ChartError(f"line {i}: n must be positive")
        if math.isfinite(y):
            out[row.get("method") or "run"].append((n, transform(y)))
    return out


class _Axes:
    def __init__(self, xs, ys, log_y):
        self.log_y = log_y
        lx = [math.log10(x) for x in xs]
        self.x0, self.x1 = math.floor(min(lx)), math.ceil(max(lx))
        if self.x1 == self.x0:
            self.x1 += 1
        if log_y:
            ly = [math.log10(y) for y in ys]
            self.y0, self.y1 = math.floor(min(ly)), math.ceil(max(ly))
            if self.y1 == self.y0:
                self.y1 += 1
        else:
            self.y0, self.y1 = 0.0, max(ys) * 1.1 if max(ys) > 0 else 1.0
        self.w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
        self.h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def px(self, x):
        return MARGIN_LEFT + (math.log10(x) - self.x0) / (self.x1 - self.x0) * self.w

    def py(self, y):
        v = math.log10(y) if self.log_y else y
        return MARGIN_TOP + self.h - (v - self.y0) / (self.y1 - self.y0) * self.h

    def ticks(self):
        out = []
        for k in range(int(self.x0), int(self.x1) + 1):
            x = self.px(10.0 ** k)
            out.append(f'<line x1="{_fmt(x)}" y1="{_fmt(MARGIN_TOP + self.h)}" x2="{_fmt(x)}" '
                       f'y2="{_fmt(MARGIN_TOP + self.h + 5)}" stroke="#000"/>')
            out.append(f'<text x="{_fmt(x)}" y="{_fmt(MARGIN_TOP + self.h + 20)}" '
                       f'text-anchor="middle">1e{k}</text>')
        if self.log_y:
            levels = [10.0 ** k for k in range(int(self.y0), int(self.y1) + 1)]
            labels = [f"1e{k}" for k in range(int(self.y0), int(self.y1) + 1)]
        else:
            levels = [self.y0 + (self.y1 - self.y0) * i / 4 for i in range(5)]
            labels = [f"{v:.3g}" for v in levels]
        for v, label in zip(levels, labels):
            y = self.py(v)
            out.append(f'<line x1="{_fmt(MARGIN_LEFT - 5)}" y1="{_fmt(y)}" x2="{_fmt(MARGIN_LEFT)}" '
                       f'y2="{_fmt(y)}" stroke="#000"/>')
            out.append(f'<text x="{_fmt(MARGIN_LEFT - 8)}" y="{_fmt(y + 4)}" text-anchor="end">{label}</text>')
        return out


def _line_chart(series, title, xlabel, ylabel, log_y) -> str:
    xs = [n for pts in series.values() for n, _ in pts]
    ys = [y for pts in series.values() for _, y in pts]
    if log_y:
        ys = [y for y in ys if y > 0] or [1.0]
    ax = _Axes(xs, ys, log_y)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="#fff"/>',
        f'<text x="{WIDTH // 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{ax.w}" height="{ax.h}" fill="none" stroke="#000"/>',
        *ax.ticks(),
        f'<text x="{_fmt(MARGIN_LEFT + ax.w / 2)}" y="{HEIGHT - 10}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="16" y="{_fmt(MARGIN_TOP + ax.h / 2)}" text-anchor="middle" '
        f'transform="rotate(-90 16 {_fmt(MARGIN_TOP + ax.h / 2)})">{escape(ylabel)}</text>',
    ]
    for k, method in enumerate(sorted(series)):
        color = PALETTE[k % len(PALETTE)]
        pts = [(n, y) for n, y in series[method] if not log_y or y > 0]
        by_n = defaultdict(list)
        for n, y in pts:
            by_n[n].append(y)
        for n, y in sorted(pts):
            parts.append(f'<circle cx="{_fmt(ax.px(n))}" cy="{_fmt(ax.py(y))}" r="2.5" '
                         f'fill="{color}" fill-opacity="0.4"/>')
        medians = " ".join(
            f"{_fmt(ax.px(n))},{_fmt(ax.py(statistics.median(v)))}" for n, v in sorted(by_n.items())
        )
        parts.append(f'<polyline class="series" data-method="{escape(method)}" points="{medians}" '
                     f'fill="none" stroke="{color}" stroke-width="2"/>')
        ly = MARGIN_TOP + 14 + 18 * k
        parts.append(f'<line x1="{WIDTH - MARGIN_RIGHT + 12}" y1="{ly}" x2="{WIDTH - MARGIN_RIGHT + 32}" '
                     f'y2="{ly}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{WIDTH - MARGIN_RIGHT + 38}" y="{ly + 4}">{escape(method)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_chart_file(path) -> str:
    return render_chart(Path(path).read_text(encoding="utf-8"))


def render_chart(csv_text: str) -> str:
    """SVG line chart (one median polyline per method) from a sweep or bench CSV.

    Sweep files (with an ``error`` column) plot CHSH error against N; bench
    files plot elapsed seconds against N on log-log axes.
    """
    rows = _read_rows(csv_text)
    if not rows:
        raise ChartError("CSV has no data rows")
    cols = set(rows[0])
    if "n" not in cols:
        raise ChartError("CSV lacks the 'n' column")
    if "error" in cols:
        series = _series(rows, "error", float)
        title, ylabel, log_y = "CHSH accuracy vs. accepted samples", "|max S - analytic max S|", False
    elif "elapsed_ns" in cols:
        series = _series(rows, "elapsed_ns", lambda v: v / 1e9)
        title, ylabel, log_y = "Execution time vs. accepted samples", "seconds", True
    else:
        raise ChartError("CSV is neither a sweep (error) nor a bench (elapsed_ns) file")
    if not any(series.values()):
        raise ChartError("CSV has no finite values to plot")
    return _line_chart(series, title, "accepted samples N", ylabel, log_y)


def render_distribution(weights, payload: dict | None = None) -> str:
    """Bar chart of the 16 weights, grouped by context.  ``payload`` is
    embedded as JSON in ``<desc>`` so the file can be re-verified."""
    from eprsim.scenario import vertex_label

    w = [float(v) for v in weights]
    if len(w) != 16:
        raise ChartError("expected 16 weights")
    plot_w = WIDTH - MARGIN_LEFT - 30
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    top = max(1.0, max(w))
    bar = plot_w / 16
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="10">',
    ]
    if payload is not None:
        parts.append(f"<desc>{escape(json.dumps(payload, sort_keys=True))}</desc>")
    parts += [
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="#fff"/>',
        f'<text x="{WIDTH // 2}" y="22" text-anchor="middle" font-size="14">Global distribution</text>',
    ]
    for k, v in enumerate(w):
        h = max(v, 0.0) / top * plot_h
        x = MARGIN_LEFT + k * bar
        color = PALETTE[k // 4]
        parts.append(f'<rect x="{_fmt(x + 2)}" y="{_fmt(MARGIN_TOP + plot_h - h)}" width="{_fmt(bar - 4)}" '
                     f'height="{_fmt(h)}" fill="{color}"/>')
        parts.append(f'<text x="{_fmt(x + bar / 2)}" y="{HEIGHT - MARGIN_BOTTOM + 14}" '
                     f'text-anchor="middle">{vertex_label(k)}</text>')
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = MARGIN_TOP + plot_h - frac * plot_h
        parts.append(f'<text x="{MARGIN_LEFT - 6}" y="{_fmt(y + 3)}" text-anchor="end">{frac * top:.2f}</text>')
    parts.append(f'<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP + plot_h}" x2="{MARGIN_LEFT + plot_w}" '
                 f'y2="{MARGIN_TOP + plot_h}" stroke="#000"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
