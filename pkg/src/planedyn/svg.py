"""Minimal SVG writers: polylines, escape-time heatmaps and decay plots."""
from __future__ import annotations

import math

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")
SIZE = 480
PAD = 40


def _fmt(v: float) -> str:
    return f"{v:.3f}"


class Canvas:
    """Maps a data window onto a square drawing area with y pointing up."""

    def __init__(self, window, size: int = SIZE, pad: int = PAD):
        self.window = tuple(float(v) for v in window)
        self.size = size
        self.pad = pad
        self.items = []

    def xy(self, P):
        x0, x1, y0, y1 = self.window
        P = np.atleast_2d(np.asarray(P, float))
        u = self.pad + (P[:, 0] - x0) / (x1 - x0) * self.size
        v = self.pad + (y1 - P[:, 1]) / (y1 - y0) * self.size
        return u, v

    def polyline(self, P, color="#000", width=1.5, dash=None):
        P = np.asarray(P, float)
        P = P[np.all(np.isfinite(P), axis=1)]
        if len(P) < 2:
            return
        u, v = self.xy(P)
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(u, v))
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.items.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                          f'stroke-width="{width}"{extra}/>')

    def points(self, P, color="#000", r=1.5):
        u, v = self.xy(P)
        for a, b in zip(u, v):
            self.items.append(f'<circle cx="{_fmt(a)}" cy="{_fmt(b)}" r="{r}" fill="{color}"/>')

    def rect(self, x, y, w, h, color):
        # data-space rectangle with lower-left corner (x, y)
        u, v = self.xy([[x, y + h]])
        sx = w / (self.window[1] - self.window[0]) * self.size
        sy = h / (self.window[3] - self.window[2]) * self.size
        self.items.append(f'<rect x="{_fmt(u[0])}" y="{_fmt(v[0])}" width="{_fmt(sx)}" '
                          f'height="{_fmt(sy)}" fill="{color}" stroke="none"/>')

    def text(self, x_px, y_px, s, size=12, anchor="start"):
        self.items.append(f'<text x="{x_px}" y="{y_px}" font-size="{size}" '
                          f'text-anchor="{anchor}" font-family="sans-serif">{s}</text>')

    def frame(self, title=""):
        s, p = self.size, self.pad
        self.items.insert(0, f'<rect x="{p}" y="{p}" width="{s}" height="{s}" fill="none" '
                             f'stroke="#444"/>')
        x0, x1, y0, y1 = self.window
        self.text(p, p + s + 16, f"{x0:g}")
        self.text(p + s, p + s + 16, f"{x1:g}", anchor="end")
        self.text(p - 4, p + s, f"{y0:g}", anchor="end")
        self.text(p - 4, p + 10, f"{y1:g}", anchor="end")
        if title:
            self.text(p + s / 2, p - 12, title, size=14, anchor="middle")

    def render(self) -> str:
        total = self.size + 2 * self.pad
        body = "\n".join(self.items)
        return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" '
                f'viewBox="0 0 {total} {total}">\n{body}\n</svg>\n')

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.render())


def curves_svg(path, curves, window, title="", points=None):
    """``curves`` is a list of (vertices, color) pairs; ``points`` an optional (P, color)."""
    c = Canvas(window)
    for i, item in enumerate(curves):
        V, color = item if isinstance(item, tuple) else (item, PALETTE[i % len(PALETTE)])
        c.polyline(V, color)
    if points is not None and len(points[0]):
        c.points(points[0], points[1])
    c.frame(title)
    c.save(path)


def _heat(t: float) -> str:
    # light yellow to dark red
    r = int(255 - 80 * t)
    g = int(240 * (1 - t))
    b = int(160 * (1 - t))
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap_svg(path, xs, ys, values, no_escape=-1, title=""):
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    hx = xs[1] - xs[0] if len(xs) > 1 else 1.0
    hy = ys[1] - ys[0] if len(ys) > 1 else 1.0
    window = (xs[0] - hx / 2, xs[-1] + hx / 2, ys[0] - hy / 2, ys[-1] + hy / 2)
    c = Canvas(window)
    vmax = max(int(np.max(values)), 1)
    for i, y in enumerate(ys):
        for j, x in enumerate(xs):
            v = int(values[i, j])
            color = "#000000" if v == no_escape else _heat(v / vmax)
            c.rect(x - hx / 2, y - hy / 2, hx, hy, color)
    c.frame(title)
    c.save(path)


def decay_svg(path, radii, sups, threshold, title="sup ratio vs radius"):
    """Log-log decay plot with the verdict threshold as a dashed line."""
    r = np.asarray(radii, float)
    s = np.asarray(sups, float)
    ok = np.isfinite(s) & (s > 0)
    lx = np.log10(r)
    vals = np.concatenate([np.log10(s[ok]), [math.log10(threshold)]])
    pad_x = 0.1 * max(lx[-1] - lx[0], 0.1)
    lo, hi = vals.min() - 0.2, vals.max() + 0.2
    c = Canvas((lx[0] - pad_x, lx[-1] + pad_x, lo, hi))
    c.polyline(np.column_stack([lx[ok], np.log10(s[ok])]), PALETTE[0], 2)
    c.points(np.column_stack([lx[ok], np.log10(s[ok])]), PALETTE[0], 3)
    t = math.log10(threshold)
    c.polyline([[lx[0] - pad_x, t], [lx[-1] + pad_x, t]], PALETTE[1], 1, dash="6,4")
    c.frame(title + " (log10 axes)")
    c.save(path)
