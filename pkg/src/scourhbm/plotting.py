"""Minimal self-contained SVG density plots.

Output is plain text with fixed-precision coordinates, so identical inputs
give identical files.
"""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np
from scipy.stats import gaussian_kde

COLOURS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2")
W, H = 420, 260
PAD_L, PAD_R, PAD_T, PAD_B = 50, 15, 30, 40


def density_curve(x, grid):
    """Gaussian KDE with Silverman bandwidth, evaluated on ``grid``."""
    x = np.asarray(x, dtype=float)
    if np.ptp(x) == 0:
        y = np.zeros_like(grid)
        y[np.argmin(np.abs(grid - x[0]))] = 1.0
        return y
    return gaussian_kde(x, bw_method="silverman")(grid)


def _fmt(v: float) -> str:
    return f"{v:.2f}"


class _Frame:
    def __init__(self, xlim, ylim):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.x1 <= self.x0:
            self.x0, self.x1 = self.x0 - 0.5, self.x1 + 0.5
        if self.y1 <= self.y0:
            self.y1 = self.y0 + 1.0

    def px(self, x):
        return PAD_L + (np.asarray(x) - self.x0) / (self.x1 - self.x0) * (W - PAD_L - PAD_R)

    def py(self, y):
        return H - PAD_B - (np.asarray(y) - self.y0) / (self.y1 - self.y0) * (H - PAD_T - PAD_B)

    def path(self, x, y):
        xs, ys = self.px(x), self.py(y)
        pts = " L".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(xs, ys))
        return "M" + pts

    def vline(self, x):
        return (_fmt(float(self.px(x))), _fmt(float(self.py(self.y0))),
                _fmt(float(self.py(self.y1))))


def _axes(frame: _Frame, title: str, xlabel: str) -> list[str]:
    out = [f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
           f'<line class="axis" x1="{PAD_L}" y1="{H - PAD_B}" x2="{W - PAD_R}" y2="{H - PAD_B}" '
           'stroke="black"/>',
           f'<line class="axis" x1="{PAD_L}" y1="{PAD_T}" x2="{PAD_L}" y2="{H - PAD_B}" '
           'stroke="black"/>']
    for t in np.linspace(frame.x0, frame.x1, 5):
        out.append(f'<text x="{_fmt(float(frame.px(t)))}" y="{H - PAD_B + 14}" '
                   f'text-anchor="middle" font-size="9">{t:.5g}</text>')
    out.append(f'<text x="{W / 2:.1f}" y="{H - 6}" text-anchor="middle" '
               f'font-size="11">{escape(xlabel)}</text>')
    return out


def _document(body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
            f'viewBox="0 0 {W} {H}">')
    return "\n".join([head] + body + ["</svg>"]) + "\n"


def _grid_for(samples, extra=(), n=200):
    lo = min(float(np.min(s)) for s in samples)
    hi = max(float(np.max(s)) for s in samples)
    for v in extra:
        lo, hi = min(lo, v), max(hi, v)
    span = hi - lo or max(abs(hi), 1.0) * 1e-3
    return np.linspace(lo - 0.1 * span, hi + 0.1 * span, n)


def density_panel(chains_samples, name: str, truth: float | None = None) -> str:
    """One panel with a KDE curve per chain and an optional dashed truth line."""
    extra = () if truth is None else (truth,)
    grid = _grid_for(chains_samples, extra)
    curves = [density_curve(s, grid) for s in chains_samples]
    frame = _Frame((grid[0], grid[-1]), (0.0, 1.05 * max(float(c.max()) for c in curves)))
    body = _axes(frame, name, name)
    for i, c in enumerate(curves):
        body.append(f'<path class="density" data-chain="{i + 1}" d="{frame.path(grid, c)}" '
                    f'fill="none" stroke="{COLOURS[i % len(COLOURS)]}" stroke-width="1.2"/>')
    if truth is not None:
        x, y0, y1 = frame.vline(truth)
        body.append(f'<line class="truth" x1="{x}" y1="{y0}" x2="{x}" y2="{y1}" '
                    'stroke="black" stroke-dasharray="5,4"/>')
    return _document(body)


def posterior_panels(chains, truth: dict | None = None) -> dict[str, str]:
    """``{parameter: svg}`` for every parameter of a PosteriorChains."""
    truth = truth or {}
    out = {}
    for j, name in enumerate(chains.names):
        samples = [chains.constrained[c, :, j] for c in range(chains.n_chains)]
        out[name] = density_panel(samples, name, truth.get(name))
    return out


def sweep_plot(reference, rows, title: str = "scour sweep") -> str:
    """Reference predictive density plus one vertical marker per sweep depth."""
    f = reference.frequencies
    grid = _grid_for([f], [m for _, m in rows])
    y = density_curve(f, grid)
    frame = _Frame((grid[0], grid[-1]), (0.0, 1.05 * float(y.max())))
    body = _axes(frame, title, "first bending frequency [Hz]")
    body.append(f'<path class="density" d="{frame.path(grid, y)}" fill="none" '
                'stroke="#1f77b4" stroke-width="1.2"/>')
    for i, (d, m) in enumerate(rows):
        x, y0, y1 = frame.vline(m)
        colour = COLOURS[(i + 1) % len(COLOURS)]
        body.append(f'<line class="marker" data-depth="{d:.3f}" x1="{x}" y1="{y0}" x2="{x}" '
                    f'y2="{y1}" stroke="{colour}"/>')
        body.append(f'<text x="{x}" y="{_fmt(float(frame.py(frame.y1)) - 2 - 9 * (i % 2))}" '
                    f'font-size="8" text-anchor="middle">{d * 100:.0f} cm</text>')
    return _document(body)
