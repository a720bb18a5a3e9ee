"""Minimal self-contained SVG line charts.

Only what the run reports need: auto-scaled axes, optional log-y, a legend,
one chart per file. Output is deterministic for identical input.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=150, top=40, bottom=50)
PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939",
)
MAX_POINTS = 2000


@dataclass
class Series:
    x: np.ndarray
    y: np.ndarray
    label: str = ""
    color: str | None = None
    dashed: bool = False


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    if hi <= lo:
        return np.array([lo])
    raw = (hi - lo) / n
    mag = 10 ** np.floor(np.log10(raw))
    step = mag * min((1, 2, 5, 10), key=lambda s: abs(s * mag - raw))
    start = np.ceil(lo / step) * step
    return np.arange(start, hi + 0.5 * step, step)


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def _thin(x, y):
    if len(x) <= MAX_POINTS:
        return x, y
    idx = np.unique(np.linspace(0, len(x) - 1, MAX_POINTS).astype(int))
    return x[idx], y[idx]


def line_chart(series, path, title="", xlabel="", ylabel="", logy=False, equal_aspect=False) -> Path:
    """Write ``series`` (a list of :class:`Series`) as one SVG chart."""
    xs, ys = [], []
    prepared = []
    for k, s in enumerate(series):
        x, y = np.asarray(s.x, dtype=float), np.asarray(s.y, dtype=float)
        if logy:
            y = np.log10(np.maximum(y, 1e-300))
            y = np.maximum(y, -16.0)
        x, y = _thin(x, y)
        ok = np.isfinite(x) & np.isfinite(y)
        prepared.append((x[ok], y[ok], s, s.color or PALETTE[k % len(PALETTE)]))
        xs.append(x[ok])
        ys.append(y[ok])
    allx = np.concatenate(xs) if xs else np.zeros(1)
    ally = np.concatenate(ys) if ys else np.zeros(1)
    x0, x1 = float(allx.min()), float(allx.max())
    y0, y1 = float(ally.min()), float(ally.max())
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
    if equal_aspect:
        # widen the shorter axis so one unit is the same length on both
        scale = max((x1 - x0) / pw, (y1 - y0) / ph)
        cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
        x0, x1 = cx - 0.5 * scale * pw, cx + 0.5 * scale * pw
        y0, y1 = cy - 0.5 * scale * ph, cy + 0.5 * scale * ph

    def px(x):
        return MARGIN["left"] + (x - x0) / (x1 - x0) * pw

    def py(y):
        return MARGIN["top"] + (1 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
        'fill="none" stroke="#333"/>',
    ]
    for tx in _ticks(x0, x1):
        X = px(tx)
        out.append(f'<line x1="{X:.2f}" y1="{MARGIN["top"]}" x2="{X:.2f}" y2="{MARGIN["top"] + ph}" stroke="#ddd"/>')
        out.append(f'<text x="{X:.2f}" y="{MARGIN["top"] + ph + 16}" text-anchor="middle">{_fmt(tx)}</text>')
    for ty in _ticks(y0, y1):
        Y = py(ty)
        label = f"1e{ty:.0f}" if logy and float(ty).is_integer() else _fmt(10**ty if logy else ty)
        out.append(f'<line x1="{MARGIN["left"]}" y1="{Y:.2f}" x2="{MARGIN["left"] + pw}" y2="{Y:.2f}" stroke="#ddd"/>')
        out.append(f'<text x="{MARGIN["left"] - 6}" y="{Y + 4:.2f}" text-anchor="end">{label}</text>')
    out.append(f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{MARGIN["top"] + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {MARGIN["top"] + ph / 2:.1f})">{escape(ylabel)}</text>'
    )
    for k, (x, y, s, color) in enumerate(prepared):
        if len(x) == 0:
            continue
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
        dash = ' stroke-dasharray="5,3"' if s.dashed else ""
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.3"{dash}/>')
        if s.label:
            ly = MARGIN["top"] + 12 + 15 * k
            lx = MARGIN["left"] + pw + 10
            out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 18}" y2="{ly - 4}" stroke="{color}" stroke-width="2"{dash}/>')
            out.append(f'<text x="{lx + 24}" y="{ly}">{escape(s.label)}</text>')
    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n")
    return path


def trajectory_chart(run, path, title="trajectories") -> Path:
    """Navigator path (black, dashed) and every vehicle's path in the plane."""
    series = [Series(run.nav[:, 0, 0], run.nav[:, 0, 1], "navigator", "#000000", dashed=True)]
    for i in range(run.m):
        series.append(Series(run.states[:, i, 0], run.states[:, i, 1], f"vehicle {i + 1}"))
    return line_chart(series, path, title, "x [m]", "y [m]", equal_aspect=True)


def error_chart(runs: dict, path, metric: str = "e_tilde", title=None) -> Path:
    """Overlay of one averaged error metric for several named runs (log scale)."""
    series = [Series(r.t, getattr(r, metric), name) for name, r in runs.items()]
    label = {"e_tilde": "mean |y_i - y_0|", "eps_tilde": "mean |y_i - z_i|"}.get(metric, metric)
    return line_chart(series, path, title or label, "t [s]", label, logy=True)


def plot_run(run, out_dir, name: str) -> list[Path]:
    out_dir = Path(out_dir)
    return [
        trajectory_chart(run, out_dir / f"{name}_trajectory.svg", f"{name}: trajectories"),
        line_chart(
            [Series(run.t, run.e_tilde, "mean |y_i - y_0|"), Series(run.t, run.eps_tilde, "mean |y_i - z_i|")],
            out_dir / f"{name}_errors.svg", f"{name}: tracking errors", "t [s]", "error [m]", logy=True,
        ),
    ]
