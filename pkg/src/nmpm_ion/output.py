"""CSV and SVG writers.  Output is byte-stable for identical input."""

from __future__ import annotations

import math
from dataclasses import astuple
from pathlib import Path
from xml.sax.saxutils import escape

from .experiments import CSV_HEADER, SWEEP_PREFIX

FLOAT_FMT = "%.12e"

# (field, legend label, stroke colour, dash pattern)
SERIES = (
    ("pe_pert", "perturbative", "#c0392b", "8,5"),
    ("pe_small_rot", "small-rotation", "#000000", "2,3"),
    ("pe_exact", "exact", "#1f5fa8", None),
)

WIDTH, HEIGHT = 720, 440
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 160, 40, 55


def _fmt(x) -> str:
    return FLOAT_FMT % x if isinstance(x, float) else str(x)


def _write_lines(path: Path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def write_comparison_csv(rows, path) -> Path:
    return _write_lines(path, CSV_HEADER, (astuple(r) for r in rows))


def write_sweep_csv(rows, path) -> Path:
    header = SWEEP_PREFIX + CSV_HEADER + ("error",)
    return _write_lines(path, header, (r.values() for r in rows))


def _nice_ticks(lo: float, hi: float, target: int = 6) -> list[float]:
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / target
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step - 1e-9) * step
    ticks, t = [], start
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 10))
        t += step
    return ticks


def render_comparison_svg(rows, title: str = "") -> str:
    taus = [r.tau for r in rows]
    x0, x1 = min(taus), max(taus)
    if x1 == x0:
        x1 = x0 + 1.0
    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B

    def sx(x):
        return MARGIN_L + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return MARGIN_T + (1.0 - y) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" '
        'fill="none" stroke="#444444" stroke-width="1"/>',
    ]
    for t in _nice_ticks(x0, x1):
        x = sx(t)
        out.append(f'<line x1="{x:.2f}" y1="{MARGIN_T + ph}" x2="{x:.2f}" '
                   f'y2="{MARGIN_T + ph + 5}" stroke="#444444"/>')
        out.append(f'<text x="{x:.2f}" y="{MARGIN_T + ph + 20}" font-size="12" '
                   f'text-anchor="middle" font-family="sans-serif">{t:g}</text>')
    for t in (0.0, 0.2, 0.4, 0.6, 0.8, 1.0):
        y = sy(t)
        out.append(f'<line x1="{MARGIN_L - 5}" y1="{y:.2f}" x2="{MARGIN_L}" '
                   f'y2="{y:.2f}" stroke="#444444"/>')
        out.append(f'<text x="{MARGIN_L - 9}" y="{y + 4:.2f}" font-size="12" '
                   f'text-anchor="end" font-family="sans-serif">{t:g}</text>')
    out.append(f'<text x="{MARGIN_L + pw / 2:.2f}" y="{HEIGHT - 12}" font-size="14" '
               'text-anchor="middle" font-family="sans-serif">tau</text>')
    out.append(f'<text x="18" y="{MARGIN_T + ph / 2:.2f}" font-size="14" '
               'text-anchor="middle" font-family="sans-serif" '
               f'transform="rotate(-90 18 {MARGIN_T + ph / 2:.2f})">P_e</text>')
    if title:
        out.append(f'<text x="{MARGIN_L + pw / 2:.2f}" y="{MARGIN_T - 14}" font-size="14" '
                   f'text-anchor="middle" font-family="sans-serif">{escape(title)}</text>')
    for i, (attr, label, colour, dash) in enumerate(SERIES):
        pts = " ".join(
            f"{sx(r.tau):.2f},{sy(getattr(r, attr)):.2f}"
            for r in rows
            if math.isfinite(getattr(r, attr))
        )
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        out.append(f'<polyline id="series-{attr}" fill="none" stroke="{colour}" '
                   f'stroke-width="1.5"{dash_attr} points="{pts}"/>')
        ly = MARGIN_T + 20 + 22 * i
        lx = MARGIN_L + pw + 15
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 30}" y2="{ly}" stroke="{colour}" '
                   f'stroke-width="1.5"{dash_attr}/>')
        out.append(f'<text x="{lx + 36}" y="{ly + 4}" font-size="12" '
                   f'font-family="sans-serif">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_comparison_svg(rows, path, title: str = "") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_comparison_svg(rows, title), newline="\n")
    return path
