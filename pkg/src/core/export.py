from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np
import pandas as pd

from src.core.curve import DensityCurve
from src.core.states import EmpiricalSample

FLOAT_FORMAT = "%.17g"

SVG_WIDTH = 640
SVG_HEIGHT = 400
SVG_MARGIN = 48


def _prepare(path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def format_value(value) -> str:
    if isinstance(value, (float, np.floating)):
        return "nan" if math.isnan(value) else FLOAT_FORMAT % value
    return str(value)


def write_curve(curve: DensityCurve, path: Path) -> Path:
    path = _prepare(path)
    curve.to_frame().to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def write_samples(sample: EmpiricalSample, path: Path) -> Path:
    """
    One value per line, no header; complex values as `re,im`.
    """
    path = _prepare(path)
    if sample.is_complex:
        df = pd.DataFrame({"re": sample.values.real, "im": sample.values.imag})
    else:
        df = pd.DataFrame({"value": sample.values})
    df.to_csv(path, index=False, header=False, float_format=FLOAT_FORMAT)
    return path


def write_histogram(frame: pd.DataFrame, path: Path) -> Path:
    path = _prepare(path)
    frame[["bin_left", "bin_right", "count"]].to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def write_report(report: dict, path: Path) -> Path:
    path = _prepare(path)
    df = pd.DataFrame(
        {"metric": list(report), "value": [format_value(v) for v in report.values()]}
    )
    df.to_csv(path, index=False)
    return path


def render_svg(curve: DensityCurve, title: str | None = None) -> str:
    """
    Static SVG 1.1 plot: axes, the density polyline and a tick at every knot.
    Infinite density values are clipped to the top of the plot.
    """
    x = np.asarray(curve.x, dtype=float)
    y = np.asarray(curve.density, dtype=float)
    finite = y[np.isfinite(y)]
    y_top = float(finite.max()) * 1.05 if finite.size and finite.max() > 0 else 1.0
    y = np.where(np.isfinite(y), np.minimum(y, y_top), y_top)

    x_lo, x_hi = float(x.min()), float(x.max())
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    plot_w = SVG_WIDTH - 2 * SVG_MARGIN
    plot_h = SVG_HEIGHT - 2 * SVG_MARGIN
    base = SVG_HEIGHT - SVG_MARGIN

    def px(v: float) -> float:
        return SVG_MARGIN + (v - x_lo) / (x_hi - x_lo) * plot_w

    def py(v: float) -> float:
        return base - v / y_top * plot_h

    points = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{SVG_WIDTH}" height="{SVG_HEIGHT}">',
        f'<line x1="{SVG_MARGIN}" y1="{base}" x2="{SVG_WIDTH - SVG_MARGIN}" y2="{base}" '
        'stroke="black"/>',
        f'<line x1="{SVG_MARGIN}" y1="{base}" x2="{SVG_MARGIN}" y2="{SVG_MARGIN}" stroke="black"/>',
    ]
    for knot in curve.knots:
        if x_lo <= knot <= x_hi:
            k = px(knot)
            lines.append(
                f'<line class="knot" x1="{k:.2f}" y1="{base}" x2="{k:.2f}" y2="{base + 6}" '
                'stroke="red"/>'
            )
    lines.append(f'<polyline fill="none" stroke="navy" stroke-width="1.5" points="{points}"/>')
    lines.append(
        f'<text x="{SVG_MARGIN}" y="{base + 20}" font-size="11">{x_lo:.6g}</text>'
        f'<text x="{SVG_WIDTH - SVG_MARGIN}" y="{base + 20}" font-size="11" '
        f'text-anchor="end">{x_hi:.6g}</text>'
        f'<text x="{SVG_MARGIN - 4}" y="{SVG_MARGIN}" font-size="11" '
        f'text-anchor="end">{y_top:.4g}</text>'
    )
    if title:
        lines.append(
            f'<text x="{SVG_WIDTH / 2}" y="{SVG_MARGIN / 2}" text-anchor="middle" '
            f'font-size="13">{escape(title)}</text>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def write_svg(curve: DensityCurve, path: Path, title: str | None = None) -> Path:
    path = _prepare(path)
    path.write_text(render_svg(curve, title), encoding="utf-8")
    return path
