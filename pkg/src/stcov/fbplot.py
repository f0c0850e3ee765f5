"""Functional boxplot summaries and deterministic SVG rendering.

The deepest curve by modified band depth is the median; the pointwise
envelope of the deepest half is the 50% central region; fences inflate that
region by a factor (1.5 by default) and curves escaping them at any lag are
outliers.  Colors follow the usual convention: magenta central region,
black median, red outliers, dashed green zero-reference line.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .depth import modified_band_depth_counts
from .estimate import CurveSet

__all__ = [
    "BoxplotSummary",
    "functional_boxplot",
    "render_svg",
    "summary_to_json_dict",
    "write_fbplot",
]


@dataclass
class BoxplotSummary:
    """Summary statistics behind a functional boxplot."""

    median_index: int
    central_lower: np.ndarray
    central_upper: np.ndarray
    fence_lower: np.ndarray
    fence_upper: np.ndarray
    whisker_lower: np.ndarray
    whisker_upper: np.ndarray
    outlier_indices: tuple
    central_indices: tuple
    factor: float
    lags: np.ndarray
    median_max_abs: float
    median_sign: int
    mbd: np.ndarray


def _coerce_curves(curves):
    if isinstance(curves, CurveSet):
        return curves.curves, np.asarray(curves.lags, dtype=float)
    Y = np.asarray(curves, dtype=float)
    return Y, np.arange(Y.shape[1], dtype=float)


def functional_boxplot(curves, factor: float = 1.5) -> BoxplotSummary:
    """Compute the functional boxplot summary of a curve collection.

    ``curves`` is a :class:`CurveSet` or an (N, T) array with N >= 3.
    ``factor`` scales the central region's height to place the fences;
    increasing it never adds outliers.
    """
    Y, lags = _coerce_curves(curves)
    if Y.shape[0] < 3:
        raise ValueError(f"functional boxplot needs at least 3 curves, got {Y.shape[0]}")
    if not factor > 0:
        raise ValueError(f"inflation factor must be > 0, got {factor}")
    mbd_cnt, mbd_den = modified_band_depth_counts(Y)
    order = np.lexsort((np.arange(Y.shape[0]), -mbd_cnt))
    median_index = int(order[0])
    n_central = int(np.ceil(Y.shape[0] / 2))
    central_idx = order[:n_central]
    central_lower = Y[central_idx].min(axis=0)
    central_upper = Y[central_idx].max(axis=0)
    height = central_upper - central_lower
    fence_lower = central_lower - factor * height
    fence_upper = central_upper + factor * height
    outside = (Y > fence_upper) | (Y < fence_lower)
    outlier_mask = outside.any(axis=1)
    outliers = np.flatnonzero(outlier_mask)
    non_out = Y[~outlier_mask]
    whisker_lower = non_out.min(axis=0)
    whisker_upper = non_out.max(axis=0)
    median = Y[median_index]
    k = int(np.argmax(np.abs(median)))
    return BoxplotSummary(
        median_index=median_index,
        central_lower=central_lower,
        central_upper=central_upper,
        fence_lower=fence_lower,
        fence_upper=fence_upper,
        whisker_lower=whisker_lower,
        whisker_upper=whisker_upper,
        outlier_indices=tuple(int(i) for i in outliers),
        central_indices=tuple(int(i) for i in central_idx),
        factor=float(factor),
        lags=lags,
        median_max_abs=float(np.abs(median[k])),
        median_sign=int(np.sign(median[k])),
        mbd=mbd_cnt / mbd_den,
    )


def summary_to_json_dict(summary: BoxplotSummary) -> dict:
    """JSON-ready view of a summary (arrays as lists, indices sorted)."""
    return {
        "median_index": summary.median_index,
        "central_indices": sorted(summary.central_indices),
        "outlier_indices": sorted(summary.outlier_indices),
        "factor": summary.factor,
        "lags": [int(u) for u in summary.lags],
        "central_lower": list(summary.central_lower),
        "central_upper": list(summary.central_upper),
        "fence_lower": list(summary.fence_lower),
        "fence_upper": list(summary.fence_upper),
        "whisker_lower": list(summary.whisker_lower),
        "whisker_upper": list(summary.whisker_upper),
        "mbd": list(summary.mbd),
        "median_max_abs": summary.median_max_abs,
        "median_sign": summary.median_sign,
        "notes": "median_max_abs and median_sign are reporting conveniences "
        "derived from the boxplot, not part of the hypothesis test",
    }


DEFAULT_OPTIONS = {
    "title": "",
    "xlabel": "temporal lag",
    "ylabel": "test function",
    "zero_line": True,
    "width": 800,
    "height": 500,
    "color_central": "magenta",
    "color_median": "black",
    "color_outlier": "red",
    "color_whisker": "blue",
    "color_zero": "green",
}


def _fmt(v: float) -> str:
    return f"{v:.2f}"


class _Canvas:
    """Linear data-to-pixel mapping inside fixed margins."""

    def __init__(self, width, height, x_range, y_range):
        self.ml, self.mr, self.mt, self.mb = 62.0, 18.0, 42.0, 48.0
        self.width, self.height = float(width), float(height)
        self.x0, self.x1 = x_range
        self.y0, self.y1 = y_range
        if self.x1 == self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 == self.y0:
            self.y0, self.y1 = self.y0 - 1.0, self.y1 + 1.0

    def x(self, v):
        f = (v - self.x0) / (self.x1 - self.x0)
        return self.ml + f * (self.width - self.ml - self.mr)

    def y(self, v):
        f = (v - self.y0) / (self.y1 - self.y0)
        return self.height - self.mb - f * (self.height - self.mt - self.mb)

    def polyline(self, xs, ys) -> str:
        return " ".join(f"{_fmt(self.x(a))},{_fmt(self.y(b))}" for a, b in zip(xs, ys))


def render_svg(summary: BoxplotSummary, curves, options: dict | None = None) -> str:
    """Render a functional boxplot as a standalone SVG document string.

    The output is byte-stable for fixed inputs and options.  Outlier curves
    are emitted as ``<path class="outlier">`` elements so they can be
    counted programmatically.
    """
    opts = dict(DEFAULT_OPTIONS)
    if options:
        unknown = set(options) - set(DEFAULT_OPTIONS)
        if unknown:
            raise ValueError(f"unknown render options: {sorted(unknown)}")
        opts.update(options)
    Y, _ = _coerce_curves(curves)
    lags = np.asarray(summary.lags, dtype=float)

    y_parts = [summary.whisker_lower, summary.whisker_upper, summary.central_lower,
               summary.central_upper, Y[summary.median_index]]
    for i in summary.outlier_indices:
        y_parts.append(Y[i])
    y_all = np.concatenate(y_parts)
    y_min, y_max = float(y_all.min()), float(y_all.max())
    if opts["zero_line"]:
        y_min, y_max = min(y_min, 0.0), max(y_max, 0.0)
    pad = 0.05 * (y_max - y_min if y_max > y_min else 1.0)
    cv = _Canvas(opts["width"], opts["height"], (lags[0], lags[-1]), (y_min - pad, y_max + pad))

    e = []
    e.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{opts["width"]}" '
        f'height="{opts["height"]}" viewBox="0 0 {opts["width"]} {opts["height"]}">'
    )
    e.append(f'<rect width="{opts["width"]}" height="{opts["height"]}" fill="white"/>')
    if opts["title"]:
        e.append(
            f'<text x="{_fmt(opts["width"] / 2)}" y="24" text-anchor="middle" '
            f'font-family="sans-serif" font-size="16">{_esc(opts["title"])}</text>'
        )

    # central region
    poly = cv.polyline(lags, summary.central_upper) + " " + cv.polyline(
        lags[::-1], summary.central_lower[::-1]
    )
    e.append(f'<polygon points="{poly}" fill="{opts["color_central"]}" fill-opacity="0.55" stroke="none"/>')

    # whisker envelope and center bars
    for env in (summary.whisker_lower, summary.whisker_upper):
        e.append(
            f'<path class="whisker" d="M {cv.polyline(lags, env).replace(" ", " L ")}" '
            f'fill="none" stroke="{opts["color_whisker"]}" stroke-width="1.2"/>'
        )
    mid = lags[(lags.size - 1) // 2]
    kmid = (lags.size - 1) // 2
    for top, bot in (
        (summary.whisker_upper[kmid], summary.central_upper[kmid]),
        (summary.central_lower[kmid], summary.whisker_lower[kmid]),
    ):
        e.append(
            f'<line class="whisker-bar" x1="{_fmt(cv.x(mid))}" y1="{_fmt(cv.y(top))}" '
            f'x2="{_fmt(cv.x(mid))}" y2="{_fmt(cv.y(bot))}" '
            f'stroke="{opts["color_whisker"]}" stroke-width="1.2"/>'
        )

    # zero reference
    if opts["zero_line"]:
        e.append(
            f'<line class="zero" x1="{_fmt(cv.x(lags[0]))}" y1="{_fmt(cv.y(0.0))}" '
            f'x2="{_fmt(cv.x(lags[-1]))}" y2="{_fmt(cv.y(0.0))}" '
            f'stroke="{opts["color_zero"]}" stroke-width="1.2" stroke-dasharray="6,4"/>'
        )

    # outliers, then median on top
    for i in summary.outlier_indices:
        e.append(
            f'<path class="outlier" d="M {cv.polyline(lags, Y[i]).replace(" ", " L ")}" '
            f'fill="none" stroke="{opts["color_outlier"]}" stroke-width="1"/>'
        )
    e.append(
        f'<path class="median" d="M {cv.polyline(lags, Y[summary.median_index]).replace(" ", " L ")}" '
        f'fill="none" stroke="{opts["color_median"]}" stroke-width="2"/>'
    )

    # axes
    x_px0, x_px1 = cv.x(lags[0]), cv.x(lags[-1])
    y_px0, y_px1 = cv.y(cv.y0), cv.y(cv.y1)
    e.append(
        f'<line x1="{_fmt(x_px0)}" y1="{_fmt(y_px0)}" x2="{_fmt(x_px1)}" y2="{_fmt(y_px0)}" '
        f'stroke="black" stroke-width="1"/>'
    )
    e.append(
        f'<line x1="{_fmt(x_px0)}" y1="{_fmt(y_px0)}" x2="{_fmt(x_px0)}" y2="{_fmt(y_px1)}" '
        f'stroke="black" stroke-width="1"/>'
    )
    tick_lags = lags if lags.size <= 16 else lags[:: int(np.ceil(lags.size / 16))]
    for u in tick_lags:
        xp = cv.x(u)
        e.append(
            f'<line x1="{_fmt(xp)}" y1="{_fmt(y_px0)}" x2="{_fmt(xp)}" y2="{_fmt(y_px0 + 5)}" '
            f'stroke="black" stroke-width="1"/>'
        )
        e.append(
            f'<text x="{_fmt(xp)}" y="{_fmt(y_px0 + 18)}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{int(u)}</text>'
        )
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        yv = cv.y0 + frac * (cv.y1 - cv.y0)
        yp = cv.y(yv)
        e.append(
            f'<line x1="{_fmt(x_px0 - 5)}" y1="{_fmt(yp)}" x2="{_fmt(x_px0)}" y2="{_fmt(yp)}" '
            f'stroke="black" stroke-width="1"/>'
        )
        e.append(
            f'<text x="{_fmt(x_px0 - 8)}" y="{_fmt(yp + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{yv:.3g}</text>'
        )
    e.append(
        f'<text x="{_fmt((x_px0 + x_px1) / 2)}" y="{_fmt(y_px0 + 36)}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">{_esc(opts["xlabel"])}</text>'
    )
    e.append(
        f'<text x="16" y="{_fmt((y_px0 + y_px1) / 2)}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13" '
        f'transform="rotate(-90 16 {_fmt((y_px0 + y_px1) / 2)})">{_esc(opts["ylabel"])}</text>'
    )
    e.append("</svg>")
    return "\n".join(e) + "\n"


def _esc(s: str) -> str:
    return (
        str(s)
        .replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )


def write_fbplot(summary: BoxplotSummary, curves, svg_path, options=None) -> Path:
    """Write the SVG and its JSON summary sidecar; returns the SVG path."""
    svg_path = Path(svg_path)
    svg_path.write_text(render_svg(summary, curves, options))
    with open(svg_path.with_suffix(".json"), "w") as fh:
        json.dump(summary_to_json_dict(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return svg_path
