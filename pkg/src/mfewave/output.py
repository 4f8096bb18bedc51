"""CSV tables with a commented config header, and minimal standalone SVG plots."""

import json
import os

import numpy as np

from . import __version__
from .config import flatten


def fmt(x):
    """17 significant digits; round-trips every finite double exactly."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return "%.17g" % float(x)


# execution-only settings; they never change the numbers, so they are not echoed
NOT_ECHOED = ("output.dir", "run.workers")


def header_lines(command, cfg, summary=None):
    lines = [f"# mfewave {__version__}", f"# command: {command}"]
    for key, val in flatten(cfg):
        if key in NOT_ECHOED:
            continue
        lines.append(f"# config.{key}: {json.dumps(val)}")
    for key, val in (summary or {}).items():
        lines.append(f"# summary.{key}: {fmt(val) if not isinstance(val, (list, tuple)) else json.dumps(val)}")
    return lines


def write_csv(path, command, cfg, columns, rows, summary=None):
    """Write ``rows`` (iterable of sequences) below the ``#`` header block."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in header_lines(command, cfg, summary):
            fh.write(line + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return path


def write_matrix_csv(path, command, cfg, row_label, row_values, col_values, matrix, summary=None):
    """Matrix with one labelled leading column; column names carry the column coordinates."""
    columns = [row_label] + [f"t={fmt(c)}" for c in col_values]
    rows = (np.concatenate(([r], matrix[i])) for i, r in enumerate(row_values))
    return write_csv(path, command, cfg, columns, rows, summary)


def read_csv(path):
    """Return (meta, columns, data) where meta maps header keys to raw strings.

    ``data`` is a float array when every cell is numeric, else a list of rows.
    """
    meta = {}
    columns = None
    data = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                body = line[1:].strip()
                if ": " in body:
                    key, val = body.split(": ", 1)
                    meta[key] = val
                continue
            if columns is None:
                columns = line.split(",")
                continue
            if line:
                data.append([_parse(v) for v in line.split(",")])
    if all(isinstance(v, float) for row in data for v in row):
        return meta, columns, np.array(data, dtype=float).reshape(-1, len(columns or []))
    return meta, columns, data


def _parse(v):
    try:
        return float(v)
    except ValueError:
        return v


# --- SVG ------------------------------------------------------------------

_STOPS = np.array([
    [68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37],
], dtype=float)


def _color(v):
    v = min(max(v, 0.0), 1.0) * (len(_STOPS) - 1)
    i = min(int(v), len(_STOPS) - 2)
    c = _STOPS[i] + (v - i) * (_STOPS[i + 1] - _STOPS[i])
    return "#%02x%02x%02x" % tuple(int(round(x)) for x in c)


def _svg(width, height, body, title):
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n'
        f'<rect width="{width}" height="{height}" fill="white"/>\n'
        f'<text x="{width / 2:.1f}" y="18" font-family="sans-serif" font-size="14" '
        f'text-anchor="middle">{title}</text>\n' + body + "</svg>\n"
    )


def heatmap_svg(matrix, x_range, y_range, title="", xlabel="t", ylabel="x", max_cells=160):
    """Heatmap of matrix[row=y, col=x] on a linear color scale, downsampled to max_cells."""
    matrix = np.asarray(matrix, dtype=float)
    ry = max(1, -(-matrix.shape[0] // max_cells))
    rx = max(1, -(-matrix.shape[1] // max_cells))
    sub = matrix[::ry, ::rx]
    lo, hi = float(np.min(sub)), float(np.max(sub))
    span = hi - lo if hi > lo else 1.0
    ny, nx = sub.shape
    left, top, pw, ph = 60, 30, 480, 320
    cw, ch = pw / nx, ph / ny
    parts = []
    for i in range(ny):
        y = top + ph - (i + 1) * ch
        for j in range(nx):
            parts.append(
                f'<rect x="{left + j * cw:.2f}" y="{y:.2f}" width="{cw + 0.05:.2f}" '
                f'height="{ch + 0.05:.2f}" fill="{_color((sub[i, j] - lo) / span)}"/>\n'
            )
    # color bar
    for i in range(50):
        parts.append(
            f'<rect x="{left + pw + 20}" y="{top + ph - (i + 1) * ph / 50:.2f}" width="12" '
            f'height="{ph / 50 + 0.05:.2f}" fill="{_color(i / 49)}"/>\n'
        )
    parts.append(_label(left + pw + 36, top + 10, f"{hi:.3g}", "start"))
    parts.append(_label(left + pw + 36, top + ph, f"{lo:.3g}", "start"))
    parts.append(_axes(left, top, pw, ph, x_range, y_range, xlabel, ylabel))
    return _svg(left + pw + 100, top + ph + 50, "".join(parts), title)


def line_svg(series, title="", xlabel="", ylabel="", logy=False):
    """Polyline plot of ``{name: (x, y)}``."""
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f", "#17becf"]
    xs = np.concatenate([np.asarray(x, float) for x, _ in series.values()])
    ys = np.concatenate([np.asarray(y, float) for _, y in series.values()])
    if logy:
        ys = np.log10(np.maximum(ys, 1e-300))
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0
    left, top, pw, ph = 70, 30, 480, 320
    parts = []
    for c, (name, (x, y)) in enumerate(series.items()):
        y = np.asarray(y, float)
        if logy:
            y = np.log10(np.maximum(y, 1e-300))
        px = left + (np.asarray(x, float) - x0) / (x1 - x0) * pw
        py = top + ph - (y - y0) / (y1 - y0) * ph
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
        col = colors[c % len(colors)]
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{col}" stroke-width="1.5"/>\n')
        parts.append(_label(left + pw + 10, top + 14 * (c + 1), name, "start", col))
    ylab = f"log10 {ylabel}" if logy else ylabel
    parts.append(_axes(left, top, pw, ph, (x0, x1), (y0, y1), xlabel, ylab))
    return _svg(left + pw + 140, top + ph + 50, "".join(parts), title)


def _label(x, y, text, anchor="middle", color="black"):
    return (f'<text x="{x:.1f}" y="{y:.1f}" font-family="sans-serif" font-size="11" '
            f'text-anchor="{anchor}" fill="{color}">{text}</text>\n')


def _axes(left, top, pw, ph, x_range, y_range, xlabel, ylabel):
    out = [f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>\n']
    out.append(_label(left, top + ph + 15, f"{x_range[0]:.3g}"))
    out.append(_label(left + pw, top + ph + 15, f"{x_range[1]:.3g}"))
    out.append(_label(left + pw / 2, top + ph + 35, xlabel))
    out.append(_label(left - 5, top + ph, f"{y_range[0]:.3g}", "end"))
    out.append(_label(left - 5, top + 10, f"{y_range[1]:.3g}", "end"))
    out.append(_label(left - 40, top + ph / 2, ylabel))
    return "".join(out)


def write_text(path, text):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path
