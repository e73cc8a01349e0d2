"""CSV, JSON and SVG writers with byte-stable output."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FORMATS = ("csv", "json", "svg")


@dataclass
class Table:
    columns: list
    rows: list
    title: str = ""
    x_label: str = "x"
    y_label: str = "y"
    series: dict = field(default_factory=dict)   # name -> (xs, ys), drawn solid
    fits: dict = field(default_factory=dict)     # name -> (xs, ys), drawn dashed
    extra: dict = field(default_factory=dict)


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return "" if v is None else str(v)


def to_csv(table: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    return obj


def to_json(obj) -> str:
    if isinstance(obj, Table):
        obj = {"title": obj.title, "columns": obj.columns, "rows": obj.rows, **obj.extra}
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def _fmt(v):
    return f"{v:.6g}"


def to_svg(table: Table, width=640, height=400) -> str:
    margin = dict(left=70, right=20, top=40, bottom=55)
    pw = width - margin["left"] - margin["right"]
    ph = height - margin["top"] - margin["bottom"]
    curves = [(n, np.asarray(x, float), np.asarray(y, float), False)
              for n, (x, y) in table.series.items()]
    curves += [(n, np.asarray(x, float), np.asarray(y, float), True)
               for n, (x, y) in table.fits.items()]
    pts = [(x, y) for _, xs, ys, _ in curves for x, y in zip(xs, ys)
           if np.isfinite(x) and np.isfinite(y)]
    if pts:
        xs_all, ys_all = np.array(pts).T
        x0, x1 = float(xs_all.min()), float(xs_all.max())
        y0, y1 = float(ys_all.min()), float(ys_all.max())
    else:
        x0, x1, y0, y1 = 0.0, 1.0, 0.0, 1.0
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1

    def px(x):
        return margin["left"] + (x - x0) / (x1 - x0) * pw

    def py(y):
        return margin["top"] + ph - (y - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="14">'
           f'{_escape(table.title)}</text>',
           f'<line x1="{margin["left"]}" y1="{margin["top"] + ph}" x2="{margin["left"] + pw}" '
           f'y2="{margin["top"] + ph}" stroke="black"/>',
           f'<line x1="{margin["left"]}" y1="{margin["top"]}" x2="{margin["left"]}" '
           f'y2="{margin["top"] + ph}" stroke="black"/>']
    for i in range(5):
        xv = x0 + (x1 - x0) * i / 4
        yv = y0 + (y1 - y0) * i / 4
        out.append(f'<text x="{px(xv):.2f}" y="{margin["top"] + ph + 18}" text-anchor="middle" '
                   f'font-size="11">{_fmt(xv)}</text>')
        out.append(f'<text x="{margin["left"] - 6}" y="{py(yv) + 4:.2f}" text-anchor="end" '
                   f'font-size="11">{_fmt(yv)}</text>')
    out.append(f'<text x="{margin["left"] + pw / 2:.1f}" y="{height - 12}" text-anchor="middle" '
               f'font-size="12">{_escape(table.x_label)}</text>')
    out.append(f'<text x="16" y="{margin["top"] + ph / 2:.1f}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 16 {margin["top"] + ph / 2:.1f})">'
               f'{_escape(table.y_label)}</text>')
    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    for i, (name, xs, ys, dashed) in enumerate(curves):
        keep = np.isfinite(xs) & np.isfinite(ys)
        coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs[keep], ys[keep]))
        style = ' stroke-dasharray="6,4"' if dashed else ""
        color = palette[i % len(palette)]
        out.append(f'<polyline class="{"fit" if dashed else "series"}" data-name="{_escape(name)}" '
                   f'fill="none" stroke="{color}" stroke-width="2"{style} points="{coords}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(s):
    return (str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
            .replace('"', "&quot;"))


def render(obj, fmt: str) -> str:
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    table = obj.to_table() if hasattr(obj, "to_table") else obj
    if fmt == "csv":
        return to_csv(table)
    if fmt == "json":
        return to_json(obj.to_json_dict() if hasattr(obj, "to_json_dict") else table)
    return to_svg(table)


def emit(result, fmt: str, path) -> Path:
    """Write result as csv, json or svg; identical inputs give identical bytes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(render(result, fmt))
    return path
