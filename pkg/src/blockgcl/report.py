"""CSV outputs with an embedded config header, and static SVG line charts.

Every CSV written here starts with ``# key = value`` comment lines holding
the fully resolved configuration, followed by a normal header row.
"""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from pathlib import Path
from xml.sax.saxutils import escape

RESULTS_COLUMNS = [
    "dataset", "mode", "depth", "block_size", "acc_mean", "acc_std",
    "final_mad_last_layer", "runs", "seeds", "status",
]
MAD_COLUMNS = ["layer", "mad"]


class SchemaError(ValueError):
    pass


def fmt(v) -> str:
    if v is None:
        return "undefined"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def config_header(config: dict) -> str:
    lines = []
    for key, value in config.items():
        if isinstance(value, (list, tuple)):
            value = ",".join(fmt(v) for v in value)
        else:
            value = fmt(value)
        lines.append(f"# {key} = {value}\n")
    return "".join(lines)


def write_csv(path, columns, rows, config: dict | None = None) -> Path:
    path = Path(path)
    buf = io.StringIO()
    if config:
        buf.write(config_header(config))
    buf.write(",".join(columns) + "\n")
    for row in rows:
        if isinstance(row, dict):
            row = [row.get(c) for c in columns]
        buf.write(",".join(fmt(v) for v in row) + "\n")
    path.write_text(buf.getvalue(), encoding="utf-8", newline="\n")
    return path


def read_csv(path) -> tuple[dict, list[str], list[dict]]:
    """Return ``(config, columns, rows)``; rows are dicts of strings."""
    config: dict = {}
    body = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            config[key.strip()] = value.strip()
        elif line.strip():
            body.append(line)
    if not body:
        raise SchemaError(f"{path}: no header row")
    reader = csv.DictReader(body)
    rows = list(reader)
    return config, list(reader.fieldnames or []), rows


def open_loss_log(path, config: dict):
    """Open the ``epoch,block,loss,wall_ms`` log for appending, writing the header if new."""
    path = Path(path)
    fresh = not path.exists() or path.stat().st_size == 0
    fh = path.open("a", encoding="utf-8", newline="\n")
    if fresh:
        fh.write(config_header(config))
        fh.write("epoch,block,loss,wall_ms\n")
    return fh


def write_mad_csv(path, profile, config: dict | None = None) -> Path:
    rows = [[layer, v] for layer, v in zip(profile.layers, profile.values)]
    return write_csv(path, MAD_COLUMNS, rows, config)


def write_embeddings_csv(path, z, config: dict | None = None) -> Path:
    cols = ["node"] + [f"dim{j}" for j in range(z.shape[1])]
    rows = ([i] + [float(v) for v in row] for i, row in enumerate(z))
    return write_csv(path, cols, rows, config)


# ---------------------------------------------------------------- SVG charts

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=170, top=40, bottom=60)
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    out = []
    t = start
    while t <= hi + 1e-9 * step:
        out.append(round(t, 10))
        t += step
    return out


def line_chart_svg(series: dict, title: str, xlabel: str, ylabel: str, log2_x: bool = False) -> str:
    """Render ``{name: [(x, y), ...]}`` as a standalone SVG document."""
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
    x0, y0 = MARGIN["left"], MARGIN["top"] + ph
    pts = [(x, y) for s in series.values() for x, y in s if y is not None and not math.isnan(y)]
    tx = (lambda x: math.log2(x)) if log2_x else (lambda x: x)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<line class="axis" x1="{x0}" y1="{y0}" x2="{x0 + pw}" y2="{y0}" stroke="black"/>',
        f'<line class="axis" x1="{x0}" y1="{y0}" x2="{x0}" y2="{MARGIN["top"]}" stroke="black"/>',
        f'<text x="{x0 + pw / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="18" y="{MARGIN["top"] + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 18 {MARGIN["top"] + ph / 2:.1f})">{escape(ylabel)}</text>',
    ]
    if not pts:
        out.append(
            f'<text class="no-data" x="{x0 + pw / 2:.1f}" y="{MARGIN["top"] + ph / 2:.1f}" '
            f'text-anchor="middle" fill="#888">no data</text>'
        )
        out.append("</svg>")
        return "\n".join(out) + "\n"

    xs = [tx(x) for x, _ in pts]
    ys = [y for _, y in pts]
    xlo, xhi = min(xs), max(xs)
    ylo, yhi = min(0.0, min(ys)), max(ys)
    if xhi == xlo:
        xlo, xhi = xlo - 1, xhi + 1
    if yhi == ylo:
        yhi = ylo + 1
    yhi += 0.05 * (yhi - ylo)

    def sx(x):
        return x0 + (tx(x) - xlo) / (xhi - xlo) * pw

    def sy(y):
        return y0 - (y - ylo) / (yhi - ylo) * ph

    xticks = sorted({x for x, _ in pts}) if log2_x or len({x for x, _ in pts}) <= 12 else None
    if xticks is None:
        xticks = [t for t in _ticks(xlo, xhi)]
    for t in xticks:
        px = sx(t)
        out.append(f'<line x1="{px:.2f}" y1="{y0}" x2="{px:.2f}" y2="{y0 + 5}" stroke="black"/>')
        out.append(f'<text x="{px:.2f}" y="{y0 + 18}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(ylo, yhi):
        py = sy(t)
        out.append(f'<line x1="{x0 - 5}" y1="{py:.2f}" x2="{x0}" y2="{py:.2f}" stroke="black"/>')
        out.append(f'<text x="{x0 - 8}" y="{py + 4:.2f}" text-anchor="end">{t:g}</text>')

    for k, (name, s) in enumerate(series.items()):
        color = PALETTE[k % len(PALETTE)]
        good = [(x, y) for x, y in sorted(s) if y is not None and not math.isnan(y)]
        if good:
            coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in good)
            out.append(
                f'<polyline class="series" data-name="{escape(name)}" points="{coords}" '
                f'fill="none" stroke="{color}" stroke-width="2"/>'
            )
            for x, y in good:
                out.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="{color}"/>')
        ly = MARGIN["top"] + 10 + 18 * k
        lx = WIDTH - MARGIN["right"] + 15
        out.append(
            f'<g class="legend-entry"><line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" '
            f'stroke="{color}" stroke-width="2"/><text x="{lx + 26}" y="{ly + 4}">{escape(name)}</text></g>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _num(row: dict, key: str):
    text = row.get(key, "")
    if text in ("", "undefined", "nan", None):
        return None
    return float(text)


def depth_accuracy_series(path) -> dict:
    _, cols, rows = read_csv(path)
    need = {"dataset", "mode", "depth", "block_size", "acc_mean"}
    if not need <= set(cols):
        raise SchemaError(f"{path}: expected columns {sorted(need)}, got {cols}")
    multi_ds = len({r["dataset"] for r in rows}) > 1
    series = defaultdict(list)
    for r in rows:
        if r.get("status", "ok") != "ok":
            continue
        name = r["mode"] if r["mode"] == "end2end" else f"{r['mode']} (block {r['block_size']})"
        if multi_ds:
            name = f"{r['dataset']}: {name}"
        series[name].append((float(r["depth"]), _num(r, "acc_mean")))
    return dict(sorted(series.items()))


def mad_layer_series(path) -> dict:
    _, cols, rows = read_csv(path)
    if not {"layer", "mad"} <= set(cols):
        raise SchemaError(f"{path}: expected columns ['layer', 'mad'], got {cols}")
    keys = [k for k in ("dataset", "mode", "depth", "block_size") if k in cols]
    acc = defaultdict(lambda: defaultdict(list))
    for r in rows:
        name = ", ".join(f"{k}={r[k]}" for k in keys) or "mad"
        v = _num(r, "mad")
        if v is not None:
            acc[name][float(r["layer"])].append(v)
        else:
            acc[name].setdefault(float(r["layer"]), [])
    series = {}
    for name, layers in acc.items():
        series[name] = [(x, (sum(v) / len(v)) if v else None) for x, v in sorted(layers.items())]
    def order(item):
        name = item[0]
        depth = next((p.split("=")[1] for p in name.split(", ") if p.startswith("depth=")), "0")
        return (float(depth), name)
    return dict(sorted(series.items(), key=order))


def plot(results_csv, kind: str, out_svg) -> Path:
    if kind == "depth-accuracy":
        svg = line_chart_svg(
            depth_accuracy_series(results_csv), "Linear-probe accuracy vs depth",
            "encoder depth (layers)", "test accuracy", log2_x=True,
        )
    elif kind == "mad-layers":
        svg = line_chart_svg(
            mad_layer_series(results_csv), "MAD per layer", "layer", "MAD"
        )
    else:
        raise SchemaError(f"unknown plot kind {kind!r}")
    out = Path(out_svg)
    out.write_text(svg, encoding="utf-8", newline="\n")
    return out
