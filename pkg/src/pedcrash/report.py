"""Deterministic SVG plots, leaderboard tables and the hashed run-bundle manifest.

Output bytes depend only on the inputs: no timestamps, no locale, numbers
printed with four fractional digits, beeswarm jitter from a keyed hash.
"""
import csv
import hashlib
import io
import json
import math
import os
import zlib
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

from .errors import OutputError, RenderError
from .schema import SEVERITY_NAMES

PLOT_KINDS = ("confusion", "roc", "pr", "shap_bar", "shap_beeswarm", "force")
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b")
BLUE = (0x1E, 0x88, 0xE5)
RED = (0xFF, 0x0D, 0x57)
FONT = 'font-family="Helvetica, Arial, sans-serif"'


@dataclass
class PlotSpec:
    kind: str
    data: dict
    title: str = ""
    width: int = 640
    height: int = 480
    categories: list = field(default_factory=lambda: list(SEVERITY_NAMES))

    def __post_init__(self):
        if self.kind not in PLOT_KINDS:
            raise RenderError(f"unknown plot kind {self.kind!r}")
        if not (self.width > 0 and self.height > 0):
            raise RenderError("plot dimensions must be positive")


def fmt(v):
    """Fixed four-decimal formatting used for every emitted number."""
    v = float(v)
    if not math.isfinite(v):
        raise RenderError(f"cannot render non-finite value {v}")
    s = f"{v:.4f}"
    return "0.0000" if s == "-0.0000" else s


def percent(share):
    """Whole-number percentage, halves rounded up."""
    return f"{int(math.floor(100.0 * share + 0.5))}%"


def ramp(t):
    """Blue (low) to red (high) colour for t in [0, 1]."""
    t = min(max(float(t), 0.0), 1.0)
    return "#" + "".join(f"{int(round(b + (r - b) * t)):02x}" for b, r in zip(BLUE, RED))


def _shade(t):
    """White to dark blue for heatmap cells."""
    t = min(max(float(t), 0.0), 1.0)
    rgb = [int(round(255 + (c - 255) * t)) for c in (0x08, 0x30, 0x6B)]
    return "#" + "".join(f"{c:02x}" for c in rgb)


def _text(x, y, s, size=12, anchor="middle", fill="#000000", extra=""):
    return (f'<text x="{fmt(x)}" y="{fmt(y)}" font-size="{size}" text-anchor="{anchor}" '
            f'fill="{fill}" {FONT}{extra}>{escape(str(s))}</text>')


def _line(x1, y1, x2, y2, stroke="#000000", width=1.0, extra=""):
    return (f'<line x1="{fmt(x1)}" y1="{fmt(y1)}" x2="{fmt(x2)}" y2="{fmt(y2)}" '
            f'stroke="{stroke}" stroke-width="{fmt(width)}"{extra}/>')


def _rect(x, y, w, h, fill, extra=""):
    return f'<rect x="{fmt(x)}" y="{fmt(y)}" width="{fmt(w)}" height="{fmt(h)}" fill="{fill}"{extra}/>'


def _document(spec, body):
    head = ('<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{spec.width}" '
            f'height="{spec.height}" viewBox="0 0 {spec.width} {spec.height}">\n'
            f'<title>{escape(spec.title)}</title>\n'
            + _rect(0, 0, spec.width, spec.height, "#ffffff") + "\n")
    title = _text(spec.width / 2, 22, spec.title, size=15) + "\n" if spec.title else ""
    return head + title + "\n".join(body) + "\n</svg>\n"


def _as_dict(obj):
    return obj.to_dict() if hasattr(obj, "to_dict") else obj


# -- individual plots ---------------------------------------------------------

def _confusion(spec):
    counts = np.asarray(_as_dict(spec.data)["counts"], dtype=np.int64)
    if counts.ndim != 2 or counts.size == 0 or counts.shape[0] != counts.shape[1]:
        raise RenderError("confusion plot needs a non-empty square matrix")
    if counts.sum() == 0:
        raise RenderError("confusion matrix is empty")
    k = counts.shape[0]
    rows = counts.sum(axis=1, keepdims=True)
    share = np.divide(counts, rows, out=np.zeros(counts.shape), where=rows > 0)
    labels = spec.categories[:k] if len(spec.categories) >= k else [str(c) for c in range(k)]
    left, top = 150.0, 50.0
    size = min(spec.width - left - 30, spec.height - top - 70)
    cell = size / k
    body = []
    for i in range(k):
        for j in range(k):
            x, y = left + j * cell, top + i * cell
            dark = share[i, j] > 0.5
            body.append(_rect(x, y, cell, cell, _shade(share[i, j]), ' stroke="#ffffff"'))
            colour = "#ffffff" if dark else "#000000"
            body.append(_text(x + cell / 2, y + cell / 2, percent(share[i, j]), size=16, fill=colour))
            body.append(_text(x + cell / 2, y + cell / 2 + 18, f"({counts[i, j]})", size=11,
                              fill=colour))
        body.append(_text(left - 8, top + (i + 0.5) * cell + 4, labels[i], anchor="end"))
        body.append(_text(left + (i + 0.5) * cell, top + size + 18, labels[i]))
    body.append(_text(left + size / 2, top + size + 40, "Predicted category"))
    body.append(_text(16, top + size / 2, "True category",
                      extra=f' transform="rotate(-90 16 {fmt(top + size / 2)})"'))
    return body


def _axes(spec, left, top, w, h, xlabel, ylabel):
    body = [_rect(left, top, w, h, "none", ' stroke="#000000"')]
    for t in np.linspace(0.0, 1.0, 5):
        x, y = left + t * w, top + h - t * h
        body.append(_line(x, top + h, x, top + h + 5))
        body.append(_text(x, top + h + 18, fmt(t), size=10))
        body.append(_line(left - 5, y, left, y))
        body.append(_text(left - 8, y + 4, fmt(t), size=10, anchor="end"))
    body.append(_text(left + w / 2, top + h + 36, xlabel))
    body.append(_text(16, top + h / 2, ylabel, extra=f' transform="rotate(-90 16 {fmt(top + h / 2)})"'))
    return body


def _curves(spec):
    curves = [_as_dict(c) for c in _as_dict(spec.data)["curves"]]
    if not curves or all(c is None or len(c["x"]) == 0 for c in curves):
        raise RenderError(f"{spec.kind} plot needs at least one non-empty curve")
    left, top = 70.0, 45.0
    w, h = spec.width - left - 200.0, spec.height - top - 60.0
    roc = spec.kind == "roc"
    body = _axes(spec, left, top, w, h, "False positive rate" if roc else "Recall",
                 "True positive rate" if roc else "Precision")
    if roc:
        body.append(_line(left, top + h, left + w, top, "#999999", 1.0, ' stroke-dasharray="4 4"'))
    legend_y = top + 10
    for idx, c in enumerate(curves):
        if c is None:
            continue
        cat = c.get("category", idx)
        colour = PALETTE[cat % len(PALETTE)]
        xs, ys = np.asarray(c["x"], dtype=float), np.asarray(c["y"], dtype=float)
        if not roc:
            # step-wise: precision is constant between consecutive recall values
            xs = np.repeat(xs, 2)[1:]
            ys = np.repeat(ys, 2)[:-1]
        pts = " ".join(f"{fmt(left + x * w)},{fmt(top + h - y * h)}" for x, y in zip(xs, ys))
        body.append(f'<polyline points="{pts}" fill="none" stroke="{colour}" stroke-width="2.0000"/>')
        name = spec.categories[cat] if cat < len(spec.categories) else str(cat)
        tag = "AUC" if roc else "AP"
        body.append(_line(left + w + 15, legend_y, left + w + 35, legend_y, colour, 2.0))
        body.append(_text(left + w + 40, legend_y + 4, f"{name} ({tag} {fmt(c['area'])})", size=11,
                          anchor="start"))
        legend_y += 18
    return body


def _shap_bar(spec):
    d = _as_dict(spec.data)
    features = list(d["features"])
    values = np.asarray(d["values"], dtype=float)
    if not features or values.size == 0:
        raise RenderError("shap_bar plot needs at least one feature")
    values = values.reshape(len(features), -1)
    cats = list(d.get("categories", spec.categories[:values.shape[1]]))
    left, top = 170.0, 45.0
    w = spec.width - left - 40.0
    h = spec.height - top - 80.0
    row = h / len(features)
    vmax = float(values.sum(axis=1).max()) or 1.0
    body = []
    for i, name in enumerate(features):
        x = left
        y = top + i * row
        for c in range(values.shape[1]):
            seg = values[i, c] / vmax * w
            body.append(_rect(x, y + 0.15 * row, seg, 0.7 * row, PALETTE[c % len(PALETTE)]))
            x += seg
        body.append(_text(left - 8, y + row / 2 + 4, name, size=11, anchor="end"))
    body.append(_line(left, top + h, left + w, top + h))
    for t in np.linspace(0.0, 1.0, 5):
        body.append(_text(left + t * w, top + h + 16, fmt(t * vmax), size=10))
    body.append(_text(left + w / 2, top + h + 34, "mean(|SHAP value|)"))
    lx = left
    for c, cat in enumerate(cats):
        body.append(_rect(lx, spec.height - 28, 12, 12, PALETTE[c % len(PALETTE)]))
        body.append(_text(lx + 16, spec.height - 18, cat, size=11, anchor="start"))
        lx += 20 + 7 * len(str(cat)) + 20
    return body


def jitter(feature, instance, seed=0):
    """Deterministic offset in [-1, 1] keyed by (feature, instance)."""
    h = zlib.crc32(f"{seed}:{feature}:{instance}".encode("utf-8"))
    return h / 2**31 - 1.0


def _beeswarm(spec):
    d = _as_dict(spec.data)
    features = list(d["features"])
    points = d["points"]  # per feature: [[instance, value, phi], ...]
    if not features or not any(len(p) for p in points):
        raise RenderError("shap_beeswarm plot needs points")
    phis = np.concatenate([np.asarray(p, dtype=float)[:, 2] for p in points if len(p)])
    lo, hi = float(phis.min()), float(phis.max())
    span = max(hi - lo, 1e-12)
    lo, hi = lo - 0.05 * span, hi + 0.05 * span
    left, top = 170.0, 45.0
    w = spec.width - left - 80.0
    h = spec.height - top - 60.0
    row = h / len(features)

    def sx(v):
        return left + (v - lo) / (hi - lo) * w

    body = []
    if lo < 0 < hi:
        body.append(_line(sx(0.0), top, sx(0.0), top + h, "#999999"))
    for i, (name, pts) in enumerate(zip(features, points)):
        y0 = top + (i + 0.5) * row
        body.append(_text(left - 8, y0 + 4, name, size=11, anchor="end"))
        if not len(pts):
            continue
        arr = np.asarray(pts, dtype=float)
        vmin, vmax = arr[:, 1].min(), arr[:, 1].max()
        for inst, val, phi in pts:
            t = 0.5 if vmax == vmin else (val - vmin) / (vmax - vmin)
            y = y0 + 0.35 * row * jitter(name, int(inst))
            body.append(f'<circle cx="{fmt(sx(phi))}" cy="{fmt(y)}" r="2.5000" fill="{ramp(t)}" '
                        f'fill-opacity="0.8000"/>')
    body.append(_line(left, top + h, left + w, top + h))
    for t in np.linspace(0.0, 1.0, 5):
        v = lo + t * (hi - lo)
        body.append(_text(sx(v), top + h + 16, fmt(v), size=10))
    body.append(_text(left + w / 2, top + h + 34, "SHAP value (impact on model output)"))
    bx = left + w + 30
    steps = 20
    for s in range(steps):
        body.append(_rect(bx, top + h - (s + 1) * h / steps, 10, h / steps, ramp(s / (steps - 1))))
    body.append(_text(bx + 14, top + 10, "High", size=10, anchor="start"))
    body.append(_text(bx + 14, top + h, "Low", size=10, anchor="start"))
    body.append(_text(bx + 5, top - 8, "Feature value", size=10))
    return body


def _force(spec, top_n=10):
    d = _as_dict(spec.data)
    contrib = d["contributions"]
    if not contrib:
        raise RenderError("force plot needs contributions")
    base, out = float(d["base"]), float(d["output"])
    items = [(c["feature"], c["value"], c["phi"]) if isinstance(c, dict) else tuple(c) for c in contrib]
    shown, rest = items[:top_n], items[top_n:]
    if rest:
        shown.append((f"{len(rest)} other features", None, float(sum(p for _, _, p in rest))))
    cum = [base]
    for _, _, p in shown:
        cum.append(cum[-1] + p)
    lo, hi = min(cum + [out]), max(cum + [out])
    span = max(hi - lo, 1e-12)
    lo, hi = lo - 0.1 * span, hi + 0.1 * span
    left, top = 200.0, 60.0
    w = spec.width - left - 40.0
    row = (spec.height - top - 70.0) / len(shown)

    def sx(v):
        return left + (v - lo) / (hi - lo) * w

    body = [_line(sx(base), top - 10, sx(base), spec.height - 55, "#999999", 1.0,
                  ' stroke-dasharray="4 4"'),
            _text(sx(base), top - 14, f"base value {fmt(base)}", size=11),
            _line(sx(out), top - 10, sx(out), spec.height - 55, "#000000"),
            _text(sx(out), spec.height - 40, f"f(x) {fmt(out)}", size=11)]
    for i, (name, val, p) in enumerate(shown):
        y = top + i * row
        a, b = sorted((cum[i], cum[i + 1]))
        colour = ramp(1.0) if p >= 0 else ramp(0.0)
        body.append(_rect(sx(a), y + 0.15 * row, max(sx(b) - sx(a), 0.5), 0.7 * row, colour))
        label = name if val is None else f"{name} = {fmt(val)}"
        body.append(_text(left - 8, y + row / 2 + 4, label, size=11, anchor="end"))
        body.append(_text(sx(b) + 4, y + row / 2 + 4, ("+" if p >= 0 else "") + fmt(p), size=10,
                          anchor="start"))
    return body


_RENDERERS = {
    "confusion": _confusion,
    "roc": _curves,
    "pr": _curves,
    "shap_bar": _shap_bar,
    "shap_beeswarm": _beeswarm,
    "force": _force,
}


def render_svg(spec):
    try:
        body = _RENDERERS[spec.kind](spec)
    except (KeyError, TypeError, IndexError) as exc:
        raise RenderError(f"malformed {spec.kind} payload: {exc}") from None
    return _document(spec, body)


# -- tables and bundles -------------------------------------------------------

def leaderboard_markdown(entries):
    lines = ["| Model | Accuracy | AUC | Recall | Precision | F1 |",
             "|---|---|---|---|---|---|"]
    for e in entries:
        e = _as_dict(e)
        lines.append(f"| {e['kind']} | {fmt(e['accuracy'])} | {fmt(e['auc'])} | {fmt(e['recall'])} | "
                     f"{fmt(e['precision'])} | {fmt(e['f1'])} |")
    return "\n".join(lines) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if hasattr(obj, "to_dict"):
        return _plain(obj.to_dict())
    return obj


def to_json(obj):
    """Canonical JSON text: sorted keys, two-space indent, NaN written as null."""
    return json.dumps(_plain(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def to_csv(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for r in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _encode(content):
    if isinstance(content, bytes):
        return content
    if isinstance(content, str):
        return content.encode("utf-8")
    return to_json(content).encode("utf-8")


MANIFEST = "manifest.json"


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def write_run_bundle(artifacts, out_dir):
    """Write ``{relative path: content}`` under ``out_dir`` and refresh manifest.json.

    Content may be bytes, text, or a JSON-serializable object. The manifest
    lists every file below ``out_dir`` (except itself) with its SHA-256.
    """
    out_dir = os.fspath(out_dir)
    for rel, content in sorted(artifacts.items()):
        if os.path.isabs(rel) or ".." in rel.replace("\\", "/").split("/"):
            raise OutputError(f"artifact path {rel!r} escapes the output directory")
        path = os.path.join(out_dir, rel)
        try:
            os.makedirs(os.path.dirname(path) or out_dir, exist_ok=True)
            with open(path, "wb") as fh:
                fh.write(_encode(content))
        except OSError as exc:
            raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from None
    return write_manifest(out_dir)


def write_manifest(out_dir):
    entries = []
    try:
        os.makedirs(out_dir, exist_ok=True)
        for root, dirs, files in os.walk(out_dir):
            dirs.sort()
            for name in sorted(files):
                path = os.path.join(root, name)
                rel = os.path.relpath(path, out_dir).replace(os.sep, "/")
                if rel == MANIFEST:
                    continue
                entries.append({"path": rel, "sha256": sha256_file(path)})
        entries.sort(key=lambda e: e["path"])
        with open(os.path.join(out_dir, MANIFEST), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(to_json({"files": entries}))
    except OSError as exc:
        raise OutputError(f"cannot write manifest in {out_dir}: {exc.strerror or exc}") from None
    return entries
