"""Report files: importance CSV, importance bar chart (SVG), JSON helpers."""

from __future__ import annotations

import csv
import io
import json
from xml.sax.saxutils import escape

import numpy as np


def dumps(doc) -> str:
    """Stable JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def importance_rows(names, importance: np.ndarray):
    """``(rank, feature, importance)`` sorted by importance, ties by column order."""
    order = np.lexsort((np.arange(len(importance)), -importance))
    return [(r + 1, names[j], float(importance[j])) for r, j in enumerate(order)]


def importance_csv(names, importance: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rank", "feature", "importance"])
    for rank, name, value in importance_rows(names, importance):
        w.writerow([rank, name, repr(value)])
    return buf.getvalue()


def importance_svg(names, importance: np.ndarray, top_k: int = 15, title: str = "Feature importance, top covariates") -> str:
    """Horizontal bar chart of the ``top_k`` largest importances."""
    rows = importance_rows(names, importance)[:top_k]
    bar_h, gap, label_w, plot_w, top = 18, 6, 260, 420, 40
    height = top + len(rows) * (bar_h + gap) + 30
    width = label_w + plot_w + 80
    vmax = max((v for _, _, v in rows), default=0.0) or 1.0
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
    ]
    for i, (_, name, value) in enumerate(rows):
        y = top + i * (bar_h + gap)
        w = plot_w * value / vmax
        out.append(
            f'<text x="{label_w - 8}" y="{y + bar_h * 0.72:.1f}" text-anchor="end">{escape(str(name))}</text>'
        )
        out.append(f'<rect x="{label_w}" y="{y}" width="{w:.2f}" height="{bar_h}" fill="#4c72b0"/>')
        out.append(f'<text x="{label_w + w + 5:.2f}" y="{y + bar_h * 0.72:.1f}">{value:.4f}</text>')
    axis_y = top + len(rows) * (bar_h + gap)
    out.append(f'<line x1="{label_w}" y1="{top - 4}" x2="{label_w}" y2="{axis_y}" stroke="#333"/>')
    out.append(
        f'<text x="{label_w + plot_w / 2:.1f}" y="{axis_y + 20}" text-anchor="middle">relative importance</text>'
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"
