"""CSV and SVG rendering.  Everything returns text; callers decide when to write."""

from __future__ import annotations

import csv
import io
import math
import xml.etree.ElementTree as ET

import numpy as np


def fmt(value) -> str:
    """Shortest round-trip text for a number; empty for ``None`` or NaN."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return ""
    return repr(value)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def trajectory_csv(traj, R: int, K: int) -> str:
    header = ["t"] + [f"z_{r + 1}{k + 1}" for r in range(R) for k in range(K)] + ["sw"]
    header += [f"toll_{k + 1}" for k in range(K)] + ["lyapunov"]
    rows = []
    for i, t in enumerate(traj.t):
        lyap = None if traj.lyapunov is None else traj.lyapunov[i]
        rows.append([t, *traj.z[i].ravel(), traj.sw[i], *traj.tolls[i], lyap])
    return csv_text(header, rows)


def field_csv(table: np.ndarray) -> str:
    return csv_text(["z11", "z21", "dz11", "dz21"], table)


def contour_csv(z11, z21, values, name: str) -> str:
    rows = [(a, b, None if not np.isfinite(v) else v) for a, b, v in zip(z11, z21, values)]
    return csv_text(["z11", "z21", name], rows)


MARKER_COLOURS = {"attracting": "#d62728", "saddle-like": "#1f77b4"}


def phase_portrait_svg(masses, field: np.ndarray, contour=None, markers=(), title: str = "",
                       size: int = 480) -> str:
    """Standalone SVG phase portrait over (z11, z21).

    ``field`` has rows ``(z11, z21, dz11, dz21)``; arrows are scaled so the
    largest one spans most of a grid cell.  ``contour`` is an optional
    ``(z11, z21, value)`` table drawn as shaded cells, lighter meaning larger.
    ``markers`` is a sequence of ``(z11, z21, label)`` rest points.
    """
    m1, m2 = float(masses[0]), float(masses[1])
    pad = 40
    plot = size - 2 * pad

    def px(a, b):
        return pad + a / m1 * plot, pad + (1.0 - b / m2) * plot

    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=str(size), height=str(size),
                     viewBox=f"0 0 {size} {size}")
    ET.SubElement(svg, "title").text = title or "phase portrait"
    ET.SubElement(svg, "rect", x=str(pad), y=str(pad), width=str(plot), height=str(plot),
                  fill="white", stroke="black")

    if contour is not None and len(contour):
        vals = np.array([np.nan if v is None else v for v in contour[:, 2]], dtype=float)
        finite = vals[np.isfinite(vals)]
        if finite.size:
            lo, hi = finite.min(), finite.max()
            n_a = len(np.unique(contour[:, 0]))
            n_b = len(np.unique(contour[:, 1]))
            cw, ch = plot / max(n_a - 1, 1), plot / max(n_b - 1, 1)
            group = ET.SubElement(svg, "g", {"stroke": "none"})
            for (a, b, _), v in zip(contour, vals):
                if not np.isfinite(v):
                    continue
                level = 0.0 if hi == lo else (v - lo) / (hi - lo)
                grey = int(round(40 + 200 * level))
                cx, cy = px(a, b)
                x0, x1 = max(cx - cw / 2, pad), min(cx + cw / 2, pad + plot)
                y0, y1 = max(cy - ch / 2, pad), min(cy + ch / 2, pad + plot)
                ET.SubElement(group, "rect", x=f"{x0:.2f}", y=f"{y0:.2f}", width=f"{x1 - x0:.2f}",
                              height=f"{y1 - y0:.2f}", fill=f"rgb({grey},{grey},{grey})")

    n_a = max(len(np.unique(field[:, 0])), 2)
    cell = plot / (n_a - 1)
    mags = np.hypot(field[:, 2] / m1, field[:, 3] / m2)
    peak = mags.max() if mags.size else 0.0
    arrows = ET.SubElement(svg, "g", {"stroke": "#ff7f0e", "stroke-width": "1.2", "fill": "none"})
    if peak > 0:
        for (a, b, da, db), mag in zip(field, mags):
            if mag <= 1e-12 * peak:
                continue
            scale = 0.8 * cell / peak
            x0, y0 = px(a, b)
            dx, dy = da / m1 * scale, -db / m2 * scale
            x1, y1 = x0 + dx, y0 + dy
            ET.SubElement(arrows, "line", x1=f"{x0:.2f}", y1=f"{y0:.2f}", x2=f"{x1:.2f}", y2=f"{y1:.2f}")
            length = math.hypot(dx, dy)
            if length > 1e-9:
                ux, uy = dx / length, dy / length
                head = min(4.0, 0.4 * length)
                pts = [(x1, y1), (x1 - head * (ux - 0.5 * uy), y1 - head * (uy + 0.5 * ux)),
                       (x1 - head * (ux + 0.5 * uy), y1 - head * (uy - 0.5 * ux))]
                ET.SubElement(arrows, "polygon", points=" ".join(f"{x:.2f},{y:.2f}" for x, y in pts),
                              fill="#ff7f0e")

    for a, b, label in markers:
        cx, cy = px(a, b)
        ET.SubElement(svg, "circle", cx=f"{cx:.2f}", cy=f"{cy:.2f}", r="5",
                      fill=MARKER_COLOURS.get(label, "black"), stroke="white")

    for text, x, y in (("z11", pad + plot / 2, size - 8), ("z21", 8, pad + plot / 2)):
        ET.SubElement(svg, "text", {"font-size": "12"}, x=f"{x:.1f}", y=f"{y:.1f}").text = text
    ET.SubElement(svg, "text", {"font-size": "13"}, x=str(pad), y=str(pad - 12)).text = title
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(svg, encoding="unicode") + "\n"
