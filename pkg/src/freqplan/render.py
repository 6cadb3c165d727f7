"""Grid-style SVG rendering of frequency plans.

Rows are the reuse/polarization rows g, columns are the frequency slots.
Each active beam paints one rectangle; user beams are hued by their first
slot, gateway beams use a reserved gold color. Output is deterministic.
"""

from __future__ import annotations

import colorsys
from typing import Iterable

from .model import Beam, FrequencyGrid, FrequencyPlan

CELL_W = 18
CELL_H = 18
MARGIN = 30
GATEWAY_COLOR = "#d4a017"


def _beam_color(beam: Beam, f: int, n_bw: int) -> str:
    if beam.kind == "gateway":
        return GATEWAY_COLOR
    hue = (f - 1) / max(1, n_bw)
    r, g, b = colorsys.hsv_to_rgb(hue, 0.65, 0.85)
    return f"#{int(r * 255):02x}{int(g * 255):02x}{int(b * 255):02x}"


def render_plan_svg(
    plan: FrequencyPlan,
    grid: FrequencyGrid,
    beams: Iterable[Beam],
    title: str = "",
) -> str:
    """Render the occupied grid cells for the given beams as an SVG document."""
    width = MARGIN * 2 + grid.n_bw * CELL_W
    height = MARGIN * 2 + grid.n_rows * CELL_H
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        lines.append(
            f'<text x="{MARGIN}" y="{MARGIN - 10}" font-size="12" '
            f'font-family="sans-serif">{title}</text>'
        )
    # grid frame and cells
    for row in range(grid.n_rows + 1):
        y = MARGIN + row * CELL_H
        lines.append(
            f'<line x1="{MARGIN}" y1="{y}" x2="{MARGIN + grid.n_bw * CELL_W}" y2="{y}" '
            'stroke="#cccccc" stroke-width="1"/>'
        )
    for col in range(grid.n_bw + 1):
        x = MARGIN + col * CELL_W
        lines.append(
            f'<line x1="{x}" y1="{MARGIN}" x2="{x}" y2="{MARGIN + grid.n_rows * CELL_H}" '
            'stroke="#cccccc" stroke-width="1"/>'
        )
    for beam in sorted(beams, key=lambda b: b.id):
        a = plan[beam.id]
        if not a.active:
            continue
        x = MARGIN + (a.f - 1) * CELL_W
        y = MARGIN + (a.g - 1) * CELL_H
        color = _beam_color(beam, a.f, grid.n_bw)
        lines.append(
            f'<rect x="{x}" y="{y}" width="{a.b * CELL_W}" height="{CELL_H}" '
            f'fill="{color}" stroke="#333333" stroke-width="1">'
            f"<title>beam {beam.id}</title></rect>"
        )
    # axis labels
    lines.append(
        f'<text x="{MARGIN + grid.n_bw * CELL_W // 2}" y="{height - 8}" font-size="11" '
        f'text-anchor="middle" font-family="sans-serif">frequency slot</text>'
    )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
