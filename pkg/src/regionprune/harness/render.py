"""Deterministic overlay rendering: an SVG (primary) and a plain-text PPM
(fallback) showing the token grid, kept-token shading, and labelled region
rectangles.  Identical inputs always produce byte-identical files."""

from __future__ import annotations

import numpy as np

from ..grid import Region, TokenGrid, TokenIndexSet

CELL_PX = 16
VIEW_GAP_PX = 8
PPM_CELL_PX = 8

REGION_COLORS = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"]
SHADE_COLOR = "#ffd37f"
BLOCK_LINE_COLOR = "#555555"
CELL_LINE_COLOR = "#dddddd"

_PPM_REGION_RGB = [(214, 39, 40), (31, 119, 180), (44, 160, 44),
                   (148, 103, 189), (140, 86, 75), (227, 119, 194)]
_PPM_SHADE_RGB = (255, 211, 127)
_PPM_LINE_RGB = (85, 85, 85)


def _f(v: float) -> str:
    return f"{v:.2f}"


def render_svg(grid: TokenGrid, regions: list[tuple[str, Region]],
               kept: TokenIndexSet | None = None) -> str:
    """Vector overlay: one panel per view, kept-token cells shaded, block
    grid drawn over light cell lines, region rectangles outlined and
    labelled."""
    side = grid.side
    panel = side * CELL_PX
    width = grid.views * panel + (grid.views - 1) * VIEW_GAP_PX
    height = panel
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    kept_cells = set(kept.indices) if kept is not None else set()
    per_view = side * side
    for view in range(grid.views):
        x_off = view * (panel + VIEW_GAP_PX)
        parts.append(f'<g id="view-{view}">')
        for idx in sorted(i for i in kept_cells
                          if view * per_view <= i < (view + 1) * per_view):
            _, r, c = grid.token_position(idx)
            parts.append(
                f'<rect x="{x_off + c * CELL_PX}" y="{r * CELL_PX}" '
                f'width="{CELL_PX}" height="{CELL_PX}" fill="{SHADE_COLOR}"/>')
        for c in range(side + 1):
            x = x_off + c * CELL_PX
            parts.append(f'<line x1="{x}" y1="0" x2="{x}" y2="{panel}" '
                         f'stroke="{CELL_LINE_COLOR}" stroke-width="0.5"/>')
        for r in range(side + 1):
            y = r * CELL_PX
            parts.append(f'<line x1="{x_off}" y1="{y}" x2="{x_off + panel}" '
                         f'y2="{y}" stroke="{CELL_LINE_COLOR}" stroke-width="0.5"/>')
        for b in range(9):
            pos = b * panel / 8
            parts.append(f'<line x1="{_f(x_off + pos)}" y1="0" '
                         f'x2="{_f(x_off + pos)}" y2="{panel}" '
                         f'stroke="{BLOCK_LINE_COLOR}" stroke-width="1"/>')
            parts.append(f'<line x1="{x_off}" y1="{_f(pos)}" '
                         f'x2="{x_off + panel}" y2="{_f(pos)}" '
                         f'stroke="{BLOCK_LINE_COLOR}" stroke-width="1"/>')
        for ri, (label, region) in enumerate(regions):
            color = REGION_COLORS[ri % len(REGION_COLORS)]
            rx = x_off + region.x_min * panel / 8
            ry = region.y_min * panel / 8
            rw = region.width * panel / 8
            rh = region.height * panel / 8
            parts.append(f'<rect x="{_f(rx)}" y="{_f(ry)}" width="{_f(rw)}" '
                         f'height="{_f(rh)}" fill="none" stroke="{color}" '
                         f'stroke-width="2.5"/>')
            if view == 0:
                parts.append(f'<text x="{_f(rx + 4)}" y="{_f(ry + 14)}" '
                             f'font-family="monospace" font-size="12" '
                             f'fill="{color}">{label}</text>')
        parts.append('</g>')
    parts.append('</svg>')
    return "\n".join(parts) + "\n"


def render_ppm(grid: TokenGrid, regions: list[tuple[str, Region]],
               kept: TokenIndexSet | None = None) -> str:
    """ASCII P3 raster fallback with the same panel layout."""
    side = grid.side
    s = PPM_CELL_PX
    panel = side * s
    gap = VIEW_GAP_PX
    width = grid.views * panel + (grid.views - 1) * gap
    height = panel
    img = np.full((height, width, 3), 255, dtype=np.int64)

    kept_cells = set(kept.indices) if kept is not None else set()
    per_view = side * side
    for view in range(grid.views):
        x_off = view * (panel + gap)
        for idx in kept_cells:
            if not view * per_view <= idx < (view + 1) * per_view:
                continue
            _, r, c = grid.token_position(idx)
            img[r * s:(r + 1) * s, x_off + c * s:x_off + (c + 1) * s] = _PPM_SHADE_RGB
        for b in range(9):
            pos = min(round(b * panel / 8), panel - 1)
            img[:, x_off + pos] = _PPM_LINE_RGB
            img[pos, x_off:x_off + panel] = _PPM_LINE_RGB
        for ri, (_, region) in enumerate(regions):
            color = _PPM_REGION_RGB[ri % len(_PPM_REGION_RGB)]
            x0 = x_off + round(region.x_min * panel / 8)
            x1 = x_off + min(round((region.x_max + 1) * panel / 8), panel) - 1
            y0 = round(region.y_min * panel / 8)
            y1 = min(round((region.y_max + 1) * panel / 8), panel) - 1
            img[y0:y1 + 1, x0] = color
            img[y0:y1 + 1, x1] = color
            img[y0, x0:x1 + 1] = color
            img[y1, x0:x1 + 1] = color

    lines = ["P3", f"{width} {height}", "255"]
    for row in img:
        lines.append(" ".join(f"{r} {g} {b}" for r, g, b in row))
    return "\n".join(lines) + "\n"
