"""Block-coordinate regions on the fixed 8x8 grid and their mapping onto
visual-token layouts.

A region is an axis-aligned rectangle of grid blocks given as
``[x_min, y_min, x_max, y_max]`` with every coordinate in 0..7 (x = column,
y = row).  Token grids are N x N per view; a token cell belongs to a region
iff its center falls inside the region's continuous extent, which keeps the
mapping well defined when N is not divisible by 8.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

GRID_BLOCKS = 8

_FIELD_NAMES = ("x_min", "y_min", "x_max", "y_max")


class RegionParseError(ValueError):
    """Raised when a region string cannot be parsed at all."""


@dataclass(frozen=True)
class Region:
    """Rectangle of grid blocks, inclusive on all four edges."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self):
        for name in _FIELD_NAMES:
            v = getattr(self, name)
            if not isinstance(v, int):
                raise TypeError(f"{name} must be int, got {type(v).__name__}")
        if not (0 <= self.x_min <= self.x_max <= GRID_BLOCKS - 1):
            raise ValueError(f"x range [{self.x_min}, {self.x_max}] outside grid")
        if not (0 <= self.y_min <= self.y_max <= GRID_BLOCKS - 1):
            raise ValueError(f"y range [{self.y_min}, {self.y_max}] outside grid")

    @property
    def width(self) -> int:
        return self.x_max - self.x_min + 1

    @property
    def height(self) -> int:
        return self.y_max - self.y_min + 1

    @property
    def block_area(self) -> int:
        return self.width * self.height

    def contains(self, other: "Region") -> bool:
        return (self.x_min <= other.x_min and other.x_max <= self.x_max
                and self.y_min <= other.y_min and other.y_max <= self.y_max)


FULL_GRID = Region(0, 0, GRID_BLOCKS - 1, GRID_BLOCKS - 1)


@dataclass(frozen=True)
class TokenGrid:
    """Layout of visual tokens: ``side`` tokens per edge, ``views`` image
    views sharing one region (1 for a single image, 5 for a multi-view
    layout of original image plus four sub-images)."""

    side: int
    views: int = 1

    def __post_init__(self):
        if self.side < 1:
            raise ValueError(f"side must be >= 1, got {self.side}")
        if self.views < 1:
            raise ValueError(f"views must be >= 1, got {self.views}")

    @property
    def total_tokens(self) -> int:
        return self.views * self.side * self.side

    def token_position(self, index: int) -> tuple[int, int, int]:
        """(view, row, col) of a flat token index."""
        per_view = self.side * self.side
        if not 0 <= index < self.total_tokens:
            raise IndexError(f"token index {index} out of range for {self}")
        view, rem = divmod(index, per_view)
        row, col = divmod(rem, self.side)
        return view, row, col


@dataclass(frozen=True)
class TokenIndexSet:
    """Strictly increasing 0-based row indices into a token matrix, plus the
    owning grid.  Per view the indices always cover a full rectangle of
    cells."""

    indices: tuple[int, ...]
    grid: TokenGrid

    def __post_init__(self):
        prev = -1
        for i in self.indices:
            if i <= prev:
                raise ValueError("indices must be strictly increasing")
            prev = i
        if self.indices and self.indices[-1] >= self.grid.total_tokens:
            raise ValueError("index beyond grid total_tokens")

    def __len__(self) -> int:
        return len(self.indices)

    def __contains__(self, index: int) -> bool:
        return index in set(self.indices)


def parse_region(text: str) -> tuple[Region, list[str]]:
    """Parse ``<x_min> <y_min> <x_max> <y_max>`` (angle brackets optional).

    Out-of-range coordinates are clamped into 0..7 and inverted pairs are
    reordered; every repair is reported as a human-readable string so the
    caller can count or log them.  Non-numeric fields and wrong field counts
    raise :class:`RegionParseError` naming the offending token.
    """
    cleaned = text.strip()
    if cleaned.endswith("."):
        cleaned = cleaned[:-1]
    cleaned = cleaned.replace("<", " ").replace(">", " ")
    fields = cleaned.split()
    if len(fields) != 4:
        raise RegionParseError(
            f"expected 4 coordinates, got {len(fields)} in {text!r}")
    values = []
    for name, tok in zip(_FIELD_NAMES, fields):
        try:
            values.append(int(tok))
        except ValueError:
            raise RegionParseError(
                f"non-numeric {name} field {tok!r} in {text!r}") from None

    repairs: list[str] = []
    clamped = []
    for name, v in zip(_FIELD_NAMES, values):
        c = min(max(v, 0), GRID_BLOCKS - 1)
        if c != v:
            repairs.append(f"clamped {name} {v} -> {c}")
        clamped.append(c)
    x_min, y_min, x_max, y_max = clamped
    swapped = []
    if x_min > x_max:
        x_min, x_max = x_max, x_min
        swapped.append("x")
    if y_min > y_max:
        y_min, y_max = y_max, y_min
        swapped.append("y")
    if swapped:
        repairs.append("reordered " + ", ".join(swapped))
    return Region(x_min, y_min, x_max, y_max), repairs


def format_region(region: Region) -> str:
    return f"{region.x_min} {region.y_min} {region.x_max} {region.y_max}"


def _ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


def axis_cell_span(lo_block: int, hi_block: int, side: int) -> tuple[int, int]:
    """First and last cell index (inclusive) whose center lies in the
    continuous block extent [lo/8, (hi+1)/8) along one axis.

    Cell c has center (c + 0.5)/side, so membership reduces to
    lo*side/8 - 0.5 <= c < (hi+1)*side/8 - 0.5, evaluated in exact integer
    arithmetic.  May be an empty span (first > last) when side < 8.
    """
    first = _ceil_div(2 * side * lo_block - GRID_BLOCKS, 2 * GRID_BLOCKS)
    last = _ceil_div(2 * side * (hi_block + 1) - GRID_BLOCKS, 2 * GRID_BLOCKS) - 1
    return max(first, 0), min(last, side - 1)


def region_cell_spans(region: Region, side: int) -> tuple[tuple[int, int], tuple[int, int]]:
    """((row_first, row_last), (col_first, col_last)) cell spans of a region
    on one view; spans can be empty for side < 8."""
    rows = axis_cell_span(region.y_min, region.y_max, side)
    cols = axis_cell_span(region.x_min, region.x_max, side)
    return rows, cols


def token_count(region: Region, grid: TokenGrid) -> int:
    """Number of token indices the region selects across all views."""
    (r0, r1), (c0, c1) = region_cell_spans(region, grid.side)
    n_rows = max(r1 - r0 + 1, 0)
    n_cols = max(c1 - c0 + 1, 0)
    return grid.views * n_rows * n_cols


def region_to_tokens(region: Region, grid: TokenGrid) -> TokenIndexSet:
    """All token indices whose cell center falls inside the region, the same
    block rectangle applied to every view, sorted ascending."""
    (r0, r1), (c0, c1) = region_cell_spans(region, grid.side)
    per_view = grid.side * grid.side
    indices = []
    for view in range(grid.views):
        offset = view * per_view
        for r in range(r0, r1 + 1):
            base = offset + r * grid.side
            for c in range(c0, c1 + 1):
                indices.append(base + c)
    return TokenIndexSet(tuple(indices), grid)


def recall(gt: Region, pred: Region) -> float:
    """Intersection block area over ground-truth block area; 0 if disjoint."""
    iw = min(gt.x_max, pred.x_max) - max(gt.x_min, pred.x_min) + 1
    ih = min(gt.y_max, pred.y_max) - max(gt.y_min, pred.y_min) + 1
    if iw <= 0 or ih <= 0:
        return 0.0
    return (iw * ih) / gt.block_area


def round_half_down(v: float) -> int:
    """Round to nearest integer, halves toward negative infinity."""
    return math.ceil(v - 0.5)


def resize_to_match(source: Region, target: Region) -> Region:
    """Region with target's width/height centered on source's center,
    shifted minimally to stay inside the grid."""
    w, h = target.width, target.height
    cx = (source.x_min + source.x_max) / 2
    cy = (source.y_min + source.y_max) / 2
    x0 = round_half_down(cx - (w - 1) / 2)
    y0 = round_half_down(cy - (h - 1) / 2)
    x0 = min(max(x0, 0), GRID_BLOCKS - w)
    y0 = min(max(y0, 0), GRID_BLOCKS - h)
    return Region(x0, y0, x0 + w - 1, y0 + h - 1)


def all_regions():
    """Every valid region on the 8x8 grid (1296 rectangles)."""
    for x0 in range(GRID_BLOCKS):
        for x1 in range(x0, GRID_BLOCKS):
            for y0 in range(GRID_BLOCKS):
                for y1 in range(y0, GRID_BLOCKS):
                    yield Region(x0, y0, x1, y1)
