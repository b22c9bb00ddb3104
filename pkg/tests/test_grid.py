"""Region model and token mapping, checked against a brute-force per-cell
membership oracle."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regionprune.grid import (
    FULL_GRID,
    Region,
    RegionParseError,
    TokenGrid,
    all_regions,
    format_region,
    parse_region,
    recall,
    region_to_tokens,
    resize_to_match,
    token_count,
)

ORACLE_SIDES = [8, 14, 16, 24, 32]


def oracle_tokens(region, grid):
    """Independent membership scan: every cell center tested against the
    region's continuous extent [x_min/8, (x_max+1)/8) x [y_min/8, (y_max+1)/8)."""
    x_lo, x_hi = region.x_min / 8, (region.x_max + 1) / 8
    y_lo, y_hi = region.y_min / 8, (region.y_max + 1) / 8
    indices = []
    per_view = grid.side * grid.side
    for view in range(grid.views):
        for r in range(grid.side):
            cy = (r + 0.5) / grid.side
            for c in range(grid.side):
                cx = (c + 0.5) / grid.side
                if x_lo <= cx < x_hi and y_lo <= cy < y_hi:
                    indices.append(view * per_view + r * grid.side + c)
    return indices


def regions_strategy():
    def build(x0, dx, y0, dy):
        return Region(x0, y0, min(x0 + dx, 7), min(y0 + dy, 7))
    return st.builds(build, st.integers(0, 7), st.integers(0, 7),
                     st.integers(0, 7), st.integers(0, 7))


class TestRegionType:
    def test_valid_bounds(self):
        r = Region(2, 1, 5, 2)
        assert (r.width, r.height, r.block_area) == (4, 2, 8)

    @pytest.mark.parametrize("coords", [(-1, 0, 0, 0), (0, 0, 8, 0),
                                        (3, 0, 2, 0), (0, 5, 0, 4)])
    def test_invalid_bounds_rejected(self, coords):
        with pytest.raises(ValueError):
            Region(*coords)

    def test_block_area_range(self):
        areas = {r.block_area for r in all_regions()}
        assert min(areas) == 1 and max(areas) == 64

    def test_all_regions_count(self):
        assert sum(1 for _ in all_regions()) == 1296


class TestParseRegion:
    def test_figure_coordinates(self):
        region, repairs = parse_region("2 1 5 2")
        assert region == Region(2, 1, 5, 2)
        assert repairs == []

    def test_full_grid_identity(self):
        region, repairs = parse_region("0 0 7 7")
        assert region == FULL_GRID
        assert repairs == []

    def test_clamp_then_swap(self):
        # By hand: 9->7 and -1->0 are clamped (2 events), then both axis
        # pairs are inverted and reordered in a single repair step (1 event).
        region, repairs = parse_region("9 1 5 -1")
        assert region == Region(5, 0, 7, 1)
        assert len(repairs) == 3

    def test_angle_bracket_template(self):
        region, repairs = parse_region("<2> <1> <5> <2>.")
        assert region == Region(2, 1, 5, 2)
        assert repairs == []

    def test_non_numeric_names_token(self):
        with pytest.raises(RegionParseError, match="x_max.*'five'"):
            parse_region("2 1 five 2")

    def test_wrong_field_count(self):
        with pytest.raises(RegionParseError, match="expected 4"):
            parse_region("2 1 5")

    def test_roundtrip_all_regions(self):
        for region in all_regions():
            parsed, repairs = parse_region(format_region(region))
            assert parsed == region
            assert repairs == []

    @given(st.integers(-20, 20), st.integers(-20, 20),
           st.integers(-20, 20), st.integers(-20, 20))
    def test_repair_always_yields_valid_region(self, a, b, c, d):
        region, _ = parse_region(f"{a} {b} {c} {d}")
        assert 0 <= region.x_min <= region.x_max <= 7
        assert 0 <= region.y_min <= region.y_max <= 7

    @given(st.integers(-20, 20), st.integers(-20, 20),
           st.integers(-20, 20), st.integers(-20, 20))
    def test_repair_matches_reference_rule(self, a, b, c, d):
        clamp = lambda v: min(max(v, 0), 7)
        xs = sorted((clamp(a), clamp(c)))
        ys = sorted((clamp(b), clamp(d)))
        region, _ = parse_region(f"{a} {b} {c} {d}")
        assert region == Region(xs[0], ys[0], xs[1], ys[1])


class TestRegionToTokens:
    def test_full_cover(self):
        got = region_to_tokens(FULL_GRID, TokenGrid(side=24))
        assert list(got.indices) == list(range(576))

    def test_figure_region_side24(self):
        got = region_to_tokens(Region(2, 1, 5, 2), TokenGrid(side=24))
        expected = [r * 24 + c for r in range(3, 9) for c in range(6, 18)]
        assert list(got.indices) == expected
        assert len(got) == 72

    def test_single_block_side24(self):
        got = region_to_tokens(Region(0, 0, 0, 0), TokenGrid(side=24))
        expected = [r * 24 + c for r in range(3) for c in range(3)]
        assert list(got.indices) == expected

    @pytest.mark.parametrize("side", ORACLE_SIDES)
    def test_oracle_equivalence_all_regions(self, side):
        grid = TokenGrid(side=side)
        for region in all_regions():
            assert list(region_to_tokens(region, grid).indices) == \
                oracle_tokens(region, grid), (region, side)

    def test_oracle_equivalence_multiview(self):
        grid = TokenGrid(side=14, views=3)
        for region in [Region(0, 0, 7, 7), Region(2, 1, 5, 2), Region(7, 7, 7, 7)]:
            assert list(region_to_tokens(region, grid).indices) == \
                oracle_tokens(region, grid)

    def test_token_count_matches_mapping(self):
        for grid in [TokenGrid(24), TokenGrid(14, views=5), TokenGrid(8)]:
            for region in all_regions():
                assert token_count(region, grid) == len(region_to_tokens(region, grid))

    @given(regions_strategy(), regions_strategy(), st.sampled_from(ORACLE_SIDES))
    @settings(max_examples=200)
    def test_monotonicity(self, a, b, side):
        outer = Region(min(a.x_min, b.x_min), min(a.y_min, b.y_min),
                       max(a.x_max, b.x_max), max(a.y_max, b.y_max))
        grid = TokenGrid(side=side)
        inner_set = set(region_to_tokens(b, grid).indices)
        outer_set = set(region_to_tokens(outer, grid).indices)
        assert inner_set <= outer_set

    @given(regions_strategy(), st.sampled_from(ORACLE_SIDES), st.integers(1, 3))
    @settings(max_examples=150)
    def test_contiguity_per_view(self, region, side, views):
        grid = TokenGrid(side=side, views=views)
        got = region_to_tokens(region, grid)
        per_view = side * side
        for view in range(views):
            cells = [(i % per_view) // side for i in got.indices
                     if i // per_view == view], \
                    [(i % per_view) % side for i in got.indices
                     if i // per_view == view]
            rows, cols = cells
            if rows:
                row_span = range(min(rows), max(rows) + 1)
                col_span = range(min(cols), max(cols) + 1)
                expected = {(r, c) for r in row_span for c in col_span}
                assert set(zip(rows, cols)) == expected


class TestRecall:
    def test_identity(self):
        r = Region(1, 1, 4, 4)
        assert recall(r, r) == 1.0

    def test_quarter_overlap(self):
        # 4x4 GT at origin vs 4x4 pred offset by 2: intersection 2x2 of 16.
        assert recall(Region(0, 0, 3, 3), Region(2, 2, 5, 5)) == 0.25

    def test_disjoint(self):
        assert recall(Region(0, 0, 1, 1), Region(4, 4, 7, 7)) == 0.0

    def test_identity_for_all(self):
        for gt in all_regions():
            assert recall(gt, gt) == 1.0

    @given(regions_strategy(), regions_strategy())
    @settings(max_examples=200)
    def test_matches_block_enumeration(self, gt, pred):
        inter = sum(1 for x in range(8) for y in range(8)
                    if gt.x_min <= x <= gt.x_max and gt.y_min <= y <= gt.y_max
                    and pred.x_min <= x <= pred.x_max and pred.y_min <= y <= pred.y_max)
        assert recall(gt, pred) == pytest.approx(inter / gt.block_area, abs=0)

    def test_same_intersection_invariance(self):
        gt = Region(2, 2, 5, 5)
        preds = [Region(4, 4, 7, 7), Region(4, 4, 5, 5)]
        vals = {recall(gt, p) for p in preds}
        assert len(vals) == 1


class TestResizeToMatch:
    def test_already_matching(self):
        assert resize_to_match(Region(3, 3, 4, 4), Region(0, 0, 1, 1)) == Region(3, 3, 4, 4)

    def test_corner_clamp(self):
        assert resize_to_match(Region(0, 0, 0, 0), Region(2, 2, 5, 5)) == Region(0, 0, 3, 3)

    def test_full_grid_target(self):
        assert resize_to_match(Region(3, 3, 3, 3), FULL_GRID) == FULL_GRID

    @given(regions_strategy(), regions_strategy())
    @settings(max_examples=300)
    def test_dims_always_exact_and_in_grid(self, source, target):
        out = resize_to_match(source, target)
        assert (out.width, out.height) == (target.width, target.height)
