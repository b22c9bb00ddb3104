"""Region providers, budget fitting (verified against brute-force nearest
rectangles), and the recall summary."""

import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regionprune.grid import FULL_GRID, Region, TokenGrid, all_regions, recall, token_count
from regionprune.localizer import (
    BudgetSpec,
    CenterLocalizer,
    FileLocalizer,
    GtLocalizer,
    MAX_FIT_STEPS,
    RandomLocalizer,
    SampleLookupError,
    fit_budget,
    load_predictions,
    make_localizer,
    mean_recall,
    save_predictions,
)


class FakeSample:
    def __init__(self, sample_id, gt_region=None):
        self.id = sample_id
        self.gt_region = gt_region


class TestProviders:
    def test_file_backed_parses_stored_region(self, tmp_path):
        path = tmp_path / "preds.jsonl"
        path.write_text('{"id": "a", "region": "2 1 5 2", "extra": 1}\n')
        loc = FileLocalizer.from_path(path)
        assert loc.localize(FakeSample("a")) == Region(2, 1, 5, 2)

    def test_file_backed_repairs_output(self, tmp_path):
        path = tmp_path / "preds.jsonl"
        path.write_text('{"id": "a", "region": "9 1 5 -1"}\n')
        loc = FileLocalizer.from_path(path)
        assert loc.localize(FakeSample("a")) == Region(5, 0, 7, 1)

    def test_missing_id_raises_lookup(self, tmp_path):
        path = tmp_path / "preds.jsonl"
        path.write_text('{"id": "a", "region": "0 0 7 7"}\n')
        loc = FileLocalizer.from_path(path)
        with pytest.raises(SampleLookupError, match="'b'"):
            loc.localize(FakeSample("b"))

    def test_duplicate_ids_last_wins_with_warning(self, tmp_path, caplog):
        path = tmp_path / "preds.jsonl"
        path.write_text('{"id": "a", "region": "0 0 1 1"}\n'
                        '{"id": "a", "region": "2 2 3 3"}\n')
        with caplog.at_level(logging.WARNING):
            preds = load_predictions(path)
        assert preds["a"] == "2 2 3 3"
        assert any("duplicate" in rec.message for rec in caplog.records)

    def test_predictions_roundtrip(self, tmp_path):
        path = tmp_path / "preds.jsonl"
        regions = {"a": Region(2, 1, 5, 2), "b": FULL_GRID}
        save_predictions(path, regions)
        loc = FileLocalizer.from_path(path)
        assert loc.localize(FakeSample("a")) == regions["a"]
        assert loc.localize(FakeSample("b")) == regions["b"]

    def test_center_four_by_four(self):
        loc = CenterLocalizer()
        sample = FakeSample("x", gt_region=Region(0, 0, 3, 3))
        assert loc.localize(sample) == Region(2, 2, 5, 5)

    def test_center_depends_only_on_dims(self):
        loc = CenterLocalizer()
        a = loc.localize(FakeSample("a", gt_region=Region(0, 0, 3, 3)))
        b = loc.localize(FakeSample("b", gt_region=Region(4, 4, 7, 7)))
        assert a == b

    def test_random_deterministic_per_sample(self):
        loc = RandomLocalizer(seed=5)
        sample = FakeSample("s1", gt_region=Region(1, 1, 3, 2))
        assert loc.localize(sample) == loc.localize(sample)

    def test_random_dims_match_reference(self):
        loc = RandomLocalizer(seed=6)
        for i in range(50):
            sample = FakeSample(f"s{i}", gt_region=Region(2, 3, 4, 4))
            out = loc.localize(sample)
            assert (out.width, out.height) == (3, 2)

    def test_random_call_order_independent(self):
        loc = RandomLocalizer(seed=7)
        samples = [FakeSample(f"s{i}", gt_region=Region(0, 0, 1, 1)) for i in range(6)]
        forward = [loc.localize(s) for s in samples]
        backward = [loc.localize(s) for s in reversed(samples)][::-1]
        assert forward == backward

    def test_random_worse_than_gt_on_average(self):
        gt_loc = GtLocalizer()
        rng_regions = []
        gt_regions = []
        for i in range(1000):
            gt = Region(2, 2, 5, 5)
            sample = FakeSample(f"r{i}", gt_region=gt)
            gt_regions.append(gt)
            rng_regions.append(RandomLocalizer(seed=i).localize(sample))
        rand_mean = mean_recall(gt_regions, rng_regions).mean
        gt_mean = mean_recall(gt_regions, [gt_loc.localize(FakeSample("x", g))
                                           for g in gt_regions]).mean
        assert rand_mean < gt_mean == 1.0

    def test_factory_kinds(self, tmp_path):
        path = tmp_path / "preds.jsonl"
        path.write_text('{"id": "a", "region": "0 0 7 7"}\n')
        assert isinstance(make_localizer("gt"), GtLocalizer)
        assert isinstance(make_localizer("file", predictions_path=path), FileLocalizer)
        assert isinstance(make_localizer("center"), CenterLocalizer)
        assert isinstance(make_localizer("random", seed=1), RandomLocalizer)
        with pytest.raises(ValueError, match="unknown localizer"):
            make_localizer("oracle")


def region_strategy():
    def build(x0, dx, y0, dy):
        return Region(x0, y0, min(x0 + dx, 7), min(y0 + dy, 7))
    return st.builds(build, st.integers(0, 7), st.integers(0, 7),
                     st.integers(0, 7), st.integers(0, 7))


class TestFitBudget:
    def test_exact_target_is_fixed_point(self):
        grid = TokenGrid(side=24)
        region = Region(2, 2, 3, 3)  # 36 tokens
        out = fit_budget(region, BudgetSpec(rate=0.9375, grid=grid))  # target 36
        assert out == region

    def test_grow_example_reaches_nearest_achievable(self):
        grid = TokenGrid(side=24)
        start = Region(3, 3, 4, 4)
        out = fit_budget(start, BudgetSpec(rate=0.5, grid=grid), target=64)
        assert token_count(out, grid) == 72
        assert out.contains(start)
        # Brute force over all 1296 rectangles related to the start by
        # containment: no reachable rectangle is closer to the target.
        best = min(abs(token_count(c, grid) - 64) for c in all_regions()
                   if c.contains(start) or start.contains(c))
        assert abs(token_count(out, grid) - 64) == best

    def test_rate_zero_grows_to_full_grid(self):
        grid = TokenGrid(side=24)
        out = fit_budget(Region(5, 1, 6, 2), BudgetSpec(rate=0.0, grid=grid))
        assert out == FULL_GRID

    def test_rates_imply_paper_targets(self):
        grid = TokenGrid(side=24)
        for rate, kept in [(0.667, 192), (0.778, 128), (0.889, 64)]:
            assert BudgetSpec(rate=rate, grid=grid).kept_target == kept

    def test_bad_rate_rejected(self):
        with pytest.raises(ValueError):
            BudgetSpec(rate=1.0, grid=TokenGrid(side=24))

    @given(region_strategy(), st.sampled_from([8, 14, 16, 24]),
           st.floats(min_value=0.0, max_value=0.97))
    @settings(max_examples=300, deadline=None)
    def test_result_valid_and_containment_related(self, region, side, rate):
        grid = TokenGrid(side=side)
        out = fit_budget(region, BudgetSpec(rate=rate, grid=grid))
        assert 0 <= out.x_min <= out.x_max <= 7
        assert 0 <= out.y_min <= out.y_max <= 7
        assert out.contains(region) or region.contains(out)

    def test_every_rectangle_terminates_and_moves_toward_target(self):
        grid = TokenGrid(side=24)
        for rate in (0.667, 0.778, 0.889):
            spec = BudgetSpec(rate=rate, grid=grid)
            for region in all_regions():
                out = fit_budget(region, spec)
                before = abs(token_count(region, grid) - spec.kept_target)
                after = abs(token_count(out, grid) - spec.kept_target)
                assert after <= before

    def test_step_bound_suffices(self):
        # Worst case is corner 1x1 growing to the full grid: 14 side steps.
        grid = TokenGrid(side=24)
        out = fit_budget(Region(0, 0, 0, 0), BudgetSpec(rate=0.0, grid=grid))
        assert out == FULL_GRID
        assert MAX_FIT_STEPS >= 14


class TestMeanRecall:
    def test_perfect_predictions(self):
        regions = [Region(1, 1, 4, 4), Region(0, 0, 7, 7), Region(3, 2, 5, 6)]
        summary = mean_recall(regions, regions)
        assert summary.mean == 1.0
        assert summary.above_05 == summary.above_07 == summary.above_09 == 3

    def test_report_shape(self):
        summary = mean_recall([Region(0, 0, 3, 3)], [Region(2, 2, 5, 5)])
        d = summary.as_dict()
        assert set(d) == {"count", "mean_recall", "recall>0.5", "recall>0.7",
                          "recall>0.9"}
        assert d["count"] == 1 and d["mean_recall"] == 0.25

    def test_empty_is_error_not_nan(self):
        with pytest.raises(ValueError, match="empty"):
            mean_recall([], [])

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            mean_recall([FULL_GRID], [])

    def test_random_baseline_mean_below_gt(self):
        rng = np.random.default_rng(0)
        gts = []
        for _ in range(200):
            x0, y0 = rng.integers(0, 5, size=2)
            gts.append(Region(int(x0), int(y0), int(x0) + 2, int(y0) + 2))
        rand = [RandomLocalizer(seed=3).localize(FakeSample(f"m{i}", g))
                for i, g in enumerate(gts)]
        assert mean_recall(gts, rand).mean < mean_recall(gts, gts).mean
