"""Pluggable contextual-region providers and budget fitting.

Providers stand in for a trained localization model: ground-truth regions
carried by the dataset, predictions loaded from a JSON Lines file, and the
Center/Random baselines that reuse the reference region's dimensions.  The
budget fitter grows or shrinks a region one block side at a time until the
kept-token count is as close as the grid allows to a target pruning rate.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .grid import (
    FULL_GRID,
    GRID_BLOCKS,
    Region,
    TokenGrid,
    parse_region,
    recall,
    resize_to_match,
    token_count,
)
from .seeds import derive_rng

logger = logging.getLogger(__name__)

LOCALIZER_KINDS = ("gt", "file", "center", "random")


class SampleLookupError(LookupError):
    """A sample id has no region available from this provider."""


class PredictionsFileError(ValueError):
    """A predictions file is unreadable or malformed."""


def load_predictions(path: str | Path) -> dict[str, str]:
    """JSON Lines of {"id": ..., "region": "x_min y_min x_max y_max"}.
    Unknown keys are ignored; duplicate ids keep the last entry with a
    warning."""
    out: dict[str, str] = {}
    with Path(path).open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                sample_id = str(obj["id"])
                region = str(obj["region"])
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise PredictionsFileError(
                    f"{path}: bad prediction on line {line_no}: {e}") from e
            if sample_id in out:
                logger.warning("%s: duplicate id %r on line %d, keeping last",
                               path, sample_id, line_no)
            out[sample_id] = region
    return out


def save_predictions(path: str | Path, regions: dict[str, Region]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for sample_id, region in regions.items():
            fh.write(json.dumps({"id": sample_id,
                                 "region": f"{region.x_min} {region.y_min} "
                                           f"{region.x_max} {region.y_max}"}) + "\n")


class GtLocalizer:
    """Ground-truth regions carried on the samples themselves."""

    def localize(self, sample) -> Region:
        if sample.gt_region is None:
            raise SampleLookupError(f"sample {sample.id!r} has no gt_region")
        return sample.gt_region


class FileLocalizer:
    """Regions from an external predictions file, repaired on parse."""

    def __init__(self, predictions: dict[str, str]):
        self.predictions = predictions

    @classmethod
    def from_path(cls, path: str | Path) -> "FileLocalizer":
        return cls(load_predictions(path))

    def localize(self, sample) -> Region:
        try:
            text = self.predictions[sample.id]
        except KeyError:
            raise SampleLookupError(
                f"sample {sample.id!r} missing from predictions file") from None
        region, repairs = parse_region(text)
        for repair in repairs:
            logger.warning("sample %r: %s", sample.id, repair)
        return region


class CenterLocalizer:
    """Grid-centered region with the reference region's dimensions.  The
    output depends only on those dimensions, never on sample content."""

    def __init__(self, size_from=None):
        self.size_from = size_from or GtLocalizer()

    def localize(self, sample) -> Region:
        ref = self.size_from.localize(sample)
        return resize_to_match(FULL_GRID, ref)


class RandomLocalizer:
    """Uniformly placed region with the reference region's dimensions,
    fully determined by (seed, sample id)."""

    def __init__(self, seed: int, size_from=None):
        self.seed = seed
        self.size_from = size_from or GtLocalizer()

    def localize(self, sample) -> Region:
        ref = self.size_from.localize(sample)
        rng = derive_rng("random-localizer", self.seed, sample.id)
        x0 = int(rng.integers(0, GRID_BLOCKS - ref.width + 1))
        y0 = int(rng.integers(0, GRID_BLOCKS - ref.height + 1))
        return Region(x0, y0, x0 + ref.width - 1, y0 + ref.height - 1)


def make_localizer(kind: str, *, predictions_path: str | Path | None = None,
                   seed: int = 0, size_from: str = "gt"):
    """Factory over the provider kinds: gt | file | center | random."""
    if kind == "gt":
        return GtLocalizer()
    if kind == "file":
        if predictions_path is None:
            raise ValueError("file localizer needs a predictions path")
        return FileLocalizer.from_path(predictions_path)
    ref = (FileLocalizer.from_path(predictions_path)
           if size_from == "pred" else GtLocalizer())
    if kind == "center":
        return CenterLocalizer(size_from=ref)
    if kind == "random":
        return RandomLocalizer(seed, size_from=ref)
    raise ValueError(f"unknown localizer kind {kind!r}; expected one of {LOCALIZER_KINDS}")


@dataclass(frozen=True)
class BudgetSpec:
    """Target pruning rate over a token grid.  The implied kept-token target
    is round((1 - rate) * total_tokens), at least 1."""

    rate: float
    grid: TokenGrid

    def __post_init__(self):
        if not 0.0 <= self.rate < 1.0:
            raise ValueError(f"pruning rate must be in [0, 1), got {self.rate}")

    @property
    def kept_target(self) -> int:
        return max(1, round((1.0 - self.rate) * self.grid.total_tokens))


_GROW_TIE_ORDER = ("right", "down", "left", "up")
_SHRINK_TIE_ORDER = ("left", "up", "right", "down")
MAX_FIT_STEPS = 28  # four sides times at most seven single-block steps


def _grow_candidates(r: Region) -> list[tuple[str, Region]]:
    out = []
    if r.x_max < GRID_BLOCKS - 1:
        out.append(("right", Region(r.x_min, r.y_min, r.x_max + 1, r.y_max)))
    if r.y_max < GRID_BLOCKS - 1:
        out.append(("down", Region(r.x_min, r.y_min, r.x_max, r.y_max + 1)))
    if r.x_min > 0:
        out.append(("left", Region(r.x_min - 1, r.y_min, r.x_max, r.y_max)))
    if r.y_min > 0:
        out.append(("up", Region(r.x_min, r.y_min - 1, r.x_max, r.y_max)))
    return out


def _shrink_candidates(r: Region) -> list[tuple[str, Region]]:
    out = []
    if r.width > 1:
        out.append(("left", Region(r.x_min + 1, r.y_min, r.x_max, r.y_max)))
        out.append(("right", Region(r.x_min, r.y_min, r.x_max - 1, r.y_max)))
    if r.height > 1:
        out.append(("up", Region(r.x_min, r.y_min + 1, r.x_max, r.y_max)))
        out.append(("down", Region(r.x_min, r.y_min, r.x_max, r.y_max - 1)))
    return out


def fit_budget(region: Region, spec: BudgetSpec, target: int | None = None) -> Region:
    """Adjust a region toward a kept-token target, one block side per step.

    Growing tries the largest-gain side first (ties right, then down);
    shrinking the smallest-loss side first (ties left, then up).  The first
    candidate that strictly reduces |kept - target| is applied; when none
    does, the fit stops.  The result always contains or is contained by the
    input and stays rectangular and on the grid.
    """
    if target is None:
        target = spec.kept_target
    kept = token_count(region, spec.grid)
    if kept == target:
        return region
    grow = kept < target
    for _ in range(MAX_FIT_STEPS):
        if grow:
            cands = _grow_candidates(region)
            order = {s: i for i, s in enumerate(_GROW_TIE_ORDER)}
            key = lambda item: (-(token_count(item[1], spec.grid) - kept), order[item[0]])
        else:
            cands = _shrink_candidates(region)
            order = {s: i for i, s in enumerate(_SHRINK_TIE_ORDER)}
            key = lambda item: (kept - token_count(item[1], spec.grid), order[item[0]])
        step = None
        for _, cand in sorted(cands, key=key):
            cand_kept = token_count(cand, spec.grid)
            if abs(cand_kept - target) < abs(kept - target):
                step = (cand, cand_kept)
                break
        if step is None:
            break
        region, kept = step
        if kept == target:
            break
    return region


@dataclass(frozen=True)
class RecallSummary:
    count: int
    mean: float
    above_05: int
    above_07: int
    above_09: int

    def as_dict(self) -> dict:
        return {"count": self.count, "mean_recall": self.mean,
                "recall>0.5": self.above_05, "recall>0.7": self.above_07,
                "recall>0.9": self.above_09}


def mean_recall(gt_regions: list[Region], pred_regions: list[Region]) -> RecallSummary:
    """Mean area recall plus the counts above the 0.5/0.7/0.9 thresholds."""
    if len(gt_regions) != len(pred_regions):
        raise ValueError(
            f"length mismatch: {len(gt_regions)} gt vs {len(pred_regions)} pred")
    if not gt_regions:
        raise ValueError("cannot summarize an empty region list")
    values = [recall(gt, pred) for gt, pred in zip(gt_regions, pred_regions)]
    return RecallSummary(
        count=len(values),
        mean=sum(values) / len(values),
        above_05=sum(1 for v in values if v > 0.5),
        above_07=sum(1 for v in values if v > 0.7),
        above_09=sum(1 for v in values if v > 0.9),
    )
