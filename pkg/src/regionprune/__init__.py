"""Region-guided visual-token pruning and compression.

Core pieces: the 8x8 block-coordinate region model (:mod:`.grid`), dense
float64 numerics with analytic gradients (:mod:`.numerics`), the
learnable-query token compressor (:mod:`.compressor`), a deterministic toy
decoder with in-stack pruning (:mod:`.transformer`), pluggable region
providers and budget fitting (:mod:`.localizer`), and a batch evaluation
harness with a CLI (:mod:`.harness`).
"""

from .grid import (
    FULL_GRID,
    Region,
    RegionParseError,
    TokenGrid,
    TokenIndexSet,
    format_region,
    parse_region,
    recall,
    region_to_tokens,
    resize_to_match,
    token_count,
)

__all__ = [
    "FULL_GRID",
    "Region",
    "RegionParseError",
    "TokenGrid",
    "TokenIndexSet",
    "format_region",
    "parse_region",
    "recall",
    "region_to_tokens",
    "resize_to_match",
    "token_count",
]

__version__ = "0.1.0"
