"""Region-guided token compression, end to end.

Tokens are split into contextual (inside the region) and non-contextual
sets, each compressed by a learnable query bank, while an 8x8 patch of
original anchor tokens centered on the region midpoint is carried through a
residual fusion step.  The output row count is a structural constant:
``n_anchor + n_noncontextual_queries`` regardless of input size.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Region, TokenGrid, region_cell_spans, region_to_tokens, round_half_down
from .numerics import (
    CompressionGrads,
    CompressionInputs,
    CompressionTrace,
    EmptyKeySetError,
    PosEncoder,
    ShapeMismatchError,
    attention,
    compression_backward,
    compression_forward,
)
from .seeds import derive_rng

DEFAULT_CONTEXTUAL_QUERIES = 64
DEFAULT_NONCONTEXTUAL_QUERIES = 4
DEFAULT_ANCHOR_TOKENS = 64


@dataclass(frozen=True)
class VisualTokens:
    """Dense token matrix (total_tokens x dim) with its grid layout; row i
    corresponds to grid.token_position(i)."""

    data: np.ndarray
    grid: TokenGrid

    def __post_init__(self):
        if self.data.ndim != 2:
            raise ShapeMismatchError(f"token matrix must be 2-D, got {self.data.shape}")
        if self.data.shape[0] != self.grid.total_tokens:
            raise ShapeMismatchError(
                f"token matrix has {self.data.shape[0]} rows, grid expects "
                f"{self.grid.total_tokens}")

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def positions(self) -> np.ndarray:
        """(total, 2) array of (row, col) with views stacked along the row
        axis (row' = view * side + row) so every token keeps a distinct
        encodable position."""
        side = self.grid.side
        per_view = side * side
        pos = np.empty((self.grid.total_tokens, 2), dtype=np.int64)
        rows = np.repeat(np.arange(side), side)
        cols = np.tile(np.arange(side), side)
        for view in range(self.grid.views):
            sl = slice(view * per_view, (view + 1) * per_view)
            pos[sl, 0] = rows + view * side
            pos[sl, 1] = cols
        return pos


@dataclass(frozen=True)
class TokenSlice:
    """A subset of token rows with their flat indices and positions."""

    data: np.ndarray
    indices: np.ndarray
    positions: np.ndarray

    def __len__(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class PlcParams:
    """Learnable query banks of the compressor plus its fixed structural
    counts.  ``n_anchor`` must be a perfect square whose side fits the token
    grid the params are applied to."""

    q_contextual: np.ndarray
    q_noncontextual: np.ndarray
    n_anchor: int = DEFAULT_ANCHOR_TOKENS
    encoder: PosEncoder = field(init=False)

    def __post_init__(self):
        qc = np.asarray(self.q_contextual, dtype=np.float64)
        qn = np.asarray(self.q_noncontextual, dtype=np.float64)
        if qc.ndim != 2 or qn.ndim != 2:
            raise ShapeMismatchError("query banks must be 2-D matrices")
        if qc.shape[0] < 1 or qn.shape[0] < 1:
            raise ValueError("query banks need at least one row each")
        if qc.shape[1] != qn.shape[1]:
            raise ShapeMismatchError(
                f"query banks disagree on dim: {qc.shape[1]} vs {qn.shape[1]}")
        if self.n_anchor < 1 or _isqrt(self.n_anchor) is None:
            raise ValueError(f"n_anchor must be a perfect square >= 1, got {self.n_anchor}")
        object.__setattr__(self, "q_contextual", qc)
        object.__setattr__(self, "q_noncontextual", qn)
        object.__setattr__(self, "encoder", PosEncoder(qc.shape[1]))

    @property
    def dim(self) -> int:
        return self.q_contextual.shape[1]

    @property
    def anchor_side(self) -> int:
        return _isqrt(self.n_anchor)

    @property
    def output_rows(self) -> int:
        return self.n_anchor + self.q_noncontextual.shape[0]

    @classmethod
    def initialize(cls, dim: int, *,
                   n_contextual: int = DEFAULT_CONTEXTUAL_QUERIES,
                   n_noncontextual: int = DEFAULT_NONCONTEXTUAL_QUERIES,
                   n_anchor: int = DEFAULT_ANCHOR_TOKENS,
                   seed: int = 0) -> "PlcParams":
        """Seeded Gaussian init, scale 1/sqrt(dim)."""
        rng = derive_rng("plc-init", seed)
        scale = 1.0 / np.sqrt(dim)
        return cls(
            q_contextual=rng.standard_normal((n_contextual, dim)) * scale,
            q_noncontextual=rng.standard_normal((n_noncontextual, dim)) * scale,
            n_anchor=n_anchor,
        )


def _isqrt(n: int) -> int | None:
    r = int(np.sqrt(n))
    for cand in (r - 1, r, r + 1):
        if cand >= 0 and cand * cand == n:
            return cand
    return None


@dataclass(frozen=True)
class PlcOutput:
    """Compressed token matrix with per-row provenance tags, fused-anchor
    rows first.  ``noncontextual_source_empty`` flags the zero-block
    fallback used when the region covers the whole grid."""

    tokens: np.ndarray
    provenance: tuple[str, ...]
    noncontextual_source_empty: bool

    def __post_init__(self):
        if self.tokens.shape[0] != len(self.provenance):
            raise ShapeMismatchError("provenance length must match token rows")


def partition(tokens: VisualTokens, region: Region) -> tuple[TokenSlice, TokenSlice]:
    """Split rows into (contextual, noncontextual) by region membership,
    keeping flat indices and (row, col) provenance on both parts."""
    member = region_to_tokens(region, tokens.grid)
    mask = np.zeros(tokens.grid.total_tokens, dtype=bool)
    mask[list(member.indices)] = True
    pos = tokens.positions()
    idx = np.arange(tokens.grid.total_tokens)
    ctx = TokenSlice(tokens.data[mask], idx[mask], pos[mask])
    nc = TokenSlice(tokens.data[~mask], idx[~mask], pos[~mask])
    return ctx, nc


def extract_anchor(tokens: VisualTokens, region: Region,
                   n_anchor: int = DEFAULT_ANCHOR_TOKENS) -> TokenSlice:
    """Square patch of sqrt(n_anchor) x sqrt(n_anchor) original tokens
    centered on the midpoint of the region's token extent, clamped to stay
    on the grid.  Multi-view layouts take the patch from the base view.
    """
    patch = _isqrt(n_anchor)
    if patch is None:
        raise ValueError(f"n_anchor must be a perfect square, got {n_anchor}")
    side = tokens.grid.side
    if side < patch:
        raise ValueError(
            f"grid side {side} cannot hold a {patch}x{patch} anchor patch")
    (r0, r1), (c0, c1) = region_cell_spans(region, side)
    if r1 < r0 or c1 < c0:
        raise EmptyKeySetError("region maps to zero tokens on this grid")
    center_r = (r0 + r1 + 1) / 2
    center_c = (c0 + c1 + 1) / 2
    corner_r = min(max(round_half_down(center_r - patch / 2), 0), side - patch)
    corner_c = min(max(round_half_down(center_c - patch / 2), 0), side - patch)
    indices = []
    for r in range(corner_r, corner_r + patch):
        for c in range(corner_c, corner_c + patch):
            indices.append(r * side + c)
    idx = np.asarray(indices)
    return TokenSlice(tokens.data[idx], idx, tokens.positions()[idx])


def build_graph_inputs(tokens: VisualTokens, region: Region,
                       params: PlcParams) -> tuple[CompressionInputs, TokenSlice, TokenSlice, TokenSlice]:
    """Partition + anchor extraction packaged for the compression graph."""
    if params.dim != tokens.dim:
        raise ShapeMismatchError(
            f"params dim {params.dim} does not match token dim {tokens.dim}")
    ctx, nc = partition(tokens, region)
    if len(ctx) == 0:
        raise EmptyKeySetError(
            "contextual region maps to zero tokens (degenerate grid)")
    anchor = extract_anchor(tokens, region, params.n_anchor)
    inputs = CompressionInputs(
        contextual=ctx.data,
        contextual_pos=ctx.positions,
        noncontextual=nc.data,
        noncontextual_pos=nc.positions,
        anchor=anchor.data,
        anchor_pos=anchor.positions,
    )
    return inputs, ctx, nc, anchor


def compress(tokens: VisualTokens, region: Region, params: PlcParams) -> PlcOutput:
    """Full compression: always ``params.output_rows`` output rows, whatever
    the input token count."""
    out, _ = compress_with_trace(tokens, region, params)
    return out


def compress_with_trace(tokens: VisualTokens, region: Region,
                        params: PlcParams) -> tuple[PlcOutput, CompressionTrace]:
    inputs, _, nc, _ = build_graph_inputs(tokens, region, params)
    data, trace = compression_forward(
        params.q_contextual, params.q_noncontextual, inputs, params.encoder)
    nc_empty = len(nc) == 0
    provenance = (("fused-anchor",) * params.n_anchor
                  + ("compressed-noncontextual",) * params.q_noncontextual.shape[0])
    return PlcOutput(data, provenance, nc_empty), trace


def compress_ablated(tokens: VisualTokens, region: Region,
                     params: PlcParams) -> np.ndarray:
    """Variant without anchor tokens and fusion: just the two compressed
    blocks concatenated, contextual rows first."""
    if params.dim != tokens.dim:
        raise ShapeMismatchError(
            f"params dim {params.dim} does not match token dim {tokens.dim}")
    ctx, nc = partition(tokens, region)
    if len(ctx) == 0:
        raise EmptyKeySetError(
            "contextual region maps to zero tokens (degenerate grid)")
    enc = params.encoder
    e_q_ctx = params.q_contextual + enc.slots(params.q_contextual.shape[0])
    ctx_hat = attention(e_q_ctx, ctx.data + enc.grid(ctx.positions))
    if len(nc) > 0:
        e_q_nc = params.q_noncontextual + enc.slots(params.q_noncontextual.shape[0])
        nc_hat = attention(e_q_nc, nc.data + enc.grid(nc.positions))
    else:
        nc_hat = np.zeros((params.q_noncontextual.shape[0], params.dim))
    return np.concatenate([ctx_hat, nc_hat], axis=0)


def token_input_gradients(tokens: VisualTokens, region: Region,
                          params: PlcParams,
                          upstream_grad: np.ndarray) -> tuple[np.ndarray, CompressionGrads]:
    """Gradient of the compression output wrt the original token matrix,
    accumulating the contextual, non-contextual and anchor paths back onto
    their source rows.  Also returns the per-input graph gradients."""
    inputs, ctx, nc, anchor = build_graph_inputs(tokens, region, params)
    _, trace = compression_forward(
        params.q_contextual, params.q_noncontextual, inputs, params.encoder)
    grads = compression_backward(trace, upstream_grad)
    full = np.zeros_like(tokens.data)
    np.add.at(full, ctx.indices, grads.contextual)
    if len(nc) > 0:
        np.add.at(full, nc.indices, grads.noncontextual)
    np.add.at(full, anchor.indices, grads.anchor)
    return full, grads
