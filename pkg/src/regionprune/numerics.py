"""Dense float64 numerics: row softmax, scaled dot-product attention,
sinusoidal positional encodings, and the compression graph with analytic
gradients.

Attention here is the literal single-head form used by the compressor: the
key/value matrix is attended directly, with no projection weights, and the
positional encoding is added (not concatenated) before attention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class EmptyKeySetError(ValueError):
    """Attention over zero key rows is undefined."""


class ShapeMismatchError(ValueError):
    """A tensor has the wrong shape; the message names the tensor."""


def _as_matrix(a, name: str) -> np.ndarray:
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeMismatchError(f"{name} must be 2-D, got shape {m.shape}")
    return m


def softmax_rows(m) -> np.ndarray:
    """Row-wise softmax with per-row max subtraction for stability."""
    m = _as_matrix(m, "softmax input")
    shifted = m - m.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_rows_vjp(probs: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Gradient of a row softmax given its output probabilities."""
    inner = (grad * probs).sum(axis=1, keepdims=True)
    return probs * (grad - inner)


def attention(q, kv) -> np.ndarray:
    """softmax(q kv^T / sqrt(d)) kv — kv serves as both keys and values."""
    out, _ = attention_forward(q, kv)
    return out


@dataclass
class AttentionTrace:
    q: np.ndarray
    kv: np.ndarray
    probs: np.ndarray
    scale: float


def attention_forward(q, kv) -> tuple[np.ndarray, AttentionTrace]:
    q = _as_matrix(q, "q")
    kv = _as_matrix(kv, "kv")
    if kv.shape[0] == 0:
        raise EmptyKeySetError("attention requires at least one key row")
    if q.shape[1] != kv.shape[1]:
        raise ShapeMismatchError(
            f"q has dim {q.shape[1]} but kv has dim {kv.shape[1]}")
    scale = 1.0 / math.sqrt(q.shape[1])
    probs = softmax_rows((q @ kv.T) * scale)
    return probs @ kv, AttentionTrace(q, kv, probs, scale)


def attention_vjp(trace: AttentionTrace, grad_out: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gradients (d_q, d_kv) of the recorded attention given upstream grad.

    kv receives contributions from both its value role and its key role.
    """
    g_probs = grad_out @ trace.kv.T
    g_kv = trace.probs.T @ grad_out
    g_logits = softmax_rows_vjp(trace.probs, g_probs)
    g_q = (g_logits @ trace.kv) * trace.scale
    g_kv = g_kv + (g_logits.T @ trace.q) * trace.scale
    return g_q, g_kv


def sinusoid_table(positions: np.ndarray, dim: int) -> np.ndarray:
    """Classic sin/cos interleaved table: channel 2i is sin(p * w_i),
    channel 2i+1 is cos(p * w_i) with w_i = 10000^(-2i/dim)."""
    if dim < 1:
        raise ValueError(f"encoding dim must be >= 1, got {dim}")
    pos = np.asarray(positions, dtype=np.float64).reshape(-1, 1)
    n_pairs = (dim + 1) // 2
    freqs = np.power(10000.0, -2.0 * np.arange(n_pairs) / dim)
    angles = pos * freqs
    table = np.zeros((pos.shape[0], dim))
    table[:, 0::2] = np.sin(angles)
    table[:, 1::2] = np.cos(angles[:, : dim // 2])
    return table


@dataclass(frozen=True)
class PosEncoder:
    """Fixed sinusoidal positional encodings of width ``dim``.

    Visual tokens use a 2-D encoding over (row, col): the first half of the
    channels encodes the column, the second the row.  Query banks and
    compressed slots use a 1-D encoding over the slot index.  Deterministic:
    the same position always yields the same vector.
    """

    dim: int

    def slots(self, count: int) -> np.ndarray:
        return sinusoid_table(np.arange(count), self.dim)

    def grid(self, positions: np.ndarray) -> np.ndarray:
        """positions: (n, 2) array of (row, col)."""
        positions = np.asarray(positions, dtype=np.float64)
        if positions.size == 0:
            return np.zeros((0, self.dim))
        if positions.ndim != 2 or positions.shape[1] != 2:
            raise ShapeMismatchError(
                f"grid positions must be (n, 2), got {positions.shape}")
        dim_col = (self.dim + 1) // 2
        dim_row = self.dim - dim_col
        parts = [sinusoid_table(positions[:, 1], dim_col)]
        if dim_row:
            parts.append(sinusoid_table(positions[:, 0], dim_row))
        return np.concatenate(parts, axis=1)


@dataclass
class CompressionInputs:
    """Raw inputs of the compression graph: token values plus the (row, col)
    provenance used for positional encoding.  ``noncontextual`` may be empty
    (0 rows)."""

    contextual: np.ndarray
    contextual_pos: np.ndarray
    noncontextual: np.ndarray
    noncontextual_pos: np.ndarray
    anchor: np.ndarray
    anchor_pos: np.ndarray


@dataclass
class CompressionTrace:
    inputs: CompressionInputs
    n_ctx_queries: int
    n_nc_queries: int
    ctx_attn: AttentionTrace
    nc_attn: AttentionTrace | None
    fuse_attn: AttentionTrace
    output: np.ndarray


@dataclass
class CompressionGrads:
    q_contextual: np.ndarray
    q_noncontextual: np.ndarray
    contextual: np.ndarray
    noncontextual: np.ndarray
    anchor: np.ndarray


def compression_forward(
    q_contextual: np.ndarray,
    q_noncontextual: np.ndarray,
    inputs: CompressionInputs,
    encoder: PosEncoder,
) -> tuple[np.ndarray, CompressionTrace]:
    """Run the full compression graph and record it for the backward pass.

    Steps: compress the contextual tokens with the contextual query bank
    and the non-contextual tokens with theirs, let the anchor tokens query
    the compressed contextual representation, add the anchor residual, and
    concatenate fused-anchor rows with the compressed non-contextual rows.

    An empty non-contextual set falls back to a zero block of
    ``len(q_noncontextual)`` rows so the output row count is unconditional.
    An empty contextual set raises :class:`EmptyKeySetError`.
    """
    q_ctx = _as_matrix(q_contextual, "q_contextual")
    q_nc = _as_matrix(q_noncontextual, "q_noncontextual")
    x_ctx = _as_matrix(inputs.contextual, "contextual tokens")
    x_anchor = _as_matrix(inputs.anchor, "anchor tokens")
    if x_ctx.shape[0] == 0:
        raise EmptyKeySetError("contextual token set is empty")
    d = q_ctx.shape[1]

    e_q_ctx = q_ctx + encoder.slots(q_ctx.shape[0])
    e_ctx = x_ctx + encoder.grid(inputs.contextual_pos)
    ctx_hat, ctx_attn = attention_forward(e_q_ctx, e_ctx)

    x_nc = np.asarray(inputs.noncontextual, dtype=np.float64).reshape(-1, d)
    if x_nc.shape[0] > 0:
        e_q_nc = q_nc + encoder.slots(q_nc.shape[0])
        e_nc = x_nc + encoder.grid(inputs.noncontextual_pos)
        nc_hat, nc_attn = attention_forward(e_q_nc, e_nc)
    else:
        nc_hat = np.zeros((q_nc.shape[0], d))
        nc_attn = None

    e_anchor = x_anchor + encoder.grid(inputs.anchor_pos)
    e_ctx_hat = ctx_hat + encoder.slots(ctx_hat.shape[0])
    fused_attn_out, fuse_attn = attention_forward(e_anchor, e_ctx_hat)
    fused = fused_attn_out + x_anchor

    output = np.concatenate([fused, nc_hat], axis=0)
    trace = CompressionTrace(
        inputs=inputs,
        n_ctx_queries=q_ctx.shape[0],
        n_nc_queries=q_nc.shape[0],
        ctx_attn=ctx_attn,
        nc_attn=nc_attn,
        fuse_attn=fuse_attn,
        output=output,
    )
    return output, trace


def compression_backward(trace: CompressionTrace, upstream_grad) -> CompressionGrads:
    """Analytic gradients of the recorded compression graph for both query
    banks and all token inputs, given the upstream gradient on the output."""
    up = np.asarray(upstream_grad, dtype=np.float64)
    if up.shape != trace.output.shape:
        raise ShapeMismatchError(
            f"upstream_grad has shape {up.shape}, expected output shape "
            f"{trace.output.shape}")

    n_anchor = trace.inputs.anchor.shape[0]
    g_fused = up[:n_anchor]
    g_nc_hat = up[n_anchor:]

    # Fusion: attention output plus anchor residual.
    g_anchor = g_fused.copy()
    g_e_anchor, g_e_ctx_hat = attention_vjp(trace.fuse_attn, g_fused)
    g_anchor += g_e_anchor
    g_ctx_hat = g_e_ctx_hat  # slot encodings are constants

    g_e_q_ctx, g_e_ctx = attention_vjp(trace.ctx_attn, g_ctx_hat)

    if trace.nc_attn is not None:
        g_e_q_nc, g_e_nc = attention_vjp(trace.nc_attn, g_nc_hat)
    else:
        d = trace.inputs.contextual.shape[1]
        g_e_q_nc = np.zeros((trace.n_nc_queries, d))
        g_e_nc = np.zeros((0, d))

    return CompressionGrads(
        q_contextual=g_e_q_ctx,
        q_noncontextual=g_e_q_nc,
        contextual=g_e_ctx,
        noncontextual=g_e_nc,
        anchor=g_anchor,
    )
