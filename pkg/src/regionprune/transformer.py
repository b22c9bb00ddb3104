"""Small deterministic decoder-only transformer hosting in-stack visual
token pruning.

The stack is pre-norm causal attention + MLP.  Token positions enter through
a per-head linear distance bias on the attention logits rather than input
embeddings, so deleting rows mid-stack keeps the surviving rows' positional
identities intact ("keep-original" policy) or renumbers them ("reindex").
Pruning at layer K means: run layers 1..K on the full sequence, delete the
hidden-state rows of visual tokens outside the region, then run layers
K+1..L on the shortened sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .compressor import VisualTokens
from .grid import Region, TokenGrid, region_to_tokens
from .seeds import derive_rng

ROLE_SYSTEM = "system"
ROLE_VISUAL = "visual"
ROLE_QUERY = "query"

POLICY_KEEP_ORIGINAL = "keep-original"
POLICY_REINDEX = "reindex"


@dataclass
class LayerWeights:
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    ln1_g: np.ndarray
    ln1_b: np.ndarray
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    ln2_g: np.ndarray
    ln2_b: np.ndarray


@dataclass
class ToyTransformer:
    """Decoder stack with seeded weights; the same seed always reproduces
    bitwise-identical weights."""

    layers: int
    heads: int
    hidden: int
    mlp_width: int
    seed: int
    blocks: list[LayerWeights] = field(repr=False)
    ln_f_g: np.ndarray = field(repr=False)
    ln_f_b: np.ndarray = field(repr=False)
    slopes: np.ndarray = field(repr=False)

    @classmethod
    def create(cls, *, layers: int, heads: int, hidden: int,
               mlp_width: int | None = None, seed: int = 0) -> "ToyTransformer":
        if layers < 1 or heads < 1 or hidden < 1:
            raise ValueError("layers, heads and hidden must be positive")
        if hidden % heads != 0:
            raise ValueError(f"hidden {hidden} not divisible by heads {heads}")
        mlp_width = 4 * hidden if mlp_width is None else mlp_width
        rng = derive_rng("toy-transformer", seed)
        attn_scale = 1.0 / math.sqrt(hidden)  # fan-in scaling keeps blocks O(1)
        mlp_scale = 1.0 / math.sqrt(mlp_width)
        blocks = []
        for _ in range(layers):
            blocks.append(LayerWeights(
                wq=rng.standard_normal((hidden, hidden)) * attn_scale,
                wk=rng.standard_normal((hidden, hidden)) * attn_scale,
                wv=rng.standard_normal((hidden, hidden)) * attn_scale,
                wo=rng.standard_normal((hidden, hidden)) * attn_scale,
                ln1_g=np.ones(hidden), ln1_b=np.zeros(hidden),
                w1=rng.standard_normal((hidden, mlp_width)) * attn_scale,
                b1=np.zeros(mlp_width),
                w2=rng.standard_normal((mlp_width, hidden)) * mlp_scale,
                b2=np.zeros(hidden),
                ln2_g=np.ones(hidden), ln2_b=np.zeros(hidden),
            ))
        # Geometric distance-bias slopes, one per head.
        slopes = np.array([2.0 ** (-8.0 * (h + 1) / heads) for h in range(heads)])
        return cls(layers=layers, heads=heads, hidden=hidden,
                   mlp_width=mlp_width, seed=seed, blocks=blocks,
                   ln_f_g=np.ones(hidden), ln_f_b=np.zeros(hidden),
                   slopes=slopes)


@dataclass
class MultimodalSequence:
    """System-prompt rows, then visual-token rows with grid provenance, then
    user-query rows."""

    embeddings: np.ndarray
    roles: tuple[str, ...]
    grid: TokenGrid
    visual_start: int
    visual_count: int

    def __post_init__(self):
        if self.embeddings.shape[0] != len(self.roles):
            raise ValueError("roles length must match embedding rows")
        expect = ((ROLE_SYSTEM,) * self.visual_start
                  + (ROLE_VISUAL,) * self.visual_count
                  + (ROLE_QUERY,) * (len(self.roles) - self.visual_start - self.visual_count))
        if self.roles != expect:
            raise ValueError("sequence must be ordered system -> visual -> query")
        if self.visual_count != self.grid.total_tokens:
            raise ValueError("visual row count must equal grid.total_tokens")

    @property
    def length(self) -> int:
        return self.embeddings.shape[0]

    def positions(self) -> np.ndarray:
        return np.arange(self.length)

    def visual_token_index(self, seq_index: int) -> int:
        """Flat visual-token index of a sequence row (visual rows only)."""
        return seq_index - self.visual_start


def build_sequence(system: np.ndarray, visual: VisualTokens,
                   query: np.ndarray) -> MultimodalSequence:
    if system.shape[0] < 1 or query.shape[0] < 1:
        raise ValueError("system prompt and query must be nonempty")
    emb = np.concatenate([system, visual.data, query], axis=0)
    roles = ((ROLE_SYSTEM,) * system.shape[0]
             + (ROLE_VISUAL,) * visual.data.shape[0]
             + (ROLE_QUERY,) * query.shape[0])
    return MultimodalSequence(emb, roles, visual.grid,
                              visual_start=system.shape[0],
                              visual_count=visual.data.shape[0])


@dataclass(frozen=True)
class PruneConfig:
    """Prune at 1-based layer ``layer_k``: applied after layer K's block
    completes, before layer K+1 runs."""

    layer_k: int
    region: Region
    position_policy: str = POLICY_KEEP_ORIGINAL

    def __post_init__(self):
        if self.layer_k < 1:
            raise ValueError(f"layer_k must be >= 1, got {self.layer_k}")
        if self.position_policy not in (POLICY_KEEP_ORIGINAL, POLICY_REINDEX):
            raise ValueError(f"unknown position policy {self.position_policy!r}")


@dataclass
class PruneReport:
    total_visual: int
    kept_visual: int
    kept_sequence_indices: np.ndarray

    @property
    def dropped_visual(self) -> int:
        return self.total_visual - self.kept_visual

    @property
    def pruning_rate(self) -> float:
        return self.dropped_visual / self.total_visual


@dataclass
class ForwardResult:
    final: np.ndarray          # hidden states after the final layer norm
    last_hidden: np.ndarray    # logits proxy: final hidden of the last row
    positions: np.ndarray
    layer_states: list[np.ndarray] | None = None
    attention: list[np.ndarray] | None = None  # head-mean maps per layer
    report: PruneReport | None = None
    hidden_at_prune: np.ndarray | None = None


def _layer_norm(x: np.ndarray, g: np.ndarray, b: np.ndarray) -> np.ndarray:
    mean = x.mean(axis=1, keepdims=True)
    var = x.var(axis=1, keepdims=True)
    return (x - mean) / np.sqrt(var + 1e-5) * g + b


def _gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + np.tanh(math.sqrt(2.0 / math.pi) * (x + 0.044715 * x ** 3)))


def _attention_block(x, pos, w: LayerWeights, model: ToyTransformer,
                     capture: bool):
    t = x.shape[0]
    dh = model.hidden // model.heads
    h = _layer_norm(x, w.ln1_g, w.ln1_b)
    q = (h @ w.wq).reshape(t, model.heads, dh).transpose(1, 0, 2)
    k = (h @ w.wk).reshape(t, model.heads, dh).transpose(1, 0, 2)
    v = (h @ w.wv).reshape(t, model.heads, dh).transpose(1, 0, 2)
    logits = q @ k.transpose(0, 2, 1) / math.sqrt(dh)
    dist = pos[:, None] - pos[None, :]
    logits -= model.slopes[:, None, None] * dist[None, :, :]
    causal = np.tril(np.ones((t, t), dtype=bool))
    logits = np.where(causal[None, :, :], logits, -np.inf)
    logits -= logits.max(axis=2, keepdims=True)
    e = np.exp(logits)
    probs = e / e.sum(axis=2, keepdims=True)
    ctx = (probs @ v).transpose(1, 0, 2).reshape(t, model.hidden)
    out = ctx @ w.wo
    return out, (probs.mean(axis=0) if capture else None)


def run_layers(model: ToyTransformer, hidden: np.ndarray, positions: np.ndarray,
               first_layer: int, last_layer: int, *,
               capture_hidden: bool = False, capture_attention: bool = False):
    """Run blocks ``first_layer``..``last_layer`` (1-based, inclusive) on the
    given hidden states; no final norm."""
    x = np.array(hidden, dtype=np.float64)
    states = [] if capture_hidden else None
    maps = [] if capture_attention else None
    for li in range(first_layer - 1, last_layer):
        w = model.blocks[li]
        attn_out, attn_map = _attention_block(x, positions, w, model,
                                              capture_attention)
        x = x + attn_out
        h2 = _layer_norm(x, w.ln2_g, w.ln2_b)
        x = x + (_gelu(h2 @ w.w1 + w.b1)) @ w.w2 + w.b2
        if capture_hidden:
            states.append(x.copy())
        if capture_attention:
            maps.append(attn_map)
    return x, states, maps


def forward_baseline(model: ToyTransformer, seq: MultimodalSequence, *,
                     capture_hidden: bool = False,
                     capture_attention: bool = False) -> ForwardResult:
    """Standard pre-norm causal forward over the full sequence."""
    if seq.length == 0:
        raise ValueError("sequence is empty")
    pos = seq.positions()
    x, states, maps = run_layers(model, seq.embeddings, pos, 1, model.layers,
                                 capture_hidden=capture_hidden,
                                 capture_attention=capture_attention)
    final = _layer_norm(x, model.ln_f_g, model.ln_f_b)
    return ForwardResult(final=final, last_hidden=final[-1], positions=pos,
                         layer_states=states, attention=maps)


def _keep_mask(seq: MultimodalSequence, kept_token_indices: set[int]) -> np.ndarray:
    mask = np.ones(seq.length, dtype=bool)
    for i in range(seq.visual_start, seq.visual_start + seq.visual_count):
        if seq.visual_token_index(i) not in kept_token_indices:
            mask[i] = False
    return mask


def _pruned_forward(model: ToyTransformer, seq: MultimodalSequence,
                    layer_k: int, keep_mask: np.ndarray, policy: str, *,
                    capture_hidden: bool, capture_attention: bool) -> ForwardResult:
    pos = seq.positions()
    x, states, maps = run_layers(model, seq.embeddings, pos, 1, layer_k,
                                 capture_hidden=capture_hidden,
                                 capture_attention=capture_attention)
    x = x[keep_mask]
    kept_idx = np.flatnonzero(keep_mask)
    if policy == POLICY_KEEP_ORIGINAL:
        pos = pos[keep_mask]
    else:
        pos = np.arange(x.shape[0])
    hidden_at_prune = x.copy()
    if layer_k < model.layers:
        x, states2, maps2 = run_layers(model, x, pos, layer_k + 1, model.layers,
                                       capture_hidden=capture_hidden,
                                       capture_attention=capture_attention)
        if capture_hidden:
            states.extend(states2)
        if capture_attention:
            maps.extend(maps2)
    final = _layer_norm(x, model.ln_f_g, model.ln_f_b)
    kept_visual = int(keep_mask[seq.visual_start:seq.visual_start + seq.visual_count].sum())
    report = PruneReport(total_visual=seq.visual_count, kept_visual=kept_visual,
                         kept_sequence_indices=kept_idx)
    return ForwardResult(final=final, last_hidden=final[-1], positions=pos,
                         layer_states=states, attention=maps, report=report,
                         hidden_at_prune=hidden_at_prune)


def forward_ilp(model: ToyTransformer, seq: MultimodalSequence,
                cfg: PruneConfig, *, capture_hidden: bool = False,
                capture_attention: bool = False) -> ForwardResult:
    """Region-guided pruning: visual rows outside the region are deleted
    after layer K; system, in-region visual, and query rows continue in
    order."""
    if cfg.layer_k > model.layers:
        raise ValueError(f"layer_k {cfg.layer_k} exceeds model layers {model.layers}")
    kept = set(region_to_tokens(cfg.region, seq.grid).indices)
    if not kept:
        raise ValueError("region maps to zero visual tokens on this grid")
    mask = _keep_mask(seq, kept)
    return _pruned_forward(model, seq, cfg.layer_k, mask, cfg.position_policy,
                           capture_hidden=capture_hidden,
                           capture_attention=capture_attention)


def topr_scores(attn_map: np.ndarray, seq: MultimodalSequence) -> np.ndarray:
    """Mean attention each visual row receives from the query rows in a
    head-averaged attention map."""
    q_start = seq.visual_start + seq.visual_count
    rows = attn_map[q_start:, seq.visual_start:q_start]
    return rows.mean(axis=0)


def forward_topr_baseline(model: ToyTransformer, seq: MultimodalSequence,
                          budget: int, layer_k: int, *,
                          position_policy: str = POLICY_KEEP_ORIGINAL,
                          capture_hidden: bool = False) -> ForwardResult:
    """Attention-score baseline: keep the ``budget`` visual rows that
    receive the highest mean attention from the query rows at layer K, ties
    broken toward the lower token index."""
    if not 1 <= budget <= seq.visual_count:
        raise ValueError(f"budget {budget} outside 1..{seq.visual_count}")
    if layer_k > model.layers:
        raise ValueError(f"layer_k {layer_k} exceeds model layers {model.layers}")
    pos = seq.positions()
    _, _, maps = run_layers(model, seq.embeddings, pos, 1, layer_k,
                            capture_attention=True)
    scores = topr_scores(maps[-1], seq)
    order = np.lexsort((np.arange(scores.shape[0]), -scores))
    kept = set(order[:budget].tolist())
    mask = _keep_mask(seq, kept)
    return _pruned_forward(model, seq, layer_k, mask, position_policy,
                           capture_hidden=capture_hidden,
                           capture_attention=False)


def count_flops(seq_len_before: int, seq_len_after: int, layer_k: int,
                layers: int, hidden: int, heads: int, mlp_width: int) -> int:
    """Analytic attention+MLP FLOP estimate for a pruned forward pass.

    Per layer at sequence length T:
        projections  8*T*d^2   (q, k, v, out; 2 FLOPs per MAC)
        attention    4*T^2*d   (scores + weighted sum; head count cancels)
        mlp          4*T*d*mlp
    Layers 1..K run at the pre-prune length, layers K+1..L at the pruned
    length.  ``layer_k`` = 0 and ``layer_k`` = L give the all-pruned and
    never-pruned bounds.
    """
    if min(seq_len_before, seq_len_after, layers, hidden, heads, mlp_width) < 1:
        raise ValueError("dimensions must be positive")
    if not 0 <= layer_k <= layers:
        raise ValueError(f"layer_k {layer_k} outside 0..{layers}")

    def per_layer(t: int) -> int:
        return 8 * t * hidden * hidden + 4 * t * t * hidden + 4 * t * hidden * mlp_width

    return layer_k * per_layer(seq_len_before) + (layers - layer_k) * per_layer(seq_len_after)
