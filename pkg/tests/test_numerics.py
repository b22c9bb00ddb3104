"""Softmax/attention against scalar-loop oracles, and analytic gradients of
the compression graph against central finite differences."""

import math

import numpy as np
import pytest

from regionprune.numerics import (
    CompressionInputs,
    EmptyKeySetError,
    PosEncoder,
    ShapeMismatchError,
    attention,
    compression_backward,
    compression_forward,
    sinusoid_table,
    softmax_rows,
)
from regionprune.seeds import derive_rng


def scalar_softmax_rows(m):
    out = []
    for row in m:
        mx = max(row)
        exps = [math.exp(v - mx) for v in row]
        s = sum(exps)
        out.append([e / s for e in exps])
    return np.array(out)


def scalar_attention(q, kv):
    """Straight-line re-evaluation with explicit loops."""
    a, d = q.shape
    b = kv.shape[0]
    scale = 1.0 / math.sqrt(d)
    logits = [[sum(q[i][k] * kv[j][k] for k in range(d)) * scale
               for j in range(b)] for i in range(a)]
    probs = scalar_softmax_rows(np.array(logits))
    out = [[sum(probs[i][j] * kv[j][k] for j in range(b)) for k in range(d)]
           for i in range(a)]
    return np.array(out)


class TestSoftmax:
    def test_uniform(self):
        out = softmax_rows(np.array([[0.0, 0.0, 0.0]]))
        assert np.allclose(out, 1 / 3, atol=1e-15)

    def test_saturation_stability(self):
        out = softmax_rows(np.array([[1000.0, 0.0]]))
        assert abs(out[0, 0] - 1.0) < 1e-12
        assert abs(out[0, 1]) < 1e-12

    def test_hand_ratios(self):
        m = np.log(np.array([[1.0, 3.0], [2.0, 2.0]]))
        out = softmax_rows(m)
        assert np.allclose(out, [[0.25, 0.75], [0.5, 0.5]], atol=1e-15)

    def test_rows_sum_to_one(self):
        rng = derive_rng("softmax-sum", 0)
        m = rng.standard_normal((40, 17)) * 30
        out = softmax_rows(m)
        assert np.all(out >= 0)
        assert np.max(np.abs(out.sum(axis=1) - 1.0)) < 1e-12

    def test_shift_invariance(self):
        rng = derive_rng("softmax-shift", 1)
        m = rng.standard_normal((5, 9))
        shifted = m + 123.456
        assert np.max(np.abs(softmax_rows(m) - softmax_rows(shifted))) < 1e-12


class TestAttention:
    def test_single_key_row(self):
        rng = derive_rng("attn-single", 2)
        q = rng.standard_normal((4, 6))
        kv = rng.standard_normal((1, 6))
        out = attention(q, kv)
        assert np.allclose(out, np.repeat(kv, 4, axis=0), atol=1e-15)

    def test_zero_logits_average(self):
        kv = np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0], [0, 0, 1.0, 0]])
        q = np.array([[0.0, 0, 0, 5.0], [0.0, 0, 0, -2.0]])  # orthogonal to kv rows
        out = attention(q, kv)
        assert np.allclose(out, np.tile(kv.mean(axis=0), (2, 1)), atol=1e-15)

    def test_matches_scalar_loop_oracle(self):
        rng = derive_rng("attn-oracle", 7)
        q = rng.standard_normal((3, 4))
        kv = rng.standard_normal((5, 4))
        assert np.max(np.abs(attention(q, kv) - scalar_attention(q, kv))) < 1e-12

    def test_many_seeds_vs_oracle(self):
        for seed in range(10):
            rng = derive_rng("attn-sweep", seed)
            a, b, d = rng.integers(1, 7), rng.integers(1, 9), rng.integers(2, 10)
            q = rng.standard_normal((a, d)) * 2
            kv = rng.standard_normal((b, d)) * 2
            assert np.max(np.abs(attention(q, kv) - scalar_attention(q, kv))) < 1e-12

    def test_convex_combination_of_rows(self):
        rng = derive_rng("attn-convex", 3)
        q = rng.standard_normal((6, 5)) * 3
        kv = rng.standard_normal((7, 5)) * 3
        out = attention(q, kv)
        lo, hi = kv.min(axis=0), kv.max(axis=0)
        assert np.all(out >= lo - 1e-12) and np.all(out <= hi + 1e-12)

    def test_empty_keys_raise(self):
        with pytest.raises(EmptyKeySetError):
            attention(np.zeros((2, 3)), np.zeros((0, 3)))

    def test_dim_mismatch_raises(self):
        with pytest.raises(ShapeMismatchError):
            attention(np.zeros((2, 3)), np.zeros((2, 4)))


class TestPosEncoder:
    def test_deterministic_and_finite(self):
        enc = PosEncoder(16)
        a = enc.slots(10)
        b = enc.slots(10)
        assert np.array_equal(a, b)
        assert np.all(np.isfinite(a))
        pos = np.array([[0, 0], [3, 5], [23, 23]])
        g1, g2 = enc.grid(pos), enc.grid(pos)
        assert np.array_equal(g1, g2)

    def test_distinct_positions_distinct_codes(self):
        enc = PosEncoder(8)
        pos = np.array([[r, c] for r in range(12) for c in range(12)])
        table = enc.grid(pos)
        assert len({tuple(v) for v in np.round(table, 9)}) == len(pos)

    def test_sinusoid_first_channels(self):
        table = sinusoid_table(np.array([0.0, 1.0, 2.0]), 4)
        assert np.allclose(table[:, 0], np.sin([0, 1, 2]))
        assert np.allclose(table[:, 1], np.cos([0, 1, 2]))

    def test_odd_dim_supported(self):
        table = sinusoid_table(np.arange(5), 7)
        assert table.shape == (5, 7)
        assert np.all(np.isfinite(table))


def random_problem(seed, *, n_ctx=12, n_nc=6, n_qc=4, n_qn=2, n_anchor=4, d=8):
    rng = derive_rng("plc-grad", seed)
    q_ctx = rng.standard_normal((n_qc, d))
    q_nc = rng.standard_normal((n_qn, d))
    inputs = CompressionInputs(
        contextual=rng.standard_normal((n_ctx, d)),
        contextual_pos=rng.integers(0, 24, size=(n_ctx, 2)),
        noncontextual=rng.standard_normal((n_nc, d)),
        noncontextual_pos=rng.integers(0, 24, size=(n_nc, 2)),
        anchor=rng.standard_normal((n_anchor, d)),
        anchor_pos=rng.integers(0, 24, size=(n_anchor, 2)),
    )
    encoder = PosEncoder(d)
    upstream = rng.standard_normal((n_anchor + n_qn, d))
    return q_ctx, q_nc, inputs, encoder, upstream


def loss_fn(q_ctx, q_nc, inputs, encoder, upstream):
    out, _ = compression_forward(q_ctx, q_nc, inputs, encoder)
    return float(np.sum(out * upstream))


def finite_difference_grad(array, rebuild_loss):
    """Central differences with step 1e-5 * (1 + |x|) per entry."""
    grad = np.zeros_like(array)
    it = np.nditer(array, flags=["multi_index"])
    for x in it:
        idx = it.multi_index
        h = 1e-5 * (1.0 + abs(float(x)))
        orig = array[idx]
        array[idx] = orig + h
        f_plus = rebuild_loss()
        array[idx] = orig - h
        f_minus = rebuild_loss()
        array[idx] = orig
        grad[idx] = (f_plus - f_minus) / (2 * h)
    return grad


def max_rel_error(analytic, fd):
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(fd)))
    return float(np.max(np.abs(analytic - fd) / denom)) if analytic.size else 0.0


class TestCompressionGradients:
    def grads_for(self, seed, **kw):
        q_ctx, q_nc, inputs, encoder, upstream = random_problem(seed, **kw)
        _, trace = compression_forward(q_ctx, q_nc, inputs, encoder)
        grads = compression_backward(trace, upstream)
        rebuild = lambda: loss_fn(q_ctx, q_nc, inputs, encoder, upstream)
        pairs = [
            (grads.q_contextual, q_ctx),
            (grads.q_noncontextual, q_nc),
            (grads.contextual, inputs.contextual),
            (grads.noncontextual, inputs.noncontextual),
            (grads.anchor, inputs.anchor),
        ]
        return pairs, rebuild

    def test_zero_upstream_gives_zero_grads(self):
        q_ctx, q_nc, inputs, encoder, upstream = random_problem(0)
        _, trace = compression_forward(q_ctx, q_nc, inputs, encoder)
        grads = compression_backward(trace, np.zeros_like(upstream) * 0.0)
        for g in (grads.q_contextual, grads.q_noncontextual, grads.contextual,
                  grads.noncontextual, grads.anchor):
            assert np.all(g == 0)

    def test_noncontextual_rows_do_not_touch_fusion_path(self):
        q_ctx, q_nc, inputs, encoder, upstream = random_problem(1)
        _, trace = compression_forward(q_ctx, q_nc, inputs, encoder)
        up = np.zeros_like(upstream)
        up[inputs.anchor.shape[0]:] = 1.0  # only compressed-noncontextual rows
        grads = compression_backward(trace, up)
        assert np.all(grads.q_contextual == 0)
        assert np.all(grads.contextual == 0)
        assert np.all(grads.anchor == 0)
        assert np.any(grads.q_noncontextual != 0)

    def test_single_instance_matches_finite_differences(self):
        pairs, rebuild = self.grads_for(7)
        for analytic, array in pairs:
            fd = finite_difference_grad(array, rebuild)
            assert max_rel_error(analytic, fd) <= 1e-4

    def test_fifty_seeded_instances(self):
        worst = 0.0
        for seed in range(50):
            pairs, rebuild = self.grads_for(seed, n_ctx=5, n_nc=3, n_qc=3,
                                            n_qn=2, n_anchor=4, d=5)
            for analytic, array in pairs:
                fd = finite_difference_grad(array, rebuild)
                worst = max(worst, max_rel_error(analytic, fd))
        assert worst <= 1e-4

    def test_empty_noncontextual_fallback(self):
        q_ctx, q_nc, inputs, encoder, upstream = random_problem(3, n_nc=0)
        out, trace = compression_forward(q_ctx, q_nc, inputs, encoder)
        assert np.all(out[inputs.anchor.shape[0]:] == 0)
        grads = compression_backward(trace, upstream)
        assert np.all(grads.q_noncontextual == 0)
        assert grads.noncontextual.shape[0] == 0

    def test_empty_contextual_raises(self):
        q_ctx, q_nc, inputs, encoder, _ = random_problem(4, n_ctx=0)
        with pytest.raises(EmptyKeySetError):
            compression_forward(q_ctx, q_nc, inputs, encoder)

    def test_upstream_shape_mismatch_names_tensor(self):
        q_ctx, q_nc, inputs, encoder, upstream = random_problem(5)
        _, trace = compression_forward(q_ctx, q_nc, inputs, encoder)
        with pytest.raises(ShapeMismatchError, match="upstream_grad"):
            compression_backward(trace, upstream[:-1])

    def test_determinism_bitwise(self):
        q_ctx, q_nc, inputs, encoder, _ = random_problem(6)
        out1, _ = compression_forward(q_ctx, q_nc, inputs, encoder)
        out2, _ = compression_forward(q_ctx, q_nc, inputs, encoder)
        assert np.array_equal(out1, out2)
