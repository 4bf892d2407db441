"""Differential aggregated attention: algebraic identities, a hand-worked
case, straight-line numpy oracles for both branches, and exact masking."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import naive_conv2d, naive_softmax
from samaseg.attention import (MASK_BIAS, AttnConfig, DiffAggAttention, _attend,
                               _neighborhood_mask, diff_softmax)
from samaseg.tensor import Tensor


def naive_diff_attention(q, k, v, lam):
    """Loop oracle for differential softmax attention; q/k [h,n|m,c], v [h,m,cv]."""
    h, n, c = q.shape
    c2 = c // 2
    scale = 1.0 / math.sqrt(c2)
    out = np.empty((h, n, v.shape[-1]))
    for hi in range(h):
        a1 = naive_softmax(q[hi, :, :c2] @ k[hi, :, :c2].T * scale)
        a2 = naive_softmax(q[hi, :, c2:] @ k[hi, :, c2:].T * scale)
        out[hi] = (a1 - lam[hi] * a2) @ v[hi]
    return out


class TestDiffSoftmaxAlgebra:
    def test_matches_loop_oracle(self, rng):
        q = rng.uniform(-1, 1, size=(3, 5, 4))
        k = rng.uniform(-1, 1, size=(3, 7, 4))
        v = rng.uniform(-1, 1, size=(3, 7, 6))
        lam = rng.uniform(0.2, 0.9, size=3)
        out = diff_softmax(Tensor(q), Tensor(k), Tensor(v), Tensor(lam))
        np.testing.assert_allclose(out.data, naive_diff_attention(q, k, v, lam),
                                   rtol=1e-12, atol=1e-13)

    def test_hand_worked_two_keys(self):
        # 1 head, 1 query, 2 keys, c=2 (split halves are scalars, scale=1)
        q = np.array([[[1.0, 0.5]]])
        k = np.array([[[2.0, -1.0], [0.0, 3.0]]])
        v = np.array([[[1.0], [2.0]]])
        lam = np.array([0.25])
        e1 = np.exp([1.0 * 2.0, 1.0 * 0.0])
        a1 = e1 / e1.sum()
        e2 = np.exp([0.5 * -1.0, 0.5 * 3.0])
        a2 = e2 / e2.sum()
        expected = (a1 - 0.25 * a2) @ np.array([1.0, 2.0])
        out = diff_softmax(Tensor(q), Tensor(k), Tensor(v), Tensor(lam))
        np.testing.assert_allclose(float(out.data.reshape(())), expected, rtol=1e-14)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 3), st.integers(1, 4), st.integers(1, 4),
           st.integers(0, 2 ** 32 - 1))
    def test_rows_sum_to_one_minus_lambda(self, h, n, m, seed):
        # attending over all-ones values reads off the attention row sums
        r = np.random.default_rng(seed)
        q = r.uniform(-2, 2, size=(h, n, 4))
        k = r.uniform(-2, 2, size=(h, m, 4))
        v = np.ones((h, m, 1))
        lam = r.uniform(0.1, 0.9, size=h)
        out = diff_softmax(Tensor(q), Tensor(k), Tensor(v), Tensor(lam))
        expected = np.broadcast_to((1.0 - lam).reshape(h, 1, 1), (h, n, 1))
        np.testing.assert_allclose(out.data, expected, atol=1e-6)

    def test_lambda_zero_reduces_to_plain_attention(self, rng):
        q = rng.uniform(-1, 1, size=(2, 4, 6))
        k = rng.uniform(-1, 1, size=(2, 5, 6))
        v = rng.uniform(-1, 1, size=(2, 5, 3))
        out = diff_softmax(Tensor(q), Tensor(k), Tensor(v), Tensor(np.zeros(2)))
        c2 = 3
        plain = np.stack([
            naive_softmax(q[h, :, :c2] @ k[h, :, :c2].T / math.sqrt(c2)) @ v[h]
            for h in range(2)])
        np.testing.assert_allclose(out.data, plain, atol=1e-6)

    def test_plain_mode_softmax_rows_sum_to_one(self, rng):
        q = Tensor(rng.uniform(-1, 1, size=(2, 3, 4)))
        k = Tensor(rng.uniform(-1, 1, size=(2, 5, 4)))
        v = Tensor(np.ones((2, 5, 1)))
        out = _attend(q, k.transpose(0, 2, 1), v, None, use_differential=False)
        np.testing.assert_allclose(out.data, 1.0, atol=1e-6)


class TestMasking:
    def test_masked_keys_never_contribute(self, rng):
        # bit-identical output no matter what sits at masked key positions
        q = Tensor(rng.uniform(-1, 1, size=(1, 3, 4)))
        kt = rng.uniform(-1, 1, size=(1, 4, 5))
        v = rng.uniform(-1, 1, size=(1, 5, 2))
        bias = np.zeros((1, 3, 5))
        bias[:, :, 3:] = MASK_BIAS
        lam = Tensor(np.array([0.8]))

        out1 = _attend(q, Tensor(kt), Tensor(v), lam, True, Tensor(bias)).data
        kt2, v2 = kt.copy(), v.copy()
        kt2[:, :, 3:] = 1e6
        v2[:, 3:] = -42.0
        out2 = _attend(q, Tensor(kt2), Tensor(v2), lam, True, Tensor(bias)).data
        assert np.array_equal(out1, out2)

    def test_neighborhood_mask_enumerated_2x2(self):
        m = _neighborhood_mask(2, 2, 3)
        assert m.shape == (4, 9)
        # pixel (0,0): only the bottom-right 2x2 of the 3x3 window is in-bounds
        expected00 = np.array([0, 0, 0, 0, 1, 1, 0, 1, 1], dtype=bool)
        np.testing.assert_array_equal(m[0], expected00)
        # pixel (1,1): only the top-left 2x2 of the window is in-bounds
        expected11 = np.array([1, 1, 0, 1, 1, 0, 0, 0, 0], dtype=bool)
        np.testing.assert_array_equal(m[3], expected11)

    def test_interior_pixels_fully_valid(self):
        m = _neighborhood_mask(5, 5, 3)
        assert m[2 * 5 + 2].all()


def _group_norm_np(x, groups, eps=1e-5):
    b, c = x.shape[:2]
    g = x.reshape(b, groups, -1)
    mu = g.mean(axis=2, keepdims=True)
    var = g.var(axis=2, keepdims=True)
    return ((g - mu) / np.sqrt(var + eps)).reshape(x.shape)


def _branch_oracle(attn: DiffAggAttention, x: np.ndarray) -> np.ndarray:
    """Straight-line numpy forward of one attention branch."""
    cfg = attn.cfg
    b, d, hh, ww = x.shape
    heads, c = cfg.heads, cfg.head_dim
    lam = attn.lam.data
    tokens = x.reshape(b, d, hh * ww).transpose(0, 2, 1)
    q = tokens @ attn.wq.weight.data.T + attn.wq.bias.data
    k = tokens @ attn.wk.weight.data.T + attn.wk.bias.data
    v = tokens @ attn.wv.weight.data.T + attn.wv.bias.data
    k_map = k.transpose(0, 2, 1).reshape(b, d, hh, ww)
    v_map = v.transpose(0, 2, 1).reshape(b, d, hh, ww)
    pe = naive_conv2d(v_map, attn.pe_conv.weight.data, attn.pe_conv.bias.data,
                      stride=1, padding=1, groups=d)

    attn_map = np.zeros_like(v_map)
    c2 = c // 2
    scale = 1.0 / math.sqrt(c2)
    if attn.kind == "local":
        p = cfg.local_window // 2
        for n in range(b):
            for hd in range(heads):
                ch = slice(hd * c, (hd + 1) * c)
                for i in range(hh):
                    for j in range(ww):
                        # valid in-bounds neighbors only
                        keys, vals = [], []
                        for di in range(-p, p + 1):
                            for dj in range(-p, p + 1):
                                ii, jj = i + di, j + dj
                                if 0 <= ii < hh and 0 <= jj < ww:
                                    keys.append(k_map[n, ch, ii, jj])
                                    vals.append(v_map[n, ch, ii, jj])
                        keys = np.stack(keys)
                        vals = np.stack(vals)
                        qv = q[n, i * ww + j, ch]
                        a1 = naive_softmax(keys[:, :c2] @ qv[:c2] * scale)
                        a2 = naive_softmax(keys[:, c2:] @ qv[c2:] * scale)
                        attn_map[n, ch, i, j] = (a1 - lam[hd] * a2) @ vals
    else:
        pp = cfg.global_pool
        assert hh % pp == 0 and ww % pp == 0  # oracle handles exact divisors only
        k_pool = k_map.reshape(b, d, pp, hh // pp, pp, ww // pp).mean(axis=(3, 5))
        v_pool = v_map.reshape(b, d, pp, hh // pp, pp, ww // pp).mean(axis=(3, 5))
        kp = k_pool.reshape(b, d, pp * pp)
        vp = v_pool.reshape(b, d, pp * pp)
        for n in range(b):
            for hd in range(heads):
                ch = slice(hd * c, (hd + 1) * c)
                for t in range(hh * ww):
                    qv = q[n, t, ch]
                    a1 = naive_softmax(kp[n, ch][:c2].T @ qv[:c2] * scale)
                    a2 = naive_softmax(kp[n, ch][c2:].T @ qv[c2:] * scale)
                    attn_map[n, ch, t // ww, t % ww] = vp[n, ch] @ (a1 - lam[hd] * a2)

    out = _group_norm_np(attn_map, heads) * (1.0 - cfg.lambda_init) + pe
    out_tokens = out.reshape(b, d, hh * ww).transpose(0, 2, 1) @ attn.wo.weight.data.T \
        + attn.wo.bias.data
    return out_tokens.transpose(0, 2, 1).reshape(b, d, hh, ww)


class TestBranches:
    def test_local_branch_matches_pixel_loop_oracle(self, rng):
        cfg = AttnConfig(channels=4, heads=2, local_window=3, global_pool=2)
        attn = DiffAggAttention(cfg, "local", rng, dtype=np.float64)
        x = rng.uniform(-1, 1, size=(2, 4, 3, 4))
        np.testing.assert_allclose(attn(Tensor(x)).data, _branch_oracle(attn, x),
                                   rtol=1e-9, atol=1e-11)

    def test_global_branch_matches_pooled_loop_oracle(self, rng):
        cfg = AttnConfig(channels=4, heads=2, local_window=3, global_pool=2)
        attn = DiffAggAttention(cfg, "global", rng, dtype=np.float64)
        x = rng.uniform(-1, 1, size=(2, 4, 4, 4))
        np.testing.assert_allclose(attn(Tensor(x)).data, _branch_oracle(attn, x),
                                   rtol=1e-9, atol=1e-11)

    def test_output_shape_preserved(self, rng):
        cfg = AttnConfig(channels=8, heads=4, global_pool=3)
        for kind in ("local", "global"):
            attn = DiffAggAttention(cfg, kind, rng)
            assert attn(Tensor(np.zeros((1, 8, 5, 7), dtype=np.float32))).shape \
                == (1, 8, 5, 7)

    def test_wrong_channel_count_rejected(self, rng):
        attn = DiffAggAttention(AttnConfig(channels=4, heads=2), "local", rng)
        with pytest.raises(ValueError):
            attn(Tensor(np.zeros((1, 6, 4, 4), dtype=np.float32)))


class TestConfigValidation:
    def test_heads_must_divide_channels(self):
        with pytest.raises(ValueError):
            AttnConfig(channels=6, heads=4)

    def test_differential_needs_even_head_dim(self):
        with pytest.raises(ValueError):
            AttnConfig(channels=4, heads=4)  # head_dim 1 cannot split
        AttnConfig(channels=4, heads=4, use_differential=False)  # fine without

    def test_window_must_be_odd(self):
        with pytest.raises(ValueError):
            AttnConfig(channels=4, heads=2, local_window=4)

    def test_lambda_range(self):
        with pytest.raises(ValueError):
            AttnConfig(channels=4, heads=2, lambda_init=1.5)

    def test_unknown_branch_kind(self, rng):
        with pytest.raises(ValueError):
            DiffAggAttention(AttnConfig(channels=4, heads=2), "diagonal", rng)
