import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dynconv.attention import (AttentionParams, attention_mask, attention_weights, count_ops_attention,
                               multi_head_self_attention, scaled_dot_attention, source_target_attention)
from dynconv.rng import Rng
from dynconv.tensor import ContractError, Tensor

from .oracles import attention_loop


def test_weights_example():
    q = np.array([[1.0, 0.0]])
    k = np.array([[math.log(2.0) * math.sqrt(2.0), 0.0], [0.0, 0.0]])
    np.testing.assert_allclose(attention_weights(q, k).data, [[2 / 3, 1 / 3]], atol=1e-15)


def _params(d, heads, seed, window=None):
    rng = Rng(seed, 31)
    ws = [Tensor(rng.normal(0, d ** -0.5, (d, d))) for _ in range(4)]
    return AttentionParams(*ws, heads=heads, window=window)


def test_window_one_causal_is_per_position_projection():
    p = _params(4, 2, 0, window=1)
    x = Rng(1).normal(size=(1, 5, 4))
    out = multi_head_self_attention(x, p, causal=True).data
    np.testing.assert_allclose(out, x @ p.wv.data @ p.wo.data, atol=1e-14)


def test_source_attention_equal_keys_averages_values():
    p = _params(4, 1, 2)
    enc = np.tile(Rng(3).normal(size=(1, 1, 4)), (1, 2, 1)) + np.array([[[0.0] * 4, [0.0] * 4]])
    enc[0, 1] = enc[0, 0]                      # identical keys, so uniform weights
    enc_v = enc.copy()
    x = Rng(4).normal(size=(1, 1, 4))
    out = source_target_attention(x, enc_v, p).data
    np.testing.assert_allclose(out[0, 0], (enc_v[0] @ p.wv.data).mean(0) @ p.wo.data, atol=1e-14)


def test_masks():
    m = attention_mask(4, 4, causal=True)
    assert m.tolist() == [[j > i for j in range(4)] for i in range(4)]
    w = attention_mask(4, 4, causal=True, window=2)
    assert (~w).sum(axis=1).tolist() == [1, 2, 2, 2]
    c = attention_mask(5, 5, window=3)
    assert (~c)[2].tolist() == [False, True, True, True, False]
    assert attention_mask(3, 3) is None


def test_fully_masked_row_raises():
    with pytest.raises(ContractError):
        attention_weights(np.ones((1, 2)), np.ones((2, 2)), np.ones((1, 2), dtype=bool))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.booleans())
def test_matches_loop_oracle(seed, causal):
    rng = Rng(seed, 32)
    n, dk = int(rng.integers(1, 7)), int(rng.integers(1, 5))
    q, k, v = (rng.normal(size=(n, dk)) for _ in range(3))
    mask = attention_mask(n, n, causal)
    out = scaled_dot_attention(q, k, v, mask).data
    np.testing.assert_allclose(out, attention_loop(q, k, v, mask), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_permutation_equivariance(seed):
    rng = Rng(seed, 33)
    n = int(rng.integers(2, 7))
    p = _params(4, 2, seed)
    x = rng.normal(size=(1, n, 4))
    perm = np.argsort(rng.uniform(size=n))
    a = multi_head_self_attention(x, p).data
    b = multi_head_self_attention(x[:, perm], p).data
    np.testing.assert_allclose(b, a[:, perm], atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(0, 6))
def test_causal_self_attention_ignores_future(seed, pos):
    rng = Rng(seed, 34)
    n = 7
    p = _params(4, 2, seed)
    x = rng.normal(size=(1, n, 4))
    y = x.copy()
    y[0, pos] += 10.0
    a = multi_head_self_attention(x, p, causal=True).data
    b = multi_head_self_attention(y, p, causal=True).data
    assert np.array_equal(a[:, :pos], b[:, :pos])


def test_count_ops():
    assert count_ops_attention(1024, 1024) == 2_147_483_648
