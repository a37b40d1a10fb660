import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dynconv import tensor as T
from dynconv.conv import (EPS, NORMALIZERS, ConvConfig, count_ops_light, count_params, depthwise_conv,
                          dropconnect, expand_shared_weights, group_of_channel, lightconv,
                          lightconv_band_matrix, normalize_kernel, window_start)
from dynconv.rng import Rng

from .oracles import conv_loop, softmax_row


def _kernel(row):
    return np.array([row], dtype=float)


def test_depthwise_centered_example():
    out = depthwise_conv(np.array([[1.0], [2.0], [3.0]]), _kernel([1, 0, 0]), "centered").data
    assert out[:, 0].tolist() == [0.0, 1.0, 2.0]


def test_depthwise_causal_example():
    out = depthwise_conv(np.array([[1.0], [2.0], [3.0]]), _kernel([0, 0, 1]), "causal").data
    assert out[:, 0].tolist() == [1.0, 2.0, 3.0]


def test_window_start_matches_formula():
    for k in (1, 3, 5, 7, 31):
        # 1-based slot j reads position i + j - ceil((k+1)/2); slot 0 (0-based) is j=1
        assert window_start(k, "centered") == 1 - -(-(k + 1) // 2)
        assert window_start(k, "causal") == 1 - k


def test_even_kernel_rejected_for_centered():
    with pytest.raises(ValueError):
        ConvConfig(4, 2, 4, "centered")


def test_l2_example():
    out = normalize_kernel(np.array([[3.0, 4.0]]), "l2").data[0]
    np.testing.assert_allclose(out, [3 / (5 + 1e-6), 4 / (5 + 1e-6)], rtol=0, atol=1e-15)


def test_abs_l1_example():
    out = normalize_kernel(np.array([[-1.0, 1.0]]), "abs_l1").data[0]
    np.testing.assert_allclose(out, [1 / (2 + 1e-6)] * 2, rtol=0, atol=1e-15)


def test_catalog_has_ten_kinds():
    assert len(NORMALIZERS) == 10 and EPS == 1e-6


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(NORMALIZERS))
def test_normalizer_properties(seed, kind):
    w = Rng(seed).normal(0, 3, (4, 5))
    out = normalize_kernel(w, kind).data
    assert out.shape == w.shape and np.all(np.isfinite(out))
    if kind == "softmax":
        np.testing.assert_allclose(out.sum(-1), 1.0, atol=1e-12)
        np.testing.assert_allclose(out, [softmax_row(r) for r in w], atol=1e-14)
    if kind in ("l1", "abs_l1"):
        assert np.all(np.abs(out).sum(-1) <= 1.0 + 1e-12)
    if kind in ("l2", "abs_l2"):
        assert np.all(np.sqrt((out ** 2).sum(-1)) <= 1.0 + 1e-12)
    if kind == "sigmoid":
        assert np.all((out > 0) & (out < 1))


def test_group_of_channel_example():
    assert (group_of_channel(8, 2) + 1).tolist() == [1, 1, 1, 1, 2, 2, 2, 2]
    assert group_of_channel(6, 1).tolist() == [0] * 6


def test_expand_shared_weights_rows():
    w = np.arange(6.0).reshape(2, 3)
    out = expand_shared_weights(w, 4).data
    assert np.array_equal(out, w[[0, 0, 1, 1]])


def test_dropconnect_expectation():
    wn = np.ones((1, 100_000))
    out = dropconnect(wn, 0.5, Rng(3), training=True).data
    assert abs(out.mean() - 1.0) < 0.01
    assert set(np.unique(out)) <= {0.0, 2.0}


def test_dropconnect_is_identity_at_eval():
    wn = np.full((2, 3), 0.3)
    assert np.array_equal(dropconnect(wn, 0.4, None, training=False).data, wn)


def test_dropconnect_mask_is_shared_across_positions():
    cfg = ConvConfig(4, 2, 3, "centered", dropconnect_p=0.5)
    x = np.ones((1, 6, 4))
    w = np.zeros((2, 3))
    out = lightconv(x, w, cfg, Rng(7), training=True).data[0]
    # interior positions see full windows, so they must agree under a single mask
    assert np.allclose(out[1:-1], out[1])


def test_lightconv_single_position():
    x = np.array([[2.0, -1.0]])
    w = np.array([[0.1, 0.7, -0.4]])
    out = lightconv(x, w, ConvConfig(2, 1, 3, "centered")).data[0]
    np.testing.assert_allclose(out, softmax_row(w[0])[1] * x[0], atol=1e-15)


def test_count_params():
    assert count_params(1024, 7, 16) == (7340032, 7168, 112)
    assert count_params(512, 3, 4) == (786432, 1536, 12)
    assert count_ops_light(10, 8, 3) == 240


def _random_conv(seed):
    rng = Rng(seed, 11)
    heads = int(rng.integers(1, 5))
    d = heads * int(rng.integers(1, 3))
    k = int((1, 3, 5)[int(rng.integers(0, 3))])
    n = int(rng.integers(1, 9))
    pad = ("centered", "causal")[int(rng.integers(0, 2))]
    kind = NORMALIZERS[int(rng.integers(0, len(NORMALIZERS)))]
    return ConvConfig(d, heads, k, pad, kind), rng.normal(size=(2, n, d)), rng.normal(size=(heads, k))


@pytest.mark.parametrize("seed", range(20))
def test_lightconv_matches_loop_oracle(seed):
    cfg, x, w = _random_conv(seed)
    wn = normalize_kernel(w, cfg.normalizer).data
    direct = lightconv(x, w, cfg).data
    band = lightconv_band_matrix(x, w, cfg).data
    for b in range(2):
        ref = conv_loop(x[b], wn, cfg.heads, cfg.padding)
        assert np.max(np.abs(direct[b] - ref)) < 1e-12
    assert np.max(np.abs(direct - band)) < 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(0, 7))
def test_causal_conv_ignores_future(seed, pos):
    cfg, x, w = _random_conv(seed)
    cfg = ConvConfig(cfg.d, cfg.heads, cfg.k, "causal", cfg.normalizer)
    n = x.shape[1]
    pos = pos % n
    y = x.copy()
    y[:, pos] += 5.0
    a, b = lightconv(x, w, cfg).data, lightconv(y, w, cfg).data
    assert np.array_equal(a[:, :pos], b[:, :pos])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_channel_permutation_within_group(seed):
    cfg, x, w = _random_conv(seed)
    size = cfg.d // cfg.heads
    perm = np.arange(cfg.d)
    perm[:size] = perm[:size][::-1]       # shuffle channels inside group 0
    a = lightconv(x, w, cfg).data
    b = lightconv(x[..., perm], w, cfg).data
    np.testing.assert_allclose(b, a[..., perm], atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_shift_equivariance_away_from_edges(seed):
    cfg, _, w = _random_conv(seed)
    rng = Rng(seed, 12)
    x = np.zeros((1, 20, cfg.d))
    x[0, 4:7] = rng.normal(size=(3, cfg.d))
    shifted = np.roll(x, 2, axis=1)
    a = lightconv(x, w, cfg).data
    b = lightconv(shifted, w, cfg).data
    np.testing.assert_allclose(np.roll(a, 2, axis=1), b, atol=1e-14)


def test_lightconv_rejects_bad_kernel_shape():
    with pytest.raises(T.ShapeError):
        lightconv(np.zeros((1, 3, 4)), np.zeros((3, 3)), ConvConfig(4, 2, 3))
