"""Depthwise convolutions with shared, normalized kernels (LightConv).

Sequences are laid out ``[..., n, d]``: any leading batch axes, then time,
then channels. Kernels are ``[H, k]`` rows shared by contiguous groups of
``d // H`` channels.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .rng import Rng
from .tensor import ShapeError, Tensor

EPS = 1e-6
NORMALIZERS = ("none", "softmax", "sigmoid", "tanh", "l1", "l2", "square", "abs", "abs_l1", "abs_l2")
PADDING_MODES = ("centered", "causal")


@dataclass(frozen=True)
class ConvConfig:
    d: int
    heads: int
    k: int
    padding: str = "centered"
    normalizer: str = "softmax"
    dropconnect_p: float = 0.0

    def __post_init__(self):
        if self.d < 1 or self.heads < 1 or self.k < 1:
            raise ValueError(f"d, heads and k must be positive: {self}")
        if self.d % self.heads:
            raise ValueError(f"heads={self.heads} does not divide d={self.d}")
        if self.padding not in PADDING_MODES:
            raise ValueError(f"unknown padding mode {self.padding!r}")
        if self.padding == "centered" and self.k % 2 == 0:
            raise ValueError(f"centered convolution needs odd k, got {self.k}")
        if self.normalizer not in NORMALIZERS:
            raise ValueError(f"unknown normalizer {self.normalizer!r}")
        if not 0.0 <= self.dropconnect_p < 1.0:
            raise ValueError(f"dropconnect_p must be in [0, 1), got {self.dropconnect_p}")


def window_start(k: int, padding: str) -> int:
    """Offset of window slot 0 relative to the output position.

    Centered windows follow ``O_i = sum_j W_j X_{i + j - ceil((k+1)/2)}`` with
    1-based ``j``, i.e. slot 0 sits ``(k-1)/2`` steps back. Causal windows
    end at the output position.
    """
    if padding == "causal":
        return -(k - 1)
    if padding == "centered":
        if k % 2 == 0:
            raise ValueError(f"centered convolution needs odd k, got {k}")
        return 1 - (k + 2) // 2
    raise ValueError(f"unknown padding mode {padding!r}")


def normalize_kernel(w, kind: str = "softmax", eps: float = EPS) -> Tensor:
    """Normalize kernel rows over the last (temporal) axis."""
    w = T.tensor(w)
    if kind == "none":
        return w
    if kind == "softmax":
        return T.softmax(w, axis=-1)
    if kind == "sigmoid":
        return T.sigmoid(w)
    if kind == "tanh":
        return T.tanh(w)
    if kind == "square":
        return T.square(w)
    if kind == "abs":
        return T.abs(w)
    if kind == "l1":
        return w / (T.abs(w).sum(axis=-1, keepdims=True) + eps)
    if kind == "l2":
        return w / (T.sqrt(T.square(w).sum(axis=-1, keepdims=True)) + eps)
    if kind == "abs_l1":
        a = T.abs(w)
        return a / (a.sum(axis=-1, keepdims=True) + eps)
    if kind == "abs_l2":
        return T.abs(w) / (T.sqrt(T.square(w).sum(axis=-1, keepdims=True)) + eps)
    raise ValueError(f"unknown normalizer {kind!r}; expected one of {NORMALIZERS}")


def group_of_channel(d: int, heads: int) -> np.ndarray:
    """0-based kernel row used by each 0-based channel.

    ``floor(c * H / d)`` for 0-based ``c`` is the same partition as the
    1-based ``ceil(c * H / d)``: H contiguous blocks of ``d / H`` channels.
    """
    if heads < 1 or d % heads:
        raise ValueError(f"heads={heads} does not divide d={d}")
    return np.arange(d) * heads // d


def expand_shared_weights(w, d: int) -> Tensor:
    """Map ``[..., H, k]`` kernel rows to ``[..., d, k]`` per-channel rows."""
    w = T.tensor(w)
    return T.take(w, group_of_channel(d, w.shape[-2]), axis=-2)


def dropconnect(wn, p: float, rng: Rng | None, training: bool) -> Tensor:
    """Zero entries of normalized weights with probability p, rescale survivors."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropconnect probability must be in [0, 1), got {p}")
    wn = T.tensor(wn)
    if not training or p == 0.0:
        return wn
    if rng is None:
        raise ValueError("dropconnect in training mode needs an rng")
    keep = ~rng.bernoulli(p, wn.shape)
    return wn * (keep / (1.0 - p))


def depthwise_conv(x, w, padding: str = "centered") -> Tensor:
    """Per-channel convolution of ``x[..., n, d]``.

    ``w`` is either a static ``[d, k]`` kernel or a per-position
    ``[..., n, d, k]`` kernel. Positions outside the sequence read as zero.
    """
    x, w = T.tensor(x), T.tensor(w)
    n, d = x.shape[-2:]
    if w.ndim < 2 or w.shape[-2] != d:
        raise ShapeError(f"depthwise_conv: input {x.shape} vs kernel {w.shape}")
    if w.ndim > 2 and w.shape[-3] != n:
        raise ShapeError(f"depthwise_conv: per-position kernel {w.shape} vs input {x.shape}")
    k = w.shape[-1]
    return apply_windows(T.unfold(x, k, window_start(k, padding)), w)


def apply_windows(windows, w) -> Tensor:
    """Weighted sum of ``windows[..., n, k, d]`` with kernels ``w[d, k]`` or ``[..., n, d, k]``."""
    w = T.tensor(w)
    wt = T.transpose(w, tuple(range(w.ndim - 2)) + (w.ndim - 1, w.ndim - 2))
    return (T.tensor(windows) * wt).sum(axis=-2)


def lightconv(x, w, config: ConvConfig, rng: Rng | None = None, training: bool = False) -> Tensor:
    """normalize -> DropConnect -> expand shared rows -> depthwise conv."""
    w = T.tensor(w)
    if w.shape != (config.heads, config.k):
        raise ShapeError(f"lightconv: kernel {w.shape} vs config ({config.heads}, {config.k})")
    wn = normalize_kernel(w, config.normalizer)
    wn = dropconnect(wn, config.dropconnect_p, rng, training)
    return depthwise_conv(x, expand_shared_weights(wn, config.d), config.padding)


def band_selector(n: int, k: int, padding: str) -> np.ndarray:
    """One-hot ``S[i, m, j] = 1`` iff window slot j of position i reads position m."""
    s = np.zeros((n, n, k))
    start = window_start(k, padding)
    for i in range(n):
        for j in range(k):
            m = i + j + start
            if 0 <= m < n:
                s[i, m, j] = 1.0
    return s


def band_matrix(wn, n: int, padding: str) -> Tensor:
    """Expand normalized kernels to band matrices.

    ``[H, k]`` gives ``[H, n, n]``; per-position ``[..., n, H, k]`` gives
    ``[..., H, n, n]`` with row i filled from position i's kernel.
    """
    wn = T.tensor(wn)
    k = wn.shape[-1]
    sel = band_selector(n, k, padding)
    if wn.ndim == 2:
        return (T.reshape(wn, (wn.shape[0], 1, 1, k)) * sel).sum(axis=-1)
    lead = wn.shape[:-3]
    h = wn.shape[-2]
    wp = T.transpose(wn, tuple(range(len(lead))) + (wn.ndim - 2, wn.ndim - 3, wn.ndim - 1))
    return (T.reshape(wp, lead + (h, n, 1, k)) * sel).sum(axis=-1)


def banded_apply(x, band, heads: int) -> Tensor:
    """Multiply ``[B, n, d]`` inputs by per-head band matrices.

    Inputs are reshaped and transposed to ``[B*H, n, d/H]`` and multiplied by a
    ``[B*H, n, n]`` stack of band matrices in one batched matmul.
    """
    x = T.tensor(x)
    b, n, d = x.shape
    xh = T.reshape(T.transpose(T.reshape(x, (b, n, heads, d // heads)), (0, 2, 1, 3)),
                   (b * heads, n, d // heads))
    band = T.tensor(band)
    if band.ndim == 3:
        band = T.reshape(band * np.ones((b, 1, 1, 1)), (b * heads, n, n))
    else:
        band = T.reshape(band, (b * heads, n, n))
    out = T.matmul(band, xh)
    return T.reshape(T.transpose(T.reshape(out, (b, heads, n, d // heads)), (0, 2, 1, 3)), (b, n, d))


def lightconv_band_matrix(x, w, config: ConvConfig) -> Tensor:
    """LightConv through a batched band-matrix product (no DropConnect)."""
    x, w = T.tensor(x), T.tensor(w)
    if x.ndim != 3:
        raise ShapeError(f"lightconv_band_matrix expects [B, n, d] input, got {x.shape}")
    wn = normalize_kernel(w, config.normalizer)
    return banded_apply(x, band_matrix(wn, x.shape[1], config.padding), config.heads)


def count_params(d: int, k: int, heads: int) -> tuple[int, int, int]:
    """Kernel weights for (non-separable, depthwise, shared) convolutions."""
    return d * d * k, d * k, heads * k


def count_ops_light(n: int, d: int, k: int) -> int:
    return n * k * d
