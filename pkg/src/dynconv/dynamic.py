"""Dynamic convolutions: LightConv with a kernel predicted per time step."""
from __future__ import annotations

from . import tensor as T
from .conv import (ConvConfig, band_matrix, banded_apply, depthwise_conv, dropconnect,
                   expand_shared_weights, normalize_kernel)
from .rng import Rng
from .tensor import ShapeError, Tensor


def predict_kernels(x, wq) -> Tensor:
    """Raw kernels ``[..., n, H, k]`` from ``x[..., n, d]`` and ``wq[H, k, d]``.

    A bias-free linear map of each position's own input vector.
    """
    x, wq = T.tensor(x), T.tensor(wq)
    if wq.ndim != 3 or x.shape[-1] != wq.shape[-1]:
        raise ShapeError(f"predict_kernels: input {x.shape} vs predictor {wq.shape}")
    h, k, d = wq.shape
    flat = T.matmul(x, T.transpose(T.reshape(wq, (h * k, d))))
    return T.reshape(flat, x.shape[:-1] + (h, k))


def dynamic_kernels(x, wq, config: ConvConfig, rng: Rng | None = None, training: bool = False) -> Tensor:
    wn = normalize_kernel(predict_kernels(x, wq), config.normalizer)
    return dropconnect(wn, config.dropconnect_p, rng, training)


def dynamic_conv(x, wq, config: ConvConfig, rng: Rng | None = None, training: bool = False) -> Tensor:
    wq = T.tensor(wq)
    if wq.shape != (config.heads, config.k, config.d):
        raise ShapeError(f"dynamic_conv: predictor {wq.shape} vs config "
                         f"({config.heads}, {config.k}, {config.d})")
    wn = dynamic_kernels(x, wq, config, rng, training)
    return depthwise_conv(x, expand_shared_weights(wn, config.d), config.padding)


def dynamic_conv_band_matrix(x, wq, config: ConvConfig) -> Tensor:
    x = T.tensor(x)
    if x.ndim != 3:
        raise ShapeError(f"dynamic_conv_band_matrix expects [B, n, d] input, got {x.shape}")
    wn = normalize_kernel(predict_kernels(x, wq), config.normalizer)
    return banded_apply(x, band_matrix(wn, x.shape[1], config.padding), config.heads)


def count_ops_dynamic(n: int, d: int, heads: int, k: int) -> int:
    """MACs for kernel prediction (n*H*k*d) plus the convolution (n*k*d)."""
    return n * heads * k * d + n * k * d
