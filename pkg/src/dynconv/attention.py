"""Multi-head scaled dot-product attention, optionally causal or windowed."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .rng import Rng
from .tensor import ContractError, ShapeError, Tensor

MASK_VALUE = -1e30


@dataclass
class AttentionParams:
    wq: Tensor
    wk: Tensor
    wv: Tensor
    wo: Tensor
    heads: int
    window: int | None = None

    def __post_init__(self):
        d = self.wq.shape[0]
        for w in (self.wq, self.wk, self.wv, self.wo):
            if w.shape != (d, d):
                raise ShapeError(f"attention projections must all be {(d, d)}, got {w.shape}")
        if self.heads < 1 or d % self.heads:
            raise ValueError(f"heads={self.heads} does not divide d={d}")
        if self.window is not None and self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")

    @property
    def d(self) -> int:
        return self.wq.shape[0]

    def tensors(self) -> list[Tensor]:
        return [self.wq, self.wk, self.wv, self.wo]


def init_attention(d: int, heads: int, rng: Rng, window: int | None = None) -> AttentionParams:
    bound = math.sqrt(6.0 / (2 * d))
    ws = [Tensor(rng.uniform(-bound, bound, (d, d)), requires_grad=True) for _ in range(4)]
    return AttentionParams(*ws, heads=heads, window=window)


def attention_mask(n_q: int, n_k: int, causal: bool = False, window: int | None = None,
                   offset: int = 0) -> np.ndarray | None:
    """Boolean ``[n_q, n_k]`` array, True where attention is forbidden.

    Query i sits at absolute position ``offset + i``. A causal window of w
    keeps keys ``i-w+1 .. i``; a centered one keeps ``|i - j| <= w // 2``.
    """
    if not causal and window is None:
        return None
    qpos = np.arange(n_q)[:, None] + offset
    kpos = np.arange(n_k)[None, :]
    blocked = np.zeros((n_q, n_k), dtype=bool)
    if causal:
        blocked |= kpos > qpos
        if window is not None:
            blocked |= kpos <= qpos - window
    elif window is not None:
        blocked |= np.abs(qpos - kpos) > window // 2
    return blocked


def attention_weights(q, k, mask=None) -> Tensor:
    q, k = T.tensor(q), T.tensor(k)
    if q.shape[-1] != k.shape[-1]:
        raise ShapeError(f"attention: query {q.shape} vs key {k.shape}")
    logits = T.scale(T.matmul(q, T.transpose(k)), 1.0 / math.sqrt(q.shape[-1]))
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if np.broadcast_to(mask, logits.shape).all(axis=-1).any():
            raise ContractError("attention: a query row is fully masked")
        logits = logits + np.where(mask, MASK_VALUE, 0.0)
    return T.softmax(logits, axis=-1)


def scaled_dot_attention(q, k, v, mask=None) -> Tensor:
    """``softmax(q k^T / sqrt(d_k)) v``; masked logits get -1e30."""
    return T.matmul(attention_weights(q, k, mask), T.tensor(v))


def _split_heads(x: Tensor, heads: int) -> Tensor:
    *lead, n, d = x.shape
    y = T.reshape(x, (*lead, n, heads, d // heads))
    nl = len(lead)
    return T.transpose(y, tuple(range(nl)) + (nl + 1, nl, nl + 2))


def _merge_heads(x: Tensor) -> Tensor:
    *lead, h, n, dk = x.shape
    nl = len(lead)
    y = T.transpose(x, tuple(range(nl)) + (nl + 1, nl, nl + 2))
    return T.reshape(y, (*lead, n, h * dk))


def project_kv(kv_in, params: AttentionParams) -> tuple[Tensor, Tensor]:
    kv_in = T.tensor(kv_in)
    return (_split_heads(T.matmul(kv_in, params.wk), params.heads),
            _split_heads(T.matmul(kv_in, params.wv), params.heads))


def attend(q_in, keys: Tensor, values: Tensor, params: AttentionParams, mask=None) -> Tensor:
    """Attend from ``q_in[..., n_q, d]`` to already projected, head-split K/V."""
    q = _split_heads(T.matmul(T.tensor(q_in), params.wq), params.heads)
    ctx = scaled_dot_attention(q, keys, values, mask)
    return T.matmul(_merge_heads(ctx), params.wo)


def _combine(mask, key_padding):
    if key_padding is None:
        return mask
    kp = np.asarray(key_padding, dtype=bool)[..., None, None, :]    # [B, 1, 1, n_k]
    return kp if mask is None else (mask | kp)


def multi_head_self_attention(x, params: AttentionParams, causal: bool = False,
                              key_padding=None) -> Tensor:
    """Self-attention over ``x[..., n, d]``; ``key_padding[B, n]`` marks ignored keys."""
    x = T.tensor(x)
    n = x.shape[-2]
    if x.shape[-1] != params.d:
        raise ShapeError(f"self-attention: input {x.shape} vs model dim {params.d}")
    mask = _combine(attention_mask(n, n, causal, params.window), key_padding)
    keys, values = project_kv(x, params)
    return attend(x, keys, values, params, mask)


def source_target_attention(dec_x, enc_out, params: AttentionParams, key_padding=None) -> Tensor:
    dec_x, enc_out = T.tensor(dec_x), T.tensor(enc_out)
    if dec_x.shape[-1] != params.d or enc_out.shape[-1] != params.d:
        raise ShapeError(f"source-target attention: {dec_x.shape} / {enc_out.shape} vs d={params.d}")
    keys, values = project_kv(enc_out, params)
    return attend(dec_x, keys, values, params, _combine(None, key_padding))


def count_ops_attention(n: int, d: int, heads: int = 1) -> int:
    """MACs of the context term: n^2 d for q k^T plus n^2 d for the value sum."""
    return 2 * n * n * d
