"""Finite-difference gradient checks for every differentiable operation.

Each check draws small random inputs (all dims <= 8) from a seed and
contracts the output with a fixed random tensor, so every output coordinate
contributes to the scalar being differentiated.
"""
from __future__ import annotations

from typing import Callable, Iterator

import numpy as np

from . import tensor as T
from .attention import (AttentionParams, multi_head_self_attention, scaled_dot_attention,
                        source_target_attention)
from .conv import ConvConfig, lightconv, lightconv_band_matrix, normalize_kernel
from .dynamic import dynamic_conv, dynamic_conv_band_matrix, predict_kernels
from .gradcheck import GradCheckReport, grad_check
from .model import ModelConfig, Seq2Seq
from .rng import Rng
from .tensor import Tensor

MODULES = ("numeric-core", "conv-kernels", "dynamic-conv", "attention", "seq-model")
Check = tuple[str, Callable[[], GradCheckReport]]


def _proj(fn, rng: Rng):
    """Wrap ``fn`` so it returns ``sum(fn(...) * R)`` for a fixed random R."""
    cache = {}

    def f(*args):
        out = fn(*args)
        if "r" not in cache:
            cache["r"] = rng.normal(size=out.shape)
        return (out * cache["r"]).sum()
    return f


def _away_from_zero(rng: Rng, shape) -> np.ndarray:
    return rng.uniform(0.2, 1.5, shape) * np.where(rng.uniform(size=shape) < 0.5, -1.0, 1.0)


def _t(a) -> Tensor:
    return Tensor(a, requires_grad=True)


def numeric_core_checks(seed: int) -> Iterator[Check]:
    rng = Rng(seed, 7, 0)
    a, b = rng.integers(1, 5), rng.integers(1, 5)
    shape = (a, b)

    def x(s=shape):
        return _t(rng.normal(size=s))

    unary = {
        "neg": (T.neg, x), "scale": (lambda t: T.scale(t, 1.7), x),
        "exp": (T.exp, x), "log": (T.log, lambda: _t(rng.uniform(0.5, 2.0, shape))),
        "sqrt": (T.sqrt, lambda: _t(rng.uniform(0.5, 2.0, shape))),
        "sigmoid": (T.sigmoid, x), "tanh": (T.tanh, x),
        "relu": (T.relu, lambda: _t(_away_from_zero(rng, shape))),
        "abs": (T.abs, lambda: _t(_away_from_zero(rng, shape))),
        "square": (T.square, x),
        "sum": (lambda t: T.sum(t, axis=-1), x), "mean": (lambda t: T.mean(t, axis=0), x),
        "softmax": (lambda t: T.softmax(t, axis=-1), x),
        "log_softmax": (lambda t: T.log_softmax(t, axis=-1), x),
        "reshape": (lambda t: T.reshape(t, (-1,)), x), "transpose": (T.transpose, x),
        "getitem": (lambda t: t[..., :1], x),
        "take": (lambda t: T.take(t, [0, a - 1, 0], axis=0), x),
        "unfold": (lambda t: T.unfold(t, 3, -1), x),
        "pad_left": (lambda t: T.pad_left(t, 2, axis=0), x),
    }
    for i, (name, (fn, make)) in enumerate(unary.items()):
        arg = make()
        yield name, (lambda fn=fn, arg=arg, i=i: grad_check(_proj(fn, rng.child(100 + i)), arg))

    binary = {"add": T.add, "sub": T.sub, "mul": T.mul}
    for name, fn in binary.items():
        p, q = x(), x((b,))
        yield name, (lambda fn=fn, p=p, q=q: grad_check(_proj(fn, rng.child(1)), p, q))
    p, q = x(), _t(rng.uniform(0.5, 2.0, shape))
    yield "div", lambda: grad_check(_proj(T.div, rng.child(2)), p, q)
    ma, mb = x((2, a, 3)), x((3, b))
    yield "matmul", lambda: grad_check(_proj(T.matmul, rng.child(3)), ma, mb)
    c1, c2 = x(), x()
    yield "concat", lambda: grad_check(_proj(lambda u, v: T.concat([u, v], axis=0), rng.child(4)), c1, c2)
    d = int(rng.integers(2, 8))
    lx, lg, lb = x((3, d)), x((d,)), x((d,))
    yield "layer_norm", lambda: grad_check(_proj(T.layer_norm, rng.child(5)), lx, lg, lb)


def _conv_setup(rng: Rng, padding: str):
    heads = int(rng.integers(1, 4))
    d = heads * int(rng.integers(1, 3))
    k = (1, 3, 5)[int(rng.integers(0, 3))]
    n = int(rng.integers(1, 8))
    return ConvConfig(d, heads, k, padding), n


def conv_checks(seed: int) -> Iterator[Check]:
    rng = Rng(seed, 7, 1)
    for kind in ("softmax", "sigmoid", "tanh", "l1", "l2", "square", "abs", "abs_l1", "abs_l2", "none"):
        w = _t(_away_from_zero(rng, (3, 5)))
        yield f"normalize[{kind}]", (lambda w=w, kind=kind:
                                     grad_check(_proj(lambda t: normalize_kernel(t, kind), rng.child(3)), w))
    for padding in ("centered", "causal"):
        cfg, n = _conv_setup(rng, padding)
        x, w = _t(rng.normal(size=(2, n, cfg.d))), _t(rng.normal(size=(cfg.heads, cfg.k)))
        yield f"lightconv[{padding}]", (lambda cfg=cfg, x=x, w=w: grad_check(
            _proj(lambda a, b: lightconv(a, b, cfg), rng.child(4)), x, w))
        yield f"lightconv_band[{padding}]", (lambda cfg=cfg, x=x, w=w: grad_check(
            _proj(lambda a, b: lightconv_band_matrix(a, b, cfg), rng.child(5)), x, w))


def dynamic_checks(seed: int) -> Iterator[Check]:
    rng = Rng(seed, 7, 2)
    for padding in ("centered", "causal"):
        cfg, n = _conv_setup(rng, padding)
        x = _t(rng.normal(size=(2, n, cfg.d)))
        wq = _t(rng.normal(size=(cfg.heads, cfg.k, cfg.d)))
        yield f"predict_kernels[{padding}]", (lambda x=x, wq=wq: grad_check(
            _proj(predict_kernels, rng.child(1)), x, wq))
        yield f"dynamic_conv[{padding}]", (lambda cfg=cfg, x=x, wq=wq: grad_check(
            _proj(lambda a, b: dynamic_conv(a, b, cfg), rng.child(2)), x, wq))
        yield f"dynamic_conv_band[{padding}]", (lambda cfg=cfg, x=x, wq=wq: grad_check(
            _proj(lambda a, b: dynamic_conv_band_matrix(a, b, cfg), rng.child(3)), x, wq))


def attention_checks(seed: int) -> Iterator[Check]:
    rng = Rng(seed, 7, 3)
    dk, nq, nk = int(rng.integers(1, 8)), int(rng.integers(1, 8)), int(rng.integers(1, 8))
    q, k, v = _t(rng.normal(size=(nq, dk))), _t(rng.normal(size=(nk, dk))), _t(rng.normal(size=(nk, dk)))
    yield "scaled_dot_attention", lambda: grad_check(_proj(scaled_dot_attention, rng.child(1)), q, k, v)
    heads = int(rng.integers(1, 3))
    d = heads * int(rng.integers(1, 4))
    n = int(rng.integers(2, 8))
    ws = [_t(rng.normal(0, d ** -0.5, (d, d))) for _ in range(4)]
    x = _t(rng.normal(size=(2, n, d)))
    for causal, window in ((False, None), (True, None), (False, 3), (True, 2)):
        def mhsa(x_, *w, causal=causal, window=window):
            return multi_head_self_attention(x_, AttentionParams(*w, heads=heads, window=window), causal)
        yield f"self_attention[causal={causal},window={window}]", (
            lambda mhsa=mhsa: grad_check(_proj(mhsa, rng.child(2)), x, *ws))
    enc = _t(rng.normal(size=(2, int(rng.integers(1, 8)), d)))

    def sta(x_, e, *w):
        return source_target_attention(x_, e, AttentionParams(*w, heads=heads))
    yield "source_target_attention", lambda: grad_check(_proj(sta, rng.child(3)), x, enc, *ws)


def tiny_model(mechanism: str, seed: int) -> tuple[Seq2Seq, tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """The d=8, H=2, k=3, V=11, n=4, 2-block model used for end-to-end checks."""
    cfg = ModelConfig(mechanism=mechanism, enc_layers=2, dec_layers=2, d=8, d_ff=16, heads=2,
                      enc_kernels=(3, 3), dec_kernels=(3, 3), src_vocab=11, tgt_vocab=11)
    model = Seq2Seq(cfg, seed=seed)
    rng = Rng(seed, 7, 4)
    src = rng.integers(3, 11, (2, 4))
    src[1, 3] = 0
    tgt = rng.integers(3, 11, (2, 4))
    tgt_in = np.concatenate([np.ones((2, 1), dtype=np.int64), tgt[:, :3]], axis=1)
    tgt_out = tgt.copy()
    tgt_out[1, 3] = 0
    return model, (src, tgt_in, tgt_out)


def model_checks(seed: int, mechanisms=("lightconv", "dynamicconv", "self_attention"),
                 per_tensor: int | None = 8) -> Iterator[Check]:
    for mech in mechanisms:
        model, (src, tgt_in, tgt_out) = tiny_model(mech, seed)
        params = model.parameters()

        def loss(*_, model=model, src=src, tgt_in=tgt_in, tgt_out=tgt_out):
            return model.loss(src, tgt_in, tgt_out, smoothing=0.1)
        yield f"model[{mech}]", (lambda loss=loss, params=params: grad_check(
            loss, *params, per_tensor=per_tensor, seed=seed))


SUITES = {
    "numeric-core": numeric_core_checks,
    "conv-kernels": conv_checks,
    "dynamic-conv": dynamic_checks,
    "attention": attention_checks,
    "seq-model": model_checks,
}


def run_checks(modules=MODULES, seeds=(1, 2, 3, 4, 5)) -> list[tuple[str, int, str, GradCheckReport]]:
    results = []
    for module in modules:
        for seed in seeds:
            for name, run in SUITES[module](seed):
                results.append((module, seed, name, run()))
    return results
