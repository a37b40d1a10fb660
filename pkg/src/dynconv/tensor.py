"""Dense float64 tensors with reverse-mode automatic differentiation.

Every value produced by an operation on a tensor that requires gradients
records its parents and a backward closure. Nodes carry a global creation
sequence number, so the backward pass visits them in exact reverse order of
the forward pass.
"""
from __future__ import annotations

import contextlib
import itertools
import threading
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor", "ShapeError", "ContractError", "NumericError",
    "tensor", "zeros", "ones", "no_grad", "is_grad_enabled", "backward",
    "add", "sub", "mul", "div", "neg", "scale", "exp", "log", "sqrt",
    "sigmoid", "tanh", "relu", "abs", "square", "sum", "mean",
    "matmul", "softmax", "log_softmax", "layer_norm",
    "reshape", "transpose", "concat", "split", "take", "unfold", "pad_left",
]


class ShapeError(ValueError):
    pass


class ContractError(ValueError):
    pass


class NumericError(ArithmeticError):
    pass


_seq = itertools.count()
_state = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


@contextlib.contextmanager
def no_grad():
    prev = is_grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = prev


class Tensor:
    """An immutable float64 array plus the bookkeeping needed for backprop."""

    __slots__ = ("data", "requires_grad", "grad", "name", "_parents", "_backward", "_seq")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = _float_array(data, copy=True)
        if arr.ndim and 0 in arr.shape:
            raise ShapeError(f"empty dimension in shape {arr.shape}")
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable | None = None
        self._seq = next(_seq)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def T(self) -> Tensor:
        return transpose(self)

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        tag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{tag})"

    def __add__(self, o): return add(self, o)
    def __radd__(self, o): return add(o, self)
    def __sub__(self, o): return sub(self, o)
    def __rsub__(self, o): return sub(o, self)
    def __mul__(self, o): return mul(self, o)
    def __rmul__(self, o): return mul(o, self)
    def __truediv__(self, o): return div(self, o)
    def __rtruediv__(self, o): return div(o, self)
    def __neg__(self): return neg(self)
    def __matmul__(self, o): return matmul(self, o)
    def __rmatmul__(self, o): return matmul(o, self)

    def __getitem__(self, idx):
        x = self
        out_data = x.data[idx]

        parts = idx if isinstance(idx, tuple) else (idx,)
        basic = all(isinstance(i, (int, slice)) or i is None or i is Ellipsis for i in parts)

        def bw(g):
            gx = np.zeros_like(x.data)
            if basic:
                gx[idx] = g
            else:
                np.add.at(gx, idx, g)
            return (gx,)
        return _make(out_data, (x,), bw)

    def sum(self, axis=None, keepdims=False): return sum(self, axis, keepdims)
    def mean(self, axis=None, keepdims=False): return mean(self, axis, keepdims)
    def reshape(self, *shape): return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], (tuple, list)) else shape)
    def transpose(self, *axes): return transpose(self, axes or None)


def tensor(data, requires_grad: bool = False, name: str | None = None) -> Tensor:
    return data if isinstance(data, Tensor) else Tensor(data, requires_grad, name)


def zeros(shape, requires_grad=False) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad)


def ones(shape, requires_grad=False) -> Tensor:
    return Tensor(np.ones(shape), requires_grad)


def _as(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _float_array(data, copy: bool = False) -> np.ndarray:
    # float64 everywhere; extended precision passes through for FD oracles
    arr = np.array(data, copy=copy) if copy else np.asarray(data)
    if arr.dtype != np.longdouble:
        arr = arr.astype(np.float64, copy=False)
    return arr


def _make(data, parents: tuple[Tensor, ...], bw: Callable) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = _float_array(data)
    out.grad = None
    out.name = None
    out._seq = next(_seq)
    if is_grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = bw
    else:
        out.requires_grad = False
        out._parents = ()
        out._backward = None
    return out


def _check_broadcast(a: tuple, b: tuple, op: str) -> tuple:
    try:
        return np.broadcast_shapes(a, b)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a} and {b}") from None


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# -- elementwise ------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _as(a), _as(b)
    _check_broadcast(a.shape, b.shape, "add")
    return _make(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = _as(a), _as(b)
    _check_broadcast(a.shape, b.shape, "sub")
    return _make(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = _as(a), _as(b)
    _check_broadcast(a.shape, b.shape, "mul")
    return _make(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def div(a, b) -> Tensor:
    a, b = _as(a), _as(b)
    _check_broadcast(a.shape, b.shape, "div")
    out = a.data / b.data
    return _make(out, (a, b),
                 lambda g: (_unbroadcast(g / b.data, a.shape),
                            _unbroadcast(-g * out / b.data, b.shape)))


def neg(x) -> Tensor:
    x = _as(x)
    return _make(-x.data, (x,), lambda g: (-g,))


def scale(x, c: float) -> Tensor:
    x = _as(x)
    c = float(c)
    return _make(x.data * c, (x,), lambda g: (g * c,))


def exp(x) -> Tensor:
    x = _as(x)
    out = np.exp(x.data)
    return _make(out, (x,), lambda g: (g * out,))


def log(x) -> Tensor:
    x = _as(x)
    return _make(np.log(x.data), (x,), lambda g: (g / x.data,))


def sqrt(x) -> Tensor:
    x = _as(x)
    out = np.sqrt(x.data)
    return _make(out, (x,), lambda g: (g * 0.5 / out,))


def sigmoid(x) -> Tensor:
    x = _as(x)
    # split by sign so exp never overflows
    z = np.exp(-np.abs(x.data))
    out = np.where(x.data >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    return _make(out, (x,), lambda g: (g * out * (1.0 - out),))


def tanh(x) -> Tensor:
    x = _as(x)
    out = np.tanh(x.data)
    return _make(out, (x,), lambda g: (g * (1.0 - out * out),))


def relu(x) -> Tensor:
    x = _as(x)
    mask = x.data > 0
    return _make(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def abs(x) -> Tensor:  # noqa: A001
    x = _as(x)
    return _make(np.abs(x.data), (x,), lambda g: (g * np.sign(x.data),))


def square(x) -> Tensor:
    x = _as(x)
    return _make(x.data * x.data, (x,), lambda g: (2.0 * g * x.data,))


# -- reductions -------------------------------------------------------------

def _norm_axis(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    out = []
    for a in axes:
        if not -ndim <= a < ndim:
            raise ShapeError(f"axis {a} out of range for rank {ndim}")
        out.append(a % ndim)
    return tuple(out)


def sum(x, axis=None, keepdims=False) -> Tensor:  # noqa: A001
    x = _as(x)
    axes = _norm_axis(axis, x.ndim)
    out = x.data.sum(axis=axes, keepdims=keepdims)

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, x.shape).copy(),)
    return _make(out, (x,), bw)


def mean(x, axis=None, keepdims=False) -> Tensor:
    x = _as(x)
    axes = _norm_axis(axis, x.ndim)
    count = int(np.prod([x.shape[a] for a in axes]))
    return scale(sum(x, axes, keepdims), 1.0 / count)


# -- linear algebra ---------------------------------------------------------

def matmul(a, b) -> Tensor:
    """Batched matrix product over the last two axes; leading axes broadcast."""
    a, b = _as(a), _as(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: cannot contract {a.shape} with {b.shape}")
    _check_broadcast(a.shape[:-2], b.shape[:-2], "matmul")

    # a shared 2-D weight matrix folds the batch axes into one large gemm
    flat = b.ndim == 2 and a.ndim > 2

    def bw(g):
        if flat:
            g2 = g.reshape(-1, g.shape[-1])
            ga = (g2 @ b.data.T).reshape(a.shape)
            gb = a.data.reshape(-1, a.shape[-1]).T @ g2
        else:
            ga = g @ np.swapaxes(b.data, -1, -2)
            gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)
    if flat:
        out = (a.data.reshape(-1, a.shape[-1]) @ b.data).reshape(a.shape[:-1] + b.shape[-1:])
    else:
        out = a.data @ b.data
    return _make(out, (a, b), bw)


def softmax(x, axis: int = -1) -> Tensor:
    x = _as(x)
    _norm_axis(axis, x.ndim)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)
    return _make(out, (x,), bw)


def log_softmax(x, axis: int = -1) -> Tensor:
    x = _as(x)
    _norm_axis(axis, x.ndim)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    out = z - np.log(np.exp(z).sum(axis=axis, keepdims=True))

    def bw(g):
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)
    return _make(out, (x,), bw)


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    x, gain, bias = _as(x), _as(gain), _as(bias)
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(f"layer_norm: input {x.shape} vs gain {gain.shape}, bias {bias.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv

    def bw(g):
        gh = g * gain.data
        gx = inv * (gh - gh.mean(axis=-1, keepdims=True)
                    - xhat * (gh * xhat).mean(axis=-1, keepdims=True))
        return gx, _unbroadcast(g * xhat, gain.shape), _unbroadcast(g, bias.shape)
    return _make(xhat * gain.data + bias.data, (x, gain, bias), bw)


# -- shape manipulation -----------------------------------------------------

def reshape(x, shape) -> Tensor:
    x = _as(x)
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view {x.shape} as {tuple(shape)}") from None
    return _make(out, (x,), lambda g: (g.reshape(x.shape),))


def transpose(x, axes=None) -> Tensor:
    x = _as(x)
    if axes is None:
        axes = tuple(range(x.ndim - 2)) + (x.ndim - 1, x.ndim - 2)
    inv = np.argsort(axes)
    return _make(np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inv),))


def concat(xs: Sequence, axis: int = -1) -> Tensor:
    xs = [_as(x) for x in xs]
    out = np.concatenate([x.data for x in xs], axis=axis)
    bounds = np.cumsum([x.shape[axis] for x in xs])[:-1]
    return _make(out, tuple(xs), lambda g: tuple(np.split(g, bounds, axis=axis)))


def split(x, parts: int, axis: int = -1) -> list[Tensor]:
    x = _as(x)
    if x.shape[axis] % parts:
        raise ShapeError(f"split: axis of size {x.shape[axis]} not divisible by {parts}")
    size = x.shape[axis] // parts
    ax = axis % x.ndim
    outs = []
    for p in range(parts):
        idx = (slice(None),) * ax + (slice(p * size, (p + 1) * size),)
        outs.append(x[idx])
    return outs


def take(x, indices, axis: int = 0) -> Tensor:
    """Gather slices along ``axis``; repeated indices accumulate gradient."""
    x = _as(x)
    idx = np.asarray(indices, dtype=np.int64)
    ax = axis % x.ndim
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[ax]):
        raise IndexError(f"take: index out of range for axis of size {x.shape[ax]}")
    out = np.take(x.data, idx, axis=ax)

    def bw(g):
        gg = np.moveaxis(g, list(range(ax, ax + idx.ndim)), list(range(idx.ndim)))
        onehot = np.zeros((idx.size, x.shape[ax]))
        onehot[np.arange(idx.size), idx.reshape(-1)] = 1.0
        gm = onehot.T @ gg.reshape(idx.size, -1)
        rest = x.shape[:ax] + x.shape[ax + 1:]
        return (np.moveaxis(gm.reshape((x.shape[ax],) + rest), 0, ax),)
    return _make(out, (x,), bw)


def pad_left(x, count: int, axis: int = -2) -> Tensor:
    """Zero-pad ``count`` entries at the start of ``axis``."""
    x = _as(x)
    if count == 0:
        return x
    ax = axis % x.ndim
    widths = [(0, 0)] * x.ndim
    widths[ax] = (count, 0)
    sl = (slice(None),) * ax + (slice(count, None),)
    return _make(np.pad(x.data, widths), (x,), lambda g: (g[sl],))


def unfold(x, k: int, start: int) -> Tensor:
    """Sliding windows over the sequence axis of ``x[..., n, d]``.

    Returns ``[..., n, k, d]`` where slot ``j`` of window ``i`` holds
    ``x[i + j + start]`` and out-of-range positions read as zero.
    """
    x = _as(x)
    n = x.shape[-2]
    lo, hi = max(0, -start), max(0, k - 1 + start)
    widths = [(0, 0)] * (x.ndim - 2) + [(lo, hi), (0, 0)]
    padded = np.pad(x.data, widths)
    off = start + lo
    win = np.lib.stride_tricks.sliding_window_view(padded, k, axis=-2)
    # sliding_window_view puts the window axis last: [..., n', d, k]
    out = np.swapaxes(win[..., off:off + n, :, :], -1, -2).copy()

    def bw(g):
        gp = np.zeros_like(padded)
        for j in range(k):
            gp[..., off + j:off + j + n, :] += g[..., :, j, :]
        return (gp[..., lo:lo + n, :],)
    return _make(out, (x,), bw)


# -- backward ---------------------------------------------------------------

def _topo(root: Tensor) -> list[Tensor]:
    seen: set[int] = set()
    nodes: list[Tensor] = []
    stack = [root]
    while stack:
        t = stack.pop()
        if id(t) in seen:
            continue
        seen.add(id(t))
        nodes.append(t)
        stack.extend(p for p in t._parents if p.requires_grad)
    nodes.sort(key=lambda t: t._seq, reverse=True)
    return nodes


def backward(loss: Tensor, params: Iterable[Tensor] | None = None) -> list[np.ndarray] | None:
    """Propagate d(loss)/d(.) to every leaf that requires gradients.

    Leaf gradients are stored on ``.grad`` (replacing any previous value).
    If ``params`` is given, their gradients are also returned in order;
    parameters the loss does not reach get zeros.
    """
    if loss.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if params is not None:
        params = list(params)
        for p in params:
            p.grad = None
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    if loss.requires_grad:
        for node in _topo(loss):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
    if params is None:
        return None
    return [p.grad if p.grad is not None else np.zeros_like(p.data) for p in params]
