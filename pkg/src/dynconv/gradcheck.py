"""Central finite-difference verification of analytic gradients."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, backward, no_grad


@dataclass
class GradCheckReport:
    passed: bool
    max_rel_error: float
    worst: tuple[int, tuple[int, ...]] | None
    tolerance: float
    message: str = ""
    analytic: list[np.ndarray] = field(default_factory=list, repr=False)
    numeric: list[np.ndarray] = field(default_factory=list, repr=False)


def rel_error(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)


def numeric_grad(f: Callable[..., Tensor], thetas: Sequence[Tensor], h: float = 1e-5,
                 coords: Sequence[np.ndarray] | None = None) -> list[np.ndarray]:
    """Central differences ``(f(t + h) - f(t - h)) / 2h`` per coordinate.

    ``f`` is evaluated in extended precision (``np.longdouble``) so that
    rounding in the loss does not swamp small gradient entries. ``coords``
    restricts the flat indices probed per tensor; the rest are left as NaN.
    """
    out = []
    two_h = np.longdouble(2 * h)
    saved = [t.data for t in thetas]
    try:
        for t in thetas:
            t.data = t.data.astype(np.longdouble)
        with no_grad():
            for ti, t in enumerate(thetas):
                g = np.full(t.shape, np.nan)
                flat = t.data.reshape(-1)
                todo = range(flat.size) if coords is None else coords[ti]
                for i in todo:
                    orig = flat[i]
                    flat[i] = orig + h
                    fp = f(*thetas).data
                    flat[i] = orig - h
                    fm = f(*thetas).data
                    flat[i] = orig
                    g.reshape(-1)[i] = float((fp - fm) / two_h)
                out.append(g)
    finally:
        for t, d in zip(thetas, saved):
            t.data = d
    return out


def sample_coords(analytic: Sequence[np.ndarray], per_tensor: int, seed: int = 0) -> list[np.ndarray]:
    """Flat indices to probe: the largest-magnitude entry plus a seeded random draw."""
    rng = np.random.default_rng(seed)
    picks = []
    for a in analytic:
        if a.size <= per_tensor:
            picks.append(np.arange(a.size))
            continue
        chosen = {int(np.argmax(np.abs(a)))}
        chosen.update(int(i) for i in rng.choice(a.size, per_tensor - 1, replace=False))
        picks.append(np.array(sorted(chosen)))
    return picks


def grad_check(f: Callable[..., Tensor], *thetas: Tensor, tol: float = 1e-4, h: float = 1e-5,
               analytic: Sequence[np.ndarray] | None = None, per_tensor: int | None = None,
               seed: int = 0) -> GradCheckReport:
    """Compare backprop gradients of scalar ``f(*thetas)`` with central differences.

    ``analytic`` overrides the backprop result, which is how a deliberately
    wrong gradient is fed in as a negative control. ``per_tensor`` limits the
    probe to that many coordinates of each tensor (see ``sample_coords``).
    """
    for t in thetas:
        t.requires_grad = True
    if analytic is None:
        loss = f(*thetas)
        analytic = backward(loss, thetas)
    analytic = [np.asarray(a, dtype=np.float64) for a in analytic]
    coords = None if per_tensor is None else sample_coords(analytic, per_tensor, seed)
    numeric = numeric_grad(f, thetas, h, coords)

    worst, worst_err = None, 0.0
    for ti, (a, n) in enumerate(zip(analytic, numeric)):
        probed = np.ones(a.shape, dtype=bool)
        if coords is not None:
            probed = np.zeros(a.size, dtype=bool)
            probed[coords[ti]] = True
            probed = probed.reshape(a.shape)
        bad = probed & ~(np.isfinite(a) & np.isfinite(n))
        if bad.any():
            coord = tuple(int(c) for c in np.argwhere(bad)[0])
            return GradCheckReport(False, float("inf"), (ti, coord), tol,
                                   f"non-finite gradient at theta[{ti}]{list(coord)}", analytic, numeric)
        err = np.where(probed, rel_error(a, np.where(probed, n, a)), 0.0)
        i = int(np.argmax(err))
        if err.reshape(-1)[i] > worst_err or worst is None:
            worst_err = float(err.reshape(-1)[i])
            worst = (ti, tuple(int(c) for c in np.unravel_index(i, a.shape)))
    passed = worst_err < tol
    msg = "" if passed else f"max relative error {worst_err:.3e} at theta[{worst[0]}]{list(worst[1])}"
    return GradCheckReport(passed, worst_err, worst, tol, msg, analytic, numeric)
