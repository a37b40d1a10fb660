"""Synthetic tasks, optimizers, learning-rate schedules and the training loop."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import tensor as T
from .model import BOS, EOS, FIRST_SYMBOL, PAD, ModelConfig, Seq2Seq, greedy_decode
from .rng import Rng
from .tensor import NumericError

TASKS = ("copy", "reverse", "sort")
TRAIN_STREAM, HELDOUT_STREAM, DROPOUT_STREAM = 1, 2, 3


@dataclass(frozen=True)
class TaskSpec:
    kind: str = "copy"
    vocab: int = 20
    min_len: int = 4
    max_len: int = 16
    samples: int = 1000
    seed: int = 1

    def __post_init__(self):
        if self.kind not in TASKS:
            raise ValueError(f"unknown task {self.kind!r}; expected one of {TASKS}")
        if self.vocab <= FIRST_SYMBOL:
            raise ValueError(f"vocab={self.vocab} leaves no symbols after the reserved ids")
        if not 1 <= self.min_len <= self.max_len:
            raise ValueError(f"bad length range {self.min_len}..{self.max_len}")


def task_target(kind: str, source) -> list[int]:
    source = list(source)
    if kind == "copy":
        return source
    if kind == "reverse":
        return source[::-1]
    if kind == "sort":
        return sorted(source)
    raise ValueError(f"unknown task {kind!r}")


def pad_batch(seqs, extra: int = 0) -> np.ndarray:
    width = max(len(s) for s in seqs) + extra
    out = np.full((len(seqs), width), PAD, dtype=np.int64)
    for i, s in enumerate(seqs):
        out[i, :len(s)] = s
    return out


def generate_batch(task: TaskSpec, rng: Rng, batch_size: int) -> tuple[np.ndarray, np.ndarray]:
    """Padded ``(source, target)`` token arrays of shape ``[B, max_len_in_batch]``."""
    lengths = rng.integers(task.min_len, task.max_len + 1, batch_size)
    srcs = [list(rng.integers(FIRST_SYMBOL, task.vocab, int(n))) for n in lengths]
    return pad_batch(srcs), pad_batch([task_target(task.kind, s) for s in srcs])


def decoder_io(target: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Shift targets into teacher-forcing inputs (BOS-prefixed) and EOS-terminated outputs."""
    b, n = target.shape
    lengths = (target != PAD).sum(axis=1)
    tgt_in = np.full((b, n + 1), PAD, dtype=np.int64)
    tgt_out = np.full((b, n + 1), PAD, dtype=np.int64)
    tgt_in[:, 0] = BOS
    tgt_in[:, 1:] = target
    tgt_out[:, :n] = target
    tgt_out[np.arange(b), lengths] = EOS
    return tgt_in, tgt_out


# -- schedules ----------------------------------------------------------------

@dataclass(frozen=True)
class ScheduleSpec:
    kind: str = "cosine_warmup"
    lr_min: float = 1e-7
    lr_max: float = 1e-3
    warmup: int = 10_000
    period: int = 20_000

    def __post_init__(self):
        if self.kind not in ("cosine_warmup", "inverse_sqrt"):
            raise ValueError(f"unknown schedule {self.kind!r}")
        if not 0 < self.lr_min <= self.lr_max:
            raise ValueError(f"need 0 < lr_min <= lr_max, got {self.lr_min}, {self.lr_max}")
        if self.warmup < 1 or self.period < 1:
            raise ValueError("warmup and period must be positive")


def lr_at(s: ScheduleSpec, step: int) -> float:
    if step < 0:
        raise ValueError(f"step must be >= 0, got {step}")
    if step < s.warmup:
        return s.lr_min + (s.lr_max - s.lr_min) * step / s.warmup
    if s.kind == "inverse_sqrt":
        return s.lr_max * math.sqrt(s.warmup / step)
    progress = min(1.0, (step - s.warmup) / s.period)
    # written as a decrease from lr_max so the boundary value is exactly lr_max
    return s.lr_max - 0.5 * (s.lr_max - s.lr_min) * (1.0 - math.cos(math.pi * progress))


# -- optimizers ---------------------------------------------------------------

@dataclass
class OptimizerState:
    kind: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.98
    eps: float = 1e-9
    momentum: float = 0.99
    clip_norm: float = 0.0
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("adam", "nesterov_sgd"):
            raise ValueError(f"unknown optimizer {self.kind!r}")


def clip_grad_norm(grads: list[np.ndarray], max_norm: float) -> tuple[list[np.ndarray], float]:
    """Rescale gradients so their global L2 norm is at most ``max_norm`` (0 disables)."""
    norm = math.sqrt(sum(float(np.vdot(g, g)) for g in grads))
    if not math.isfinite(norm):
        raise NumericError("non-finite gradient norm")
    if max_norm > 0 and norm > max_norm:
        c = max_norm / norm
        grads = [g * c for g in grads]
    return grads, norm


def optimizer_step(params: list[T.Tensor], grads: list[np.ndarray], state: OptimizerState, lr: float) -> float:
    """Clip, then apply one Adam or Nesterov-momentum update in place. Returns the pre-clip norm."""
    if len(params) != len(grads):
        raise ValueError("params and grads differ in length")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise T.ShapeError(f"gradient {g.shape} vs parameter {p.shape}")
    grads, norm = clip_grad_norm(grads, state.clip_norm)
    if not state.m:
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params] if state.kind == "adam" else []
    state.step += 1
    if state.kind == "adam":
        b1, b2 = state.beta1, state.beta2
        c1, c2 = 1.0 - b1 ** state.step, 1.0 - b2 ** state.step
        for i, (p, g) in enumerate(zip(params, grads)):
            state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
            state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g
            p.data = p.data - lr * (state.m[i] / c1) / (np.sqrt(state.v[i] / c2) + state.eps)
    else:
        mu = state.momentum
        for i, (p, g) in enumerate(zip(params, grads)):
            state.m[i] = mu * state.m[i] + g
            p.data = p.data - lr * (g + mu * state.m[i])
    return norm


# -- training -----------------------------------------------------------------

@dataclass
class TrainingReport:
    log: list[tuple[int, float, float, float]]
    losses: list[float]
    final_accuracy: float
    wall_time: float
    status: str = "ok"
    diverged_step: int | None = None
    model: Seq2Seq | None = field(default=None, repr=False)

    def log_lines(self) -> str:
        return "".join(f"{s},{lr:.9g},{loss:.17g},{acc:.6f}\n" for s, lr, loss, acc in self.log)


def heldout_set(task: TaskSpec, count: int) -> tuple[np.ndarray, np.ndarray]:
    return generate_batch(task, Rng(task.seed, HELDOUT_STREAM), count)


def token_accuracy(model: Seq2Seq, src: np.ndarray, tgt: np.ndarray, batch: int = 64) -> float:
    """Greedy-decode ``src`` and score position-wise against EOS-terminated targets."""
    _, tgt_out = decoder_io(tgt)
    hits = total = 0
    for lo in range(0, len(src), batch):
        s, want = src[lo:lo + batch], tgt_out[lo:lo + batch]
        got = greedy_decode(model, s, want.shape[1])
        keep = want != PAD
        hits += int(((got == want) & keep).sum())
        total += int(keep.sum())
    return hits / total


def train(config: ModelConfig, task: TaskSpec, schedule: ScheduleSpec, optimizer: OptimizerState,
          steps: int, seed: int = 1, batch_size: int = 32, eval_every: int = 500, eval_samples: int = 200,
          smoothing: float = 0.1, accumulate: int = 1, log_file: str | Path | None = None,
          verbose: bool = False) -> TrainingReport:
    """Train on freshly sampled batches; evaluate greedy accuracy on a fixed held-out split."""
    start = time.perf_counter()
    model = Seq2Seq(config, seed=seed)
    params = model.parameters()
    data_rng = Rng(seed, TRAIN_STREAM)
    drop_rng = Rng(seed, DROPOUT_STREAM)
    held_src, held_tgt = heldout_set(task, eval_samples)
    training = config.dropout_p > 0 or config.dropconnect_p > 0
    log: list[tuple[int, float, float, float]] = []
    losses: list[float] = []
    sink = open(log_file, "w", encoding="utf-8") if log_file else None

    def record(step: int, lr: float, loss: float) -> float:
        acc = token_accuracy(model, held_src, held_tgt)
        log.append((step, lr, loss, acc))
        if sink:
            sink.write(f"{step},{lr:.9g},{loss:.17g},{acc:.6f}\n")
            sink.flush()
        if verbose:
            print(f"step {step:6d}  lr {lr:.3e}  loss {loss:.4f}  acc {acc:.4f}", flush=True)
        return acc

    def batch_loss(src, tgt, rng) -> T.Tensor:
        tgt_in, tgt_out = decoder_io(tgt)
        return model.loss(src, tgt_in, tgt_out, smoothing, rng, training)

    try:
        if steps == 0:
            with T.no_grad():
                src, tgt = generate_batch(task, data_rng, batch_size)
                loss0 = batch_loss(src, tgt, None).item()
            losses.append(loss0)
            acc = record(0, lr_at(schedule, 0), loss0)
            return TrainingReport(log, losses, acc, time.perf_counter() - start, model=model)
        acc = 0.0
        for step in range(1, steps + 1):
            lr = lr_at(schedule, step)
            total = None
            loss_val = 0.0
            for micro in range(accumulate):
                src, tgt = generate_batch(task, data_rng, batch_size)
                loss = batch_loss(src, tgt, drop_rng.child(step, micro))
                grads = T.backward(loss, params)
                loss_val += loss.item() / accumulate
                total = grads if total is None else [a + b for a, b in zip(total, grads)]
            if not math.isfinite(loss_val):
                raise NumericError(f"loss became non-finite at step {step}")
            if accumulate > 1:
                total = [g / accumulate for g in total]
            optimizer_step(params, total, optimizer, lr)
            losses.append(loss_val)
            if step % eval_every == 0 or step == steps:
                acc = record(step, lr, loss_val)
        return TrainingReport(log, losses, acc, time.perf_counter() - start, model=model)
    except NumericError:
        return TrainingReport(log, losses, log[-1][3] if log else 0.0, time.perf_counter() - start,
                              status="diverged", diverged_step=len(losses) + 1, model=model)
    finally:
        if sink:
            sink.close()
