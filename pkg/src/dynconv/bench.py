"""Complexity sweep (analytic MACs plus wall clock) and the cumulative ablation grid.

MAC convention: one multiply-accumulate counts 1; softmax and other
elementwise work is excluded. ``context_macs`` is the part that depends on
how context is mixed (quadratic for attention, linear for convolutions);
``projection_macs`` covers the per-position input/output projections.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import statistics
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import tensor as T
from .attention import count_ops_attention, scaled_dot_attention
from .conv import ConvConfig, count_ops_light, count_params, lightconv
from .dynamic import count_ops_dynamic, dynamic_conv
from .model import ModelConfig, Seq2Seq, count_model_params
from .rng import Rng
from .train import OptimizerState, ScheduleSpec, TaskSpec, train

BENCH_MECHANISMS = ("self_attention", "lightconv", "dynamicconv")
CSV_FIELDS = ("mechanism", "n", "d", "H", "k", "context_macs", "projection_macs",
              "wall_ns_median", "wall_ns_mad", "repeats", "seed")


@dataclass
class CostRow:
    mechanism: str
    n: int
    d: int
    H: int
    k: int
    context_macs: int
    projection_macs: int
    wall_ns_median: float
    wall_ns_mad: float
    repeats: int
    seed: int


def context_macs(mechanism: str, n: int, d: int, heads: int, k: int) -> int:
    if mechanism == "self_attention":
        return count_ops_attention(n, d, heads)
    if mechanism == "lightconv":
        return count_ops_light(n, d, k)
    if mechanism == "dynamicconv":
        return count_ops_dynamic(n, d, heads, k)
    raise ValueError(f"no cost model for {mechanism!r}")


def projection_macs(mechanism: str, n: int, d: int) -> int:
    # attention: Q, K, V and output projections; convs: GLU input (d -> 2d) and output
    return 4 * n * d * d if mechanism == "self_attention" else 3 * n * d * d


def _forward(mechanism: str, n: int, d: int, heads: int, k: int, rng: Rng) -> Callable[[], object]:
    """A closure running one context-mixing forward pass on fixed random inputs."""
    if mechanism == "self_attention":
        dk = d // heads
        q, kk, v = (rng.normal(size=(heads, n, dk)) for _ in range(3))

        def run():
            return [scaled_dot_attention(q[h], kk[h], v[h]).data for h in range(heads)]
        return run
    x = rng.normal(size=(n, d))
    cfg = ConvConfig(d, heads, k, "centered")
    if mechanism == "lightconv":
        w = rng.normal(size=(heads, k))
        return lambda: lightconv(x, w, cfg).data
    wq = rng.normal(0.0, d ** -0.5, (heads, k, d))
    return lambda: dynamic_conv(x, wq, cfg).data


def time_call(fn: Callable[[], object], repeats: int, warmup: int = 3) -> tuple[float, float]:
    """Median and median absolute deviation of wall time in nanoseconds."""
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter_ns()
        fn()
        samples.append(time.perf_counter_ns() - t0)
    med = statistics.median(samples)
    return float(med), float(statistics.median(abs(s - med) for s in samples))


def run_complexity_sweep(n_list, d: int = 256, heads: int = 16, k: int = 31, repeats: int = 11,
                         seed: int = 1, mechanisms=BENCH_MECHANISMS) -> list[CostRow]:
    n_list = [int(n) for n in n_list]
    if n_list != sorted(n_list):
        raise ValueError(f"sequence lengths must be ascending: {n_list}")
    if repeats < 11:
        raise ValueError(f"need at least 11 timed repeats, got {repeats}")
    rows = []
    with T.no_grad():
        for n in n_list:
            for mi, mech in enumerate(mechanisms):
                fn = _forward(mech, n, d, heads, k, Rng(seed, 200, n, mi))
                med, mad = time_call(fn, repeats)
                rows.append(CostRow(mech, n, d, heads, k, context_macs(mech, n, d, heads, k),
                                    projection_macs(mech, n, d), med, mad, repeats, seed))
    return rows


def rows_to_csv(rows, fields=CSV_FIELDS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        d = dataclasses.asdict(r)
        w.writerow([d[f] for f in fields])
    return buf.getvalue()


# -- ablation -----------------------------------------------------------------

ABLATION_FIELDS = ("variant", "status", "accuracy", "kernel_params", "model_params")


@dataclass
class AblationRow:
    variant: str
    status: str
    accuracy: float
    kernel_params: int
    model_params: int


def ablation_grid(d: int = 64, heads: int = 4, layers: int = 2, base_k: int = 3, d_ff: int = 128,
                  dropconnect: float = 0.1, vocab: int = 20) -> list[tuple[str, ModelConfig]]:
    """Seven cumulative variants, each adding one feature to the one before."""
    common = dict(enc_layers=layers, dec_layers=layers, d=d, d_ff=d_ff, heads=heads,
                  src_vocab=vocab, tgt_vocab=vocab, use_glu=False)
    fixed = dict(enc_kernels=(base_k,) * layers, dec_kernels=(base_k,) * layers)
    grid = [
        ("cnn_nonseparable", ModelConfig(mechanism="cnn_nonseparable", normalizer="none", **fixed, **common)),
        ("+depthwise", ModelConfig(mechanism="cnn_depthwise", normalizer="none", **fixed, **common)),
        ("+increasing_kernels", ModelConfig(mechanism="cnn_depthwise", normalizer="none", **common)),
        ("+dropconnect", ModelConfig(mechanism="cnn_depthwise", normalizer="none",
                                     dropconnect_p=dropconnect, **common)),
        ("+weight_sharing", ModelConfig(mechanism="lightconv", normalizer="none",
                                        dropconnect_p=dropconnect, **common)),
        ("+softmax", ModelConfig(mechanism="lightconv", normalizer="softmax",
                                 dropconnect_p=dropconnect, **common)),
        ("+dynamic", ModelConfig(mechanism="dynamicconv", normalizer="softmax",
                                 dropconnect_p=dropconnect, **common)),
    ]
    return grid


def kernel_param_count(cfg: ModelConfig, k: int) -> int:
    """Weights of one convolution kernel of width k for the variant's mechanism."""
    nonsep, depthwise, shared = count_params(cfg.d, k, cfg.heads)
    return {
        "cnn_nonseparable": nonsep,
        "cnn_depthwise": depthwise,
        "lightconv": shared,
        "dynamicconv": cfg.heads * k * cfg.d,
        "self_attention": 0,
    }[cfg.mechanism]


def run_ablation(grid, task: TaskSpec, steps: int, seed: int = 1, batch_size: int = 32,
                 lr_max: float = 2e-3, ref_k: int = 3, eval_samples: int = 100,
                 progress: Callable[[str], None] | None = None) -> list[AblationRow]:
    rows = []
    warmup = max(1, steps // 10)
    schedule = ScheduleSpec("cosine_warmup", 1e-7, lr_max, warmup, max(1, steps - warmup))
    for name, cfg in grid:
        report = train(cfg, task, schedule, OptimizerState("adam", clip_norm=1.0), steps, seed,
                       batch_size=batch_size, eval_every=max(1, steps), eval_samples=eval_samples)
        params = count_model_params(report.model.params) if report.model else \
            count_model_params(Seq2Seq(cfg).params)
        rows.append(AblationRow(name, report.status, report.final_accuracy,
                                kernel_param_count(cfg, ref_k), params))
        if progress:
            progress(f"{name}: {report.status} acc={report.final_accuracy:.4f}")
    return rows
