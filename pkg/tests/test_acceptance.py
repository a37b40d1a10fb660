"""The eleven acceptance criteria, each at its stated tolerance.

Every test records a one-line verdict that is printed in the terminal
summary, whether it passes or fails.
"""
import itertools
import time

import numpy as np
import pytest

from dynconv import tensor as T
from dynconv.bench import context_macs, run_complexity_sweep
from dynconv.checks import MODULES, run_checks
from dynconv.cli import main
from dynconv.conv import EPS, NORMALIZERS, ConvConfig, lightconv, lightconv_band_matrix, normalize_kernel
from dynconv.dynamic import dynamic_conv, dynamic_conv_band_matrix
from dynconv.model import BOS, ModelConfig, Seq2Seq, beam_decode
from dynconv.rng import Rng
from dynconv.train import ScheduleSpec, lr_at

from .conftest import ACCEPTANCE

DECODER_MECHS = ("lightconv", "dynamicconv", "self_attention", "cnn_depthwise", "cnn_nonseparable")
CONVERGENCE_STEPS = 1500      # pinned from the first converged run; limit is 5000
CONVERGENCE_TARGET = 0.99


def record(num, ok, detail):
    ACCEPTANCE[num] = (bool(ok), detail)
    print(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def _tiny(mech, seed=1, vocab=11):
    return Seq2Seq(ModelConfig(mechanism=mech, enc_layers=2, dec_layers=2, d=8, d_ff=16, heads=2,
                               enc_kernels=(3, 5), dec_kernels=(3, 5), src_vocab=vocab, tgt_vocab=vocab),
                   seed=seed)


def test_c01_parameter_counts(capsys):
    t0 = time.perf_counter()
    code = main(["params", "--d", "1024", "--k", "7", "--heads", "16"])
    out = capsys.readouterr().out.split()
    dt = time.perf_counter() - t0
    record(1, code == 0 and out == ["7340032", "7168", "112"] and dt < 1.0,
           f"params printed {' '.join(out)} in {dt:.3f}s")


def test_c02_gradient_checks():
    t0 = time.perf_counter()
    results = run_checks(MODULES, seeds=(1, 2, 3, 4, 5))
    dt = time.perf_counter() - t0
    worst = max(r.max_rel_error for *_, r in results)
    failed = [f"{m}/{s}/{n}" for m, s, n, r in results if not r.passed or r.tolerance != 1e-4]
    record(2, not failed and worst < 1e-4 and dt < 120,
           f"{len(results)} checks, worst rel err {worst:.2e}, {dt:.1f}s, failures {failed[:3]}")


def test_c03_band_matrix_equivalence():
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(20):
        rng = Rng(seed, 300)
        heads = int(rng.integers(1, 5))
        d = heads * int(rng.integers(1, 3))
        k = int((1, 3, 5)[int(rng.integers(0, 3))])
        n = int(rng.integers(1, 9))
        cfg = ConvConfig(d, heads, k, ("centered", "causal")[seed % 2])
        x = rng.normal(size=(2, n, d))
        w, wq = rng.normal(size=(heads, k)), rng.normal(size=(heads, k, d))
        worst = max(worst,
                    np.max(np.abs(lightconv(x, w, cfg).data - lightconv_band_matrix(x, w, cfg).data)),
                    np.max(np.abs(dynamic_conv(x, wq, cfg).data - dynamic_conv_band_matrix(x, wq, cfg).data)))
    dt = time.perf_counter() - t0
    record(3, worst < 1e-10 and dt < 10, f"max abs diff {worst:.2e} over 20 configs, {dt:.2f}s")


def test_c04_normalizer_catalog():
    t0 = time.perf_counter()
    problems = []
    for seed in range(50):
        w = Rng(seed, 400).normal(0, 3, (4, 7))
        for kind in NORMALIZERS:
            out = normalize_kernel(w, kind).data
            if not np.all(np.isfinite(out)):
                problems.append(f"{kind}: non-finite")
            if kind == "softmax" and np.max(np.abs(out.sum(-1) - 1.0)) > 1e-12:
                problems.append("softmax rows")
            if kind in ("l1", "abs_l1") and np.any(np.abs(out).sum(-1) > 1.0 + EPS):
                problems.append(kind)
            if kind in ("l2", "abs_l2") and np.any(np.sqrt((out ** 2).sum(-1)) > 1.0 + EPS):
                problems.append(kind)
            if kind == "sigmoid" and not np.all((out > 0) & (out < 1)):
                problems.append("sigmoid range")
    dt = time.perf_counter() - t0
    record(4, len(NORMALIZERS) == 10 and EPS == 1e-6 and not problems and dt < 5,
           f"{len(NORMALIZERS)} kinds, eps={EPS}, problems {sorted(set(problems))}, {dt:.2f}s")


def test_c05_complexity_scaling():
    t0 = time.perf_counter()
    ns = (256, 512, 1024, 2048)
    analytic_ok = all(
        context_macs(m, 2 * n, 256, 16, 31) == (4 if m == "self_attention" else 2) * context_macs(m, n, 256, 16, 31)
        for m in ("self_attention", "lightconv", "dynamicconv") for n in ns[:-1])
    rows = run_complexity_sweep(ns, d=256, heads=16, k=31, repeats=11, seed=1)
    wall = {(r.mechanism, r.n): r.wall_ns_median for r in rows}
    ratios, ok = {}, analytic_ok
    for m in ("self_attention", "lightconv", "dynamicconv"):
        ratios[m] = [wall[(m, b)] / wall[(m, a)] for a, b in zip(ns, ns[1:])]
        if m == "self_attention":
            ok &= all(r >= 3.0 for r in ratios[m])
        else:
            ok &= all(0 < r <= 2.6 for r in ratios[m])
    dt = time.perf_counter() - t0
    shown = "; ".join(f"{m} " + "/".join(f"{r:.2f}" for r in v) for m, v in ratios.items())
    record(5, ok and dt < 180, f"analytic exact={analytic_ok}; measured {shown}; {dt:.1f}s")


def test_c06_causality():
    t0 = time.perf_counter()
    src = np.array([[3, 4, 5, 6, 7]])
    tgt = np.array([[BOS, 5, 6, 7, 8, 9, 10, 4]])
    worst = 0.0
    for mech in DECODER_MECHS:
        model = _tiny(mech)
        base = model.forward(src, tgt).data
        for pos in range(1, tgt.shape[1]):
            alt = tgt.copy()
            alt[0, pos] = 3 if tgt[0, pos] != 3 else 4
            worst = max(worst, float(np.max(np.abs(model.forward(src, alt).data[:, :pos] - base[:, :pos]))))
    dt = time.perf_counter() - t0
    record(6, worst == 0.0 and dt < 10, f"max change at past positions {worst!r} for {len(DECODER_MECHS)} mechanisms, {dt:.2f}s")


def test_c07_incremental_decoding():
    t0 = time.perf_counter()
    worst = 0.0
    for mech in DECODER_MECHS:
        model = _tiny(mech, seed=2)
        for length in range(1, 17):
            rng = Rng(700, length)
            src = rng.integers(3, 11, (2, 6))
            src[1, 5] = 0
            tgt = np.concatenate([np.full((2, 1), BOS), rng.integers(3, 11, (2, length - 1))], axis=1)
            diff = np.max(np.abs(model.forward(src, tgt).data - model.incremental_logits(src, tgt)))
            worst = max(worst, float(diff))
    dt = time.perf_counter() - t0
    record(7, worst <= 1e-10 and dt < 30, f"max |step - full| {worst:.2e}, lengths 1..16, {dt:.1f}s")


@pytest.fixture(scope="module")
def convergence_runs(tmp_path_factory):
    """One CLI training run per mechanism on the copy task, plus a repeat for determinism."""
    root = tmp_path_factory.mktemp("convergence")
    runs = {}
    for tag, mech in (("lightconv", "lightconv"), ("dynamicconv", "dynamicconv"),
                      ("self_attention", "self_attention"), ("lightconv_repeat", "lightconv")):
        log, ckpt = root / f"{tag}.log", root / f"{tag}.ckpt"
        argv = ["train", "--mechanism", mech, "--task", "copy", "--vocab", "20", "--min-len", "4",
                "--max-len", "16", "--enc-layers", "2", "--dec-layers", "2", "--d", "64", "--heads", "4",
                "--enc-kernels", "3,7", "--dec-kernels", "3,7", "--steps", str(CONVERGENCE_STEPS),
                "--eval-every", "500", "--seed", "1", "--quiet", "--log", str(log), "--out", str(ckpt)]
        t0 = time.perf_counter()
        code = main(argv)
        runs[tag] = dict(code=code, log=log, ckpt=ckpt, seconds=time.perf_counter() - t0)
    return runs


def test_c08_toy_convergence(convergence_runs):
    parts, ok = [], True
    for mech in ("lightconv", "dynamicconv", "self_attention"):
        run = convergence_runs[mech]
        last = run["log"].read_text().splitlines()[-1].split(",")
        step, acc = int(last[0]), float(last[3])
        ok &= run["code"] == 0 and step <= 5000 and acc >= CONVERGENCE_TARGET and run["seconds"] < 900
        parts.append(f"{mech} acc={acc:.4f}@{step} ({run['seconds']:.0f}s)")
    record(8, ok, "; ".join(parts))


def test_c09_schedule_endpoints():
    s = ScheduleSpec("cosine_warmup", 1e-7, 1e-3, 10_000, 20_000)
    start, peak = lr_at(s, 0), lr_at(s, 10_000)
    left = s.lr_min + (s.lr_max - s.lr_min) * (s.warmup - 1e-9) / s.warmup
    gap = abs(left - peak)
    record(9, start == 1e-7 and peak == 1e-3 and gap < 1e-12,
           f"lr(0)={start!r}, lr(10000)={peak!r}, boundary gap {gap:.1e}")


def test_c10_beam_oracle():
    t0 = time.perf_counter()
    matches = 0
    for seed in range(5):
        model = _tiny("lightconv", seed=seed, vocab=3)
        src = np.array([1, 2, 1, 1])
        best, best_seq = -np.inf, None
        for seq in itertools.product(range(3), repeat=2):
            lp = T.log_softmax(model.forward(src[None], np.array([[BOS, seq[0]]]))).data[0]
            score = lp[0, seq[0]] + lp[1, seq[1]]
            if score > best:
                best, best_seq = score, list(seq)
        got = beam_decode(model, src, beam=9, max_len=2, alpha=0.0, eos=None, banned=())
        matches += got == best_seq
    dt = time.perf_counter() - t0
    record(10, matches == 5 and dt < 5, f"{matches}/5 toy models match brute force over 9 sequences, {dt:.2f}s")


def test_c11_determinism(convergence_runs):
    a, b = convergence_runs["lightconv"], convergence_runs["lightconv_repeat"]
    same_log = a["log"].read_bytes() == b["log"].read_bytes()
    same_ckpt = a["ckpt"].read_bytes() == b["ckpt"].read_bytes()
    record(11, same_log and same_ckpt, f"loss logs identical={same_log}, checkpoints identical={same_ckpt}")
