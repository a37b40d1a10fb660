"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 numeric failure (divergence or a
failed check). Every subcommand accepts ``--config FILE`` holding
``key=value`` lines named after its long flags; explicit flags win.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .kvconfig import read_kv, to_bool

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _int_list(s: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in s.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


def _bool(s: str) -> bool:
    try:
        return to_bool(s)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _model_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--mechanism", default="lightconv",
                   choices=("self_attention", "lightconv", "dynamicconv", "cnn_nonseparable", "cnn_depthwise"))
    g.add_argument("--enc-layers", type=int, default=2)
    g.add_argument("--dec-layers", type=int, default=2)
    g.add_argument("--d", type=int, default=64)
    g.add_argument("--d-ff", type=int, default=256)
    g.add_argument("--heads", type=int, default=4)
    g.add_argument("--enc-kernels", type=_int_list, default=(3, 7))
    g.add_argument("--dec-kernels", type=_int_list, default=(3, 7))
    g.add_argument("--use-glu", type=_bool, default=True)
    g.add_argument("--dropconnect", type=float, default=0.0)
    g.add_argument("--dropout", type=float, default=0.0)
    g.add_argument("--normalizer", default="softmax")
    g.add_argument("--attention-window", type=_bool, default=False)
    g.add_argument("--max-positions", type=int, default=256)


def _task_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("task")
    g.add_argument("--task", default="copy", choices=("copy", "reverse", "sort"))
    g.add_argument("--vocab", type=int, default=20)
    g.add_argument("--min-len", type=int, default=4)
    g.add_argument("--max-len", type=int, default=16)
    g.add_argument("--batch-size", type=int, default=32)
    g.add_argument("--eval-samples", type=int, default=200)


def _optim_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("optimization")
    g.add_argument("--steps", type=int, default=1500)
    g.add_argument("--schedule", default="cosine_warmup", choices=("cosine_warmup", "inverse_sqrt"))
    g.add_argument("--lr-min", type=float, default=1e-7)
    g.add_argument("--lr-max", type=float, default=2e-3)
    g.add_argument("--warmup", type=int, default=400)
    g.add_argument("--period", type=int, default=None, help="cosine period; defaults to steps - warmup")
    g.add_argument("--optimizer", default="adam", choices=("adam", "nesterov_sgd"))
    g.add_argument("--clip-norm", type=float, default=1.0)
    g.add_argument("--smoothing", type=float, default=0.1)
    g.add_argument("--accumulate", type=int, default=1)
    g.add_argument("--eval-every", type=int, default=250)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dynconv", description="Lightweight and dynamic convolutions for sequence models.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", type=Path, default=None, help="key=value file; flags override it")
        p.add_argument("--seed", type=int, default=1)
        return p

    p = add("params", "kernel weight counts: non-separable, depthwise, shared")
    p.add_argument("--d", type=int, default=1024)
    p.add_argument("--k", type=int, default=7)
    p.add_argument("--heads", type=int, default=16)

    p = add("train", "train an encoder-decoder on a synthetic task")
    _model_flags(p)
    _task_flags(p)
    _optim_flags(p)
    p.add_argument("--out", type=Path, default=None, help="checkpoint path")
    p.add_argument("--log", type=Path, default=None, help="step,lr,loss,token_accuracy log path")
    p.add_argument("--quiet", action="store_true")

    p = add("decode", "beam-search decode token ids with a checkpoint")
    p.add_argument("--checkpoint", type=Path, required=False)
    p.add_argument("--source", default=None, help="space-separated ids; reads stdin lines if omitted")
    p.add_argument("--beam", type=int, default=4)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--max-len", type=int, default=None)

    p = add("bench", "attention vs convolution cost sweep, written as CSV")
    p.add_argument("--n", type=_int_list, default=(256, 512, 1024, 2048))
    p.add_argument("--d", type=int, default=256)
    p.add_argument("--heads", type=int, default=16)
    p.add_argument("--k", type=int, default=31)
    p.add_argument("--repeats", type=int, default=11)
    p.add_argument("--out", type=Path, default=None)

    p = add("gradcheck", "finite-difference gradient checks")
    p.add_argument("--all", action="store_true", help="every module (default)")
    p.add_argument("--module", action="append", default=None,
                   choices=("numeric-core", "conv-kernels", "dynamic-conv", "attention", "seq-model"))
    p.add_argument("--seeds", type=int, default=5, help="number of consecutive seeds starting at --seed")

    p = add("ablate", "cumulative feature ablation on a synthetic task")
    p.add_argument("--d", type=int, default=64)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--d-ff", type=int, default=128)
    p.add_argument("--dropconnect", type=float, default=0.1)
    p.add_argument("--steps", type=int, default=300)
    p.add_argument("--lr-max", type=float, default=2e-3)
    p.add_argument("--batch-size", type=int, default=32)
    g = p.add_argument_group("task")
    g.add_argument("--task", default="copy", choices=("copy", "reverse", "sort"))
    g.add_argument("--vocab", type=int, default=20)
    g.add_argument("--min-len", type=int, default=4)
    g.add_argument("--max-len", type=int, default=16)
    p.add_argument("--out", type=Path, default=None)
    return parser


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for action in parser._subparsers._group_actions:
        if name in action.choices:
            return action.choices[name]
    raise UsageError(f"unknown command {name!r}")


def parse_args(argv: list[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    try:
        pairs = read_kv(args.config)
    except (OSError, ValueError) as e:
        raise UsageError(f"cannot read config {args.config}: {e}") from None
    sp = _subparser(parser, args.command)
    known = {a.dest: a for a in sp._actions if a.dest not in ("help", "config")}
    defaults = {}
    for key, raw in pairs.items():
        if key not in known:
            raise UsageError(f"{args.config}: unknown key {key!r} for '{args.command}'")
        action = known[key]
        conv = to_bool if action.nargs == 0 else (action.type or str)
        try:
            defaults[key] = conv(raw)
        except (ValueError, argparse.ArgumentTypeError) as e:
            raise UsageError(f"{args.config}: bad value for {key}: {e}") from None
        if action.choices and defaults[key] not in action.choices:
            raise UsageError(f"{args.config}: {key} must be one of {list(action.choices)}")
    sp.set_defaults(**defaults)
    return parser.parse_args(argv)


def cmd_params(args) -> int:
    from .conv import count_params
    if min(args.d, args.k, args.heads) < 1:
        raise UsageError("d, k and heads must be positive")
    print(*count_params(args.d, args.k, args.heads))
    return EXIT_OK


def _model_config(args):
    from .model import ModelConfig
    return ModelConfig(mechanism=args.mechanism, enc_layers=args.enc_layers, dec_layers=args.dec_layers,
                       d=args.d, d_ff=args.d_ff, heads=args.heads, enc_kernels=args.enc_kernels,
                       dec_kernels=args.dec_kernels, use_glu=args.use_glu, dropconnect_p=args.dropconnect,
                       dropout_p=args.dropout, normalizer=args.normalizer,
                       attention_window=args.attention_window, src_vocab=args.vocab, tgt_vocab=args.vocab,
                       max_positions=args.max_positions)


def cmd_train(args) -> int:
    from .checkpoint import save_checkpoint
    from .train import OptimizerState, ScheduleSpec, TaskSpec, train
    try:
        cfg = _model_config(args)
        task = TaskSpec(args.task, args.vocab, args.min_len, args.max_len, seed=args.seed)
        period = args.period if args.period is not None else max(1, args.steps - args.warmup)
        schedule = ScheduleSpec(args.schedule, args.lr_min, args.lr_max, args.warmup, period)
        opt = OptimizerState(args.optimizer, clip_norm=args.clip_norm)
    except ValueError as e:
        raise UsageError(str(e)) from None
    report = train(cfg, task, schedule, opt, args.steps, args.seed, batch_size=args.batch_size,
                   eval_every=args.eval_every, eval_samples=args.eval_samples, smoothing=args.smoothing,
                   accumulate=args.accumulate, log_file=args.log, verbose=not args.quiet)
    if args.out is not None and report.model is not None:
        save_checkpoint(args.out, cfg, report.model.params)
    if report.status == "diverged":
        print(f"diverged at step {report.diverged_step}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"final token accuracy {report.final_accuracy:.4f} in {report.wall_time:.1f}s")
    return EXIT_OK


def cmd_decode(args) -> int:
    from .checkpoint import load_checkpoint
    from .model import Seq2Seq, Vocab, beam_decode
    if args.checkpoint is None:
        raise UsageError("decode needs --checkpoint")
    cfg, params = load_checkpoint(args.checkpoint)
    model = Seq2Seq(cfg, params)
    vocab = Vocab(cfg.src_vocab)
    lines = [args.source] if args.source is not None else [ln for ln in sys.stdin.read().splitlines() if ln.strip()]
    for line in lines:
        try:
            src = vocab.encode(line)
        except ValueError as e:
            raise UsageError(str(e)) from None
        out = beam_decode(model, src, beam=args.beam, max_len=args.max_len, alpha=args.alpha)
        print(vocab.decode(out))
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import rows_to_csv, run_complexity_sweep
    try:
        rows = run_complexity_sweep(args.n, args.d, args.heads, args.k, args.repeats, args.seed)
    except ValueError as e:
        raise UsageError(str(e)) from None
    text = rows_to_csv(rows)
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text, encoding="utf-8")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .checks import MODULES, run_checks
    modules = args.module or MODULES
    failed = 0
    for module, seed, name, rep in run_checks(modules, range(args.seed, args.seed + args.seeds)):
        status = "ok" if rep.passed else "FAIL"
        print(f"{status:4s} {module:13s} seed={seed} {name:45s} max_rel_err={rep.max_rel_error:.2e}")
        failed += not rep.passed
    print(f"{failed} failed" if failed else "all gradient checks passed")
    return EXIT_NUMERIC if failed else EXIT_OK


def cmd_ablate(args) -> int:
    from .bench import ABLATION_FIELDS, ablation_grid, rows_to_csv, run_ablation
    from .train import TaskSpec
    try:
        grid = ablation_grid(args.d, args.heads, args.layers, 3, args.d_ff, args.dropconnect, args.vocab)
        task = TaskSpec(args.task, args.vocab, args.min_len, args.max_len, seed=args.seed)
    except ValueError as e:
        raise UsageError(str(e)) from None
    rows = run_ablation(grid, task, args.steps, args.seed, args.batch_size, args.lr_max,
                        progress=lambda s: print(s, file=sys.stderr))
    text = rows_to_csv(rows, ABLATION_FIELDS)
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text, encoding="utf-8")
    return EXIT_OK


COMMANDS = {"params": cmd_params, "train": cmd_train, "decode": cmd_decode, "bench": cmd_bench,
            "gradcheck": cmd_gradcheck, "ablate": cmd_ablate}


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
