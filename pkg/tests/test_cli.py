import csv
import io

import pytest

from dynconv.cli import main


def test_params(capsys):
    assert main(["params", "--d", "1024", "--k", "7", "--heads", "16"]) == 0
    assert capsys.readouterr().out.split() == ["7340032", "7168", "112"]


def test_unknown_flag_is_usage_error(capsys):
    assert main(["params", "--bogus"]) == 1
    assert main([]) == 1
    assert main(["params", "--d", "0"]) == 1


def test_config_file_supplies_defaults(tmp_path, capsys):
    cfg = tmp_path / "p.cfg"
    cfg.write_text("# kernel sizes\nd = 512\nk=3\nheads=4\n")
    assert main(["params", "--config", str(cfg)]) == 0
    assert capsys.readouterr().out.split() == ["786432", "1536", "12"]
    assert main(["params", "--config", str(cfg), "--d", "1024", "--k", "7", "--heads", "16"]) == 0
    assert capsys.readouterr().out.split() == ["7340032", "7168", "112"]


def test_config_file_rejects_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("widgets=3\n")
    assert main(["params", "--config", str(cfg)]) == 1
    assert main(["params", "--config", str(tmp_path / "missing.cfg")]) == 1


def test_bench_csv(tmp_path):
    out = tmp_path / "b.csv"
    assert main(["bench", "--n", "8,16,32", "--d", "16", "--heads", "4", "--k", "3", "--out", str(out)]) == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert len(rows) == 9
    assert set(r["mechanism"] for r in rows) == {"self_attention", "lightconv", "dynamicconv"}
    assert all(int(r["repeats"]) == 11 for r in rows)


def test_bench_rejects_descending_lengths():
    assert main(["bench", "--n", "32,16", "--d", "16", "--heads", "4"]) == 1


def test_gradcheck_single_module(capsys):
    assert main(["gradcheck", "--module", "attention", "--seeds", "1"]) == 0
    assert "all gradient checks passed" in capsys.readouterr().out


def test_train_then_decode(tmp_path, capsys):
    ckpt, log = tmp_path / "m.ckpt", tmp_path / "log.csv"
    argv = ["train", "--steps", "6", "--d", "16", "--d-ff", "32", "--heads", "2", "--enc-kernels", "3",
            "--dec-kernels", "3", "--enc-layers", "1", "--dec-layers", "1", "--batch-size", "4",
            "--eval-samples", "4", "--eval-every", "3", "--warmup", "2", "--quiet",
            "--out", str(ckpt), "--log", str(log)]
    assert main(argv) == 0
    assert [ln.split(",")[0] for ln in log.read_text().splitlines()] == ["3", "6"]
    capsys.readouterr()
    assert main(["decode", "--checkpoint", str(ckpt), "--source", "3 4 5", "--beam", "2"]) == 0
    out = capsys.readouterr().out.strip()
    assert all(tok.isdigit() for tok in out.split())


def test_decode_needs_checkpoint():
    assert main(["decode", "--source", "3 4"]) == 1
