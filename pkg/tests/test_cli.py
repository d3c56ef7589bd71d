import csv
import json
from pathlib import Path

import pytest

from saigc import rl
from saigc.cli import main

VECTORS = Path(__file__).resolve().parents[1] / "conformance" / "vectors"


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data, policy = root / "data.jsonl", root / "policy.json"
    assert main(["gen-data", "--train", "40", "--test", "20", "--seed", "2", "--out", str(data)]) == 0
    assert main(["train", "--data", str(data), "--episodes", "300", "--seed", "2", "--out", str(policy)]) == 0
    return root, data, policy


def test_gen_data_default_split_sizes(tmp_path):
    out = tmp_path / "d.jsonl"
    assert main(["gen-data", "--train", "200", "--test", "50", "--seed", "1", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 250
    assert sum('"split":"test"' in line for line in lines) == 50


def test_gen_data_tiny_and_deterministic(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for out in (a, b):
        assert main(["gen-data", "--train", "1", "--test", "1", "--seed", "7", "--out", str(out)]) == 0
    assert len(a.read_text().splitlines()) == 2
    assert a.read_bytes() == b.read_bytes()


def test_train_zero_episodes(workspace, tmp_path):
    _, data, _ = workspace
    out = tmp_path / "zero.json"
    assert main(["train", "--data", str(data), "--episodes", "0", "--out", str(out)]) == 0
    policy, critic, cfg = rl.load_policy(out)
    assert not policy.theta.any() and not critic.phi.any()
    assert cfg["episodes"] == 0 and "noise" in cfg
    assert (tmp_path / "zero.log.csv").read_text() == "episode,mean_reward,mean_quality\n"


def test_train_log(workspace):
    root, _, policy = workspace
    rows = list(csv.DictReader(open(policy.with_suffix(".log.csv"))))
    assert len(rows) == 300 and rows[0]["episode"] == "0"


def test_eval_outputs(workspace, capsys):
    root, data, policy = workspace
    metrics = root / "m.csv"
    code = main(["eval", "--data", str(data), "--policy", str(policy), "--k", "1,5,40", "--out", str(metrics)])
    assert code == 0
    out = capsys.readouterr().out
    assert "recall@40=1.0" in out and "mean_quality=" in out and "mean_compression_ratio=" in out
    lines = metrics.read_text().splitlines()
    assert lines[0] == "scene_id,true_class,rank_of_true,payload_bytes,compression_ratio,quality"
    assert len(lines) == 21


def _mean_quality(path):
    rows = list(csv.DictReader(open(path)))
    return sum(float(r["quality"]) for r in rows) / len(rows)


def test_modified_not_worse_than_original(workspace):
    root, data, policy = workspace
    orig, mod = root / "orig.csv", root / "mod.csv"
    base = ["eval", "--data", str(data), "--policy", str(policy), "--seed", "2"]
    assert main(base + ["--mode", "original", "--out", str(orig)]) == 0
    assert main(base + ["--mode", "modified", "--out", str(mod)]) == 0
    assert _mean_quality(mod) >= _mean_quality(orig)


def test_original_mode_needs_no_policy(workspace, tmp_path):
    _, data, _ = workspace
    assert main(["eval", "--data", str(data), "--mode", "original", "--out", str(tmp_path / "o.csv")]) == 0


def test_sweep(workspace, tmp_path, capsys):
    root, data, policy = workspace
    out = tmp_path / "s.csv"
    assert main(["sweep", "--data", str(data), "--policy", str(policy), "--budgets", "23,139,2810",
                 "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out)))
    assert [r["budget"] for r in rows] == ["23", "139", "2810"]
    q = [float(r["mean_quality"]) for r in rows]
    assert q == sorted(q) and q[-1] == 1.0
    single = tmp_path / "e.csv"
    assert main(["eval", "--data", str(data), "--policy", str(policy), "--budget", "139", "--out", str(single)]) == 0
    assert float(rows[1]["mean_quality"]) == pytest.approx(_mean_quality(single), abs=1e-15)


def test_config_file_layer(workspace, tmp_path):
    _, data, _ = workspace
    cfg = tmp_path / "c.yaml"
    cfg.write_text(f"data: {data}\nepisodes: 5\n")
    out = tmp_path / "p.json"
    assert main(["train", "--config", str(cfg), "--episodes", "3", "--out", str(out)]) == 0
    assert rl.load_policy(out)[2]["episodes"] == 3


# -- exit codes ----------------------------------------------------------------

def test_usage_errors_exit_1(workspace, tmp_path, capsys):
    _, data, policy = workspace
    with pytest.raises(SystemExit) as info:
        main(["train", "--bogus"])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 1
    assert main(["gen-data"]) == 1
    assert main(["train", "--data", str(data), "--lr-actor", "-1", "--out", str(tmp_path / "x.json")]) == 1
    assert "training" in capsys.readouterr().err
    assert main(["eval", "--data", str(data), "--policy", str(policy), "--k", "41", "--out", str(tmp_path / "x")]) == 1
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("colour: red\n")
    assert main(["gen-data", "--config", str(cfg), "--out", str(tmp_path / "d")]) == 1
    assert "colour" in capsys.readouterr().err
    cfg.write_text("reference: screen\n")
    assert main(["eval", "--config", str(cfg), "--data", str(data), "--mode", "original",
                 "--out", str(tmp_path / "m.csv")]) == 1
    assert "reference" in capsys.readouterr().err


def test_budget_too_small_exit_1(workspace, tmp_path, capsys):
    _, data, policy = workspace
    assert main(["eval", "--data", str(data), "--policy", str(policy), "--budget", "0",
                 "--out", str(tmp_path / "m.csv")]) == 1
    assert "BudgetTooSmall" in capsys.readouterr().err


def test_io_errors_exit_2(workspace, tmp_path, capsys):
    _, data, _ = workspace
    assert main(["train", "--data", str(tmp_path / "missing.jsonl"), "--out", str(tmp_path / "p.json")]) == 2
    assert main(["gen-data", "--out", str(tmp_path / "no" / "such" / "dir.jsonl")]) == 2
    assert main(["inspect", str(tmp_path / "missing.bin")]) == 2
    assert capsys.readouterr().err.count("error:") == 3


def test_data_errors_exit_3(workspace, tmp_path, capsys):
    _, data, _ = workspace
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id":0,"split":"train","vehicle_type":0}\n')
    assert main(["train", "--data", str(bad), "--out", str(tmp_path / "p.json")]) == 3
    bad_policy = tmp_path / "bad.json"
    bad_policy.write_text('{"version": 99}')
    assert main(["eval", "--data", str(data), "--policy", str(bad_policy), "--out", str(tmp_path / "m.csv")]) == 3


def test_inspect_golden(capsys):
    for path in sorted(VECTORS.glob("*.bin")):
        assert main(["inspect", "--json", str(path)]) == 0
        out = capsys.readouterr().out
        parsed = json.loads(out[out.index("{"):])
        assert parsed == json.loads(path.with_suffix(".json").read_text())
    assert main(["inspect", str(VECTORS / "03_clutter.bin")]) == 0
    assert "crc32: 0x76711d15 ok" in capsys.readouterr().out


def test_inspect_corrupt(tmp_path, capsys):
    data = bytearray((VECTORS / "02_full_text.bin").read_bytes())
    data[10] ^= 0x04
    flipped = tmp_path / "flip.bin"
    flipped.write_bytes(bytes(data))
    assert main(["inspect", str(flipped)]) == 3
    assert "CrcMismatch at offset 19" in capsys.readouterr().err
    empty = tmp_path / "empty.bin"
    empty.write_bytes(b"")
    assert main(["inspect", str(empty)]) == 3
    assert "Truncated" in capsys.readouterr().err
