import json
import subprocess
import sys

import numpy as np
import pytest

from gamefusion import cli
from gamefusion.dataset import TASKS
from gamefusion.features import AUDIO_SAMPLES, write_wav

TINY = {"generator": {"n_records": 60}, "train": {"epochs": 1}, "k": 3}


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(TINY))
    return path


def run(argv):
    return cli.main([str(a) for a in argv])


def read_tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_eval_byte_identical(tmp_path, tiny_config):
    for name in ("a", "b"):
        assert run(["eval", "--config", tiny_config, "--task", "overall", "--seed", 7, "--workers", 1,
                    "--out", tmp_path / name]) == 0
    a, b = read_tree(tmp_path / "a"), read_tree(tmp_path / "b")
    assert a == b
    assert "eval/overall_metrics.csv" in a and "run_manifest.json" in a
    assert "eval/overall/fold0_model.json" in a and "eval/overall/fold2_history.csv" in a


def test_run_manifest_records_hash_and_seed(tmp_path, tiny_config):
    assert run(["comorbid", "--config", tiny_config, "--seed", 5, "--out", tmp_path]) == 0
    man = json.loads((tmp_path / "run_manifest.json").read_text())
    assert man["seed"] == 5 and len(man["config_hash"]) == 16
    assert man["config"]["generator"]["n_records"] == 60
    assert man["outputs"] == ["comorbidity.csv", "comorbidity.json"]


def test_eval_all_tasks(tmp_path, tiny_config):
    assert run(["eval", "--config", tiny_config, "--task", "all", "--workers", 1, "--out", tmp_path]) == 0
    reports = sorted(p.name for p in (tmp_path / "eval").glob("*_metrics.csv"))
    assert reports == sorted(f"{t}_metrics.csv" for t in TASKS)


def test_report_bundle(tmp_path, tiny_config):
    assert run(["report", "--config", tiny_config, "--workers", 1, "--out", tmp_path]) == 0
    files = read_tree(tmp_path)
    for name in ("eval/overall_metrics.json", "crosspred.csv", "comorbidity.csv", "contribution/overall.csv",
                 "ablation/overall.csv"):
        assert name in files


def test_gen_then_eval_from_manifest(tmp_path, tiny_config):
    assert run(["gen", "--config", tiny_config, "--out", tmp_path / "g"]) == 0
    man = tmp_path / "g" / "dataset" / "manifest.json"
    assert man.exists()
    assert run(["eval", "--manifest", man, "--epochs", 1, "--k", 3, "--workers", 1, "--out", tmp_path / "e"]) == 0
    assert run(["eval", "--config", tiny_config, "--workers", 1, "--out", tmp_path / "e2"]) == 0
    # same data, same seed: identical metrics whether generated or loaded
    assert (tmp_path / "e/eval/overall_metrics.csv").read_bytes() == (tmp_path / "e2/eval/overall_metrics.csv").read_bytes()


def test_mfcc_silence(tmp_path, capsys):
    write_wav(tmp_path / "silence.wav", np.zeros(AUDIO_SAMPLES))
    assert run(["mfcc", tmp_path / "silence.wav"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "t," + ",".join(f"f{j}" for j in range(13))
    rows = [ln.split(",", 1)[1] for ln in lines[1:]]
    assert len(rows) == 998 and len(set(rows)) == 1
    assert run(["mfcc", tmp_path / "silence.wav", "--out", tmp_path / "o"]) == 0
    assert len((tmp_path / "o" / "silence_mfcc.csv").read_text().splitlines()) == 999


def test_usage_errors_exit_1(capsys):
    assert run([]) == 1
    assert run(["frobnicate"]) == 1
    assert run(["eval", "--k"]) == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 3 and all(e.startswith("gamefusion: usage error") for e in err)


def test_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"epochz": 3}))
    assert run(["eval", "--config", bad]) == 2
    assert "unknown config keys: epochz" in capsys.readouterr().err
    bad.write_text(json.dumps({"train": {"lr": -1}}))
    assert run(["eval", "--config", bad]) == 2
    bad.write_text("{nope")
    assert run(["eval", "--config", bad]) == 2
    assert run(["eval", "--task", "nope"]) == 2
    assert run(["eval", "--manifest", tmp_path / "missing.json"]) == 2
    assert run(["mfcc", tmp_path / "missing.wav"]) == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert all(e.startswith("gamefusion: data error") for e in err)


def test_runtime_failure_exit_3(tmp_path, tiny_config, monkeypatch, capsys):
    def boom(*a, **k):
        raise FloatingPointError("loss went non-finite")

    monkeypatch.setattr(cli, "cross_validate", boom)
    assert run(["eval", "--config", tiny_config, "--out", tmp_path]) == 3
    err = capsys.readouterr().err.strip().splitlines()
    assert err == ["gamefusion: runtime error: FloatingPointError: loss went non-finite"]


def test_flags_override_config(tmp_path, tiny_config):
    args = cli.make_parser().parse_args(["eval", "--config", str(tiny_config), "--epochs", "4", "--lr", "0.01",
                                         "--task", "anxiety,hostility", "--task", "overall", "--sign", "1"])
    cfg = cli.build_config(args)
    assert cfg.train.epochs == 4 and cfg.train.lr == 0.01
    assert cfg.tasks == ("anxiety", "hostility", "overall")
    assert cfg.sign == 1.0 and cfg.k == 3
    assert cfg.workers >= 1


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "gamefusion", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "crosspred" in r.stdout
