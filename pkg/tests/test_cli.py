import json

import pytest

from lculab.cli import main
from lculab.nn.weights import load_weights
from lculab.pipeline.dataset import deep_fraction, read_dataset
from lculab.pipeline.metrics import write_curve


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def labelled(tmp_path, toy_yuv):
    raw, lab = tmp_path / "raw.lcud", tmp_path / "lab.lcud"
    assert run("extract", "--yuv", toy_yuv, "--size", "128x64", "--qp", 27, 37, "--out", raw) == 0
    assert run("label", "--dataset", raw, "--out", lab) == 0
    return lab


@pytest.fixture
def trained(tmp_path, labelled):
    out = tmp_path / "w.bin"
    cfg = tmp_path / "cfg.toml"
    cfg.write_text("[model]\nreduced = true\n\n[train]\nbatch_size = 4\n")
    assert run("train", "--stage", "decoder", "--config", cfg, "--dataset", labelled,
               "--weights", out, "--steps", 5, "--seed", 1) == 0
    return out


def test_extract_and_label(tmp_path, labelled):
    samples = read_dataset(labelled)
    # 2 frames x 2 QPs x 2 LCUs
    assert len(samples) == 8 and all(s.labelled for s in samples)
    assert sorted({s.qp for s in samples}) == [27, 37]


def test_label_options_change_labels(tmp_path, labelled):
    raw = tmp_path / "raw.lcud"
    coarse = tmp_path / "coarse.lcud"
    assert run("label", "--dataset", raw, "--lambda", 1e12, "--no-qp-scaling", "--out", coarse) == 0
    assert all(s.mode_labels == [0] for s in read_dataset(coarse))


def test_train_config_and_seed(tmp_path, trained, labelled):
    w = load_weights(trained)
    assert w.config.decoder_layers == 1
    again = tmp_path / "w2.bin"
    cfg = tmp_path / "cfg.toml"
    run("train", "--stage", "decoder", "--config", cfg, "--dataset", labelled, "--weights", again, "--steps", 5, "--seed", 1)
    assert again.read_bytes() == trained.read_bytes()


def test_json_config(tmp_path, labelled):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"model": {"reduced": True}, "train": {"steps": 2}}))
    assert run("train", "--stage", "encoder_only", "--config", cfg, "--dataset", labelled, "--weights", tmp_path / "e.bin") == 0


def test_eval_and_infer(tmp_path, trained, labelled, capsys):
    report = tmp_path / "r.json"
    assert run("eval", "--weights", trained, "--dataset", labelled, "--out", report, "--per-sample") == 0
    rep = json.loads(report.read_text())
    assert rep["count"] == 8 and rep["all_legal"] and len(rep["per_sample"]) == 8
    assert run("infer", "--weights", trained, "--dataset", labelled, "--memory", "labels") == 0
    out = json.loads(capsys.readouterr().out)
    assert out["count"] == 8 and len(out["predictions"]) == 8


def test_balance(tmp_path, labelled):
    out = tmp_path / "bal.lcud"
    assert run("balance", "--dataset", labelled, "--target", 0.9, "--seed", 3, "--out", out) == 0
    before, after = read_dataset(labelled), read_dataset(out)
    assert deep_fraction(after) >= 0.9 and after[:len(before)] == before


def test_ts_and_bdrate(tmp_path, capsys):
    assert run("ts", "--t-hpm", 100, "--t-hpm-prime", 3, "--t-nn", 5) == 0
    assert json.loads(capsys.readouterr().out)["time_saving"] == pytest.approx(0.97, abs=1e-12)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    curve = [(1000.0, 32.0), (1800.0, 34.6), (3200.0, 37.1), (6000.0, 39.8)]
    write_curve(a, curve)
    write_curve(b, [(r * 1.1, p) for r, p in curve])
    assert run("bdrate", "--a", a, "--b", b) == 0
    assert json.loads(capsys.readouterr().out)["bd_rate_percent"] == pytest.approx(10.0, abs=0.01)


def test_errors_exit_2(tmp_path, capsys):
    assert run("extract", "--yuv", tmp_path / "missing.yuv", "--size", "64x64", "--qp", 32, "--out", tmp_path / "o") == 2
    assert run("extract", "--yuv", tmp_path / "missing.yuv", "--size", "64by64", "--qp", 32, "--out", tmp_path / "o") == 2
    bad = tmp_path / "bad.lcud"
    bad.write_bytes(b"nope")
    assert run("label", "--dataset", bad, "--out", tmp_path / "o") == 2
    assert run("ts", "--t-hpm", 0, "--t-hpm-prime", 0, "--t-nn", 0) == 2
    assert "lculab" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        run("train")
