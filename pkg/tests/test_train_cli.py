import dataclasses
import json
import subprocess
import sys

import numpy as np
import pytest

from crackseg import checkpoint, cli
from crackseg import train as train_mod
from crackseg.config import NetworkConfig, OptimConfig, RunConfig
from crackseg.data import save_sample, synth_dataset, write_png
from crackseg.errors import NumericalError
from crackseg.head import CrackSegNet
from crackseg.nn import Parameter
from crackseg.optim import AdamW, poly_lr
from crackseg.tensor import Tensor

SMALL = RunConfig(
    network=NetworkConfig(embed_dim=8, image_size=32, num_layers=2),
    optim=OptimConfig(lr=3e-3, steps=3, batch_size=2),
)


def write_config(path, cfg=SMALL):
    path.write_text(cfg.to_json())
    return str(path)


def test_poly_lr():
    assert poly_lr(1.0, 0, 10) == 1.0
    assert poly_lr(1.0, 10, 10) == 0.0
    assert poly_lr(2.0, 5, 10, 0.9) == pytest.approx(2.0 * 0.5 ** 0.9)


def test_adamw_matches_reference():
    p = Parameter(np.array([1.0, -2.0]))
    cfg = OptimConfig(lr=0.1, weight_decay=0.1, steps=0)
    opt = AdamW([p], cfg)
    x, m, v = np.array([1.0, -2.0]), 0.0, 0.0
    for t in range(1, 4):
        g = 2 * x
        p.grad = 2 * p.data
        opt.step()
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        x = x * (1 - 0.1 * 0.1) - 0.1 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
        assert np.allclose(p.data, x, atol=1e-15)


def test_training_reduces_loss():
    samples = synth_dataset(2, 32, 32)
    cfg = dataclasses.replace(SMALL, optim=dataclasses.replace(SMALL.optim, steps=8))
    result = train_mod.train(cfg, samples)
    assert len(result.log) == 8
    assert result.log[-1]["loss"] < result.log[0]["loss"]
    assert set(result.log[0]) == {"step", "loss", "train_f1", "lr"}


def test_zero_steps_keeps_initialisation():
    result = train_mod.train(SMALL.replace(optim=dataclasses.replace(SMALL.optim, steps=0)), synth_dataset(2, 32, 32))
    fresh = CrackSegNet(SMALL.network, seed=SMALL.seed)
    for (_, a), (_, b) in zip(result.model.named_parameters(), fresh.named_parameters()):
        assert np.array_equal(a.data, b.data)
    assert result.log == []


def test_same_seed_same_loss():
    samples = synth_dataset(2, 32, 32)
    a = train_mod.train(SMALL, samples).final_loss
    b = train_mod.train(SMALL, samples).final_loss
    assert a == b


def test_stop_f1_halts_at_first_hit():
    cfg = SMALL.replace(optim=dataclasses.replace(SMALL.optim, steps=6, stop_f1=0.02))
    log = train_mod.train(cfg, synth_dataset(2, 32, 32)).log
    assert all(e["train_f1"] < 0.02 for e in log[:-1])
    assert len(log) == 6 or log[-1]["train_f1"] >= 0.02


def test_nan_loss_aborts(monkeypatch):
    monkeypatch.setattr(train_mod, "combined_loss", lambda p, t, c: Tensor(np.array(np.nan)))
    with pytest.raises(NumericalError, match="step 0"):
        train_mod.train(SMALL, synth_dataset(1, 32, 32))


def test_cli_train_nan_exit_code(monkeypatch, tmp_path, capsys):
    monkeypatch.setattr(train_mod, "combined_loss", lambda p, t, c: Tensor(np.array(np.nan)))
    code = cli.main(["train", "--config", write_config(tmp_path / "c.json"), "--synthetic", "1",
                     "--out", str(tmp_path / "m.ckpt")])
    assert code == 1 and "diverged" in capsys.readouterr().err


def test_cli_scan(tmp_path):
    out = tmp_path / "p.json"
    assert cli.main(["scan", "--strategy", "sass", "--height", "2", "--width", "2", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["paths"][0]["order"] == [0, 2, 3, 1]
    assert cli.main(["scan-dump", "--strategy", "parallel", "--height", "1", "--width", "1",
                     "--paths", "2", "--out", str(out)]) == 0
    assert all(p["order"] == [0] for p in json.loads(out.read_text())["paths"])


def test_cli_invalid_strategy_exit_two_no_file(tmp_path, capsys):
    out = tmp_path / "p.json"
    with pytest.raises(SystemExit) as info:
        cli.main(["scan", "--strategy", "spiral", "--height", "2", "--width", "2", "--out", str(out)])
    assert info.value.code == 2
    assert "usage" in capsys.readouterr().err
    assert not out.exists()


def test_entry_point_runs(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "crackseg.cli", "scan", "--strategy", "bad",
                           "--height", "1", "--width", "1"], capture_output=True, text=True)
    assert proc.returncode == 2 and "invalid strategy" in proc.stderr


def test_cli_train_infer_eval(tmp_path):
    cfg_path = write_config(tmp_path / "c.json")
    ckpt = tmp_path / "m.ckpt"
    assert cli.main(["train", "--config", cfg_path, "--synthetic", "2", "--out", str(ckpt)]) == 0
    log = json.loads((tmp_path / "m.ckpt.log.json").read_text())
    assert [e["step"] for e in log["steps"]] == [0, 1, 2]

    data = tmp_path / "data"
    for s in synth_dataset(2, 32, 32, seed=50):
        save_sample(data, s)
    assert cli.main(["infer", "--ckpt", str(ckpt), "--input", str(data), "--out", str(tmp_path / "pred"),
                     "--mask", str(tmp_path / "bin")]) == 0
    pred_files = sorted((tmp_path / "pred").glob("*.png"))
    assert len(pred_files) == 2
    assert cli.main(["eval", "--pred", str(tmp_path / "pred"), "--gt", str(data), "--out",
                     str(tmp_path / "r.json")]) == 0
    report = json.loads((tmp_path / "r.json").read_text())
    assert 0 <= report["ods"] <= 1 and len(report["thresholds"]) == 99


def test_cli_train_from_folder(tmp_path):
    data = tmp_path / "data"
    for s in synth_dataset(2, 32, 32):
        save_sample(data, s)
    cfg = SMALL.replace(network=dataclasses.replace(SMALL.network, image_size=64))
    assert cli.main(["train", "--config", write_config(tmp_path / "c.json", cfg), "--data", str(data),
                     "--out", str(tmp_path / "m.ckpt"), "--steps", "1"]) == 0
    assert checkpoint.load(tmp_path / "m.ckpt").cfg.image_size == 32


def test_cli_zero_steps_checkpoint_is_init(tmp_path):
    ckpt = tmp_path / "m.ckpt"
    assert cli.main(["train", "--config", write_config(tmp_path / "c.json"), "--synthetic", "1",
                     "--steps", "0", "--out", str(ckpt)]) == 0
    loaded = checkpoint.load(ckpt)
    fresh = CrackSegNet(SMALL.network, seed=SMALL.seed)
    assert all(np.array_equal(a.data, b.data) for a, b in zip(loaded.parameters(), fresh.parameters()))


def test_cli_infer_single_and_untrained_range(tmp_path):
    ckpt = tmp_path / "m.ckpt"
    checkpoint.save(ckpt, CrackSegNet(SMALL.network, seed=0))
    img = synth_dataset(1, 32, 32)[0]
    save_sample(tmp_path / "d", img)
    src = tmp_path / "d" / "image" / f"{img.id}.png"
    out = tmp_path / "p.png"
    assert cli.main(["infer", "--ckpt", str(ckpt), "--input", str(src), "--out", str(out)]) == 0
    from PIL import Image
    arr = np.asarray(Image.open(out))
    assert arr.shape == (32, 32) and arr.min() > 0 and arr.max() < 255


def test_cli_infer_bad_size(tmp_path, capsys):
    ckpt = tmp_path / "m.ckpt"
    checkpoint.save(ckpt, CrackSegNet(SMALL.network, seed=0))
    write_png(tmp_path / "odd.png", np.zeros((20, 32, 3), np.uint8))
    code = cli.main(["infer", "--ckpt", str(ckpt), "--input", str(tmp_path / "odd.png"), "--out", str(tmp_path / "o.png")])
    assert code == 2 and "multiple of the patch size 8" in capsys.readouterr().err


def test_cli_eval_identity_and_errors(tmp_path):
    data = tmp_path / "data"
    for s in synth_dataset(2, 16, 16):
        save_sample(data, s)
    out = tmp_path / "r.json"
    assert cli.main(["eval", "--pred", str(data / "mask"), "--gt", str(data), "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert all(rep[k] == 1.0 for k in ("ods", "ois", "precision", "recall", "f1", "miou"))

    other = tmp_path / "other"
    write_png(other / "zzz.png", np.zeros((16, 16), np.uint8))
    assert cli.main(["eval", "--pred", str(other), "--gt", str(data), "--out", str(out)]) == 2
    write_png(other / "synth_00000.png", np.zeros((16, 16), np.uint8))
    assert cli.main(["eval", "--pred", str(other), "--gt", str(data), "--out", str(out)]) == 2


def test_cli_count(tmp_path, capsys):
    assert cli.main(["count", "--config", write_config(tmp_path / "c.json"), "--input-size", "64"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["params"] == CrackSegNet(SMALL.network).num_parameters()
    assert cli.main(["count", "--config", str(tmp_path / "c.json"), "--input-size", "30"]) == 2


def test_cli_rejects_unknown_config_key(tmp_path):
    bad = tmp_path / "c.json"
    bad.write_text(json.dumps({"network": {"width": 3}}))
    assert cli.main(["count", "--config", str(bad)]) == 2
