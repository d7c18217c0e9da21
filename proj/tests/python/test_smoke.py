import json
import math
import os
import subprocess

import numpy as np
import pytest

mb = pytest.importorskip("motionbeat")


def test_kernels():
    assert mb.soft_dtw([1.0], [1.0])["value"] == 0.0
    assert mb.hard_dtw([0.0, 2.0], [0.0, 0.0]) == 4.0
    r = mb.emd_1d([0.5, 0.5, 0.0], [0.0, 0.5, 0.5])
    assert r["value"] == pytest.approx(1.0)
    assert len(r["grad_a"]) == 3


def test_grid_and_bar_mass():
    g = mb.build_beat_grid(120.0, 4, 8, 0)
    assert g.boundaries == pytest.approx([0.5 * i for i in range(9)])
    assert mb.bar_mass([1.0, 2.0, 3.0, 4.0, 0.0, 0.0, 0.0, 0.0], g) == [
        pytest.approx([0.1, 0.2, 0.3, 0.4]),
        [0.25] * 4,
    ]
    with pytest.raises(ValueError):
        mb.build_beat_grid(0.0, 4, 8, 0)


def test_attention_and_rotation():
    assert mb.bar_phase(2, 4) == pytest.approx(math.pi)
    x, y = mb.phase_rotate([1.0, 0.0], math.pi / 2)
    assert abs(x) < 1e-12 and y == pytest.approx(1.0)
    z = np.zeros((2, 2))
    _, weights = mb.contact_attention(z, z, np.eye(2), [0.0, 1.0], 1.0, 0.0)
    assert weights[0] == pytest.approx([0.2689, 0.7311], abs=1e-4)


def test_losses_and_metrics():
    eye = np.eye(2)
    assert mb.info_nce(eye, eye, 1.0) == pytest.approx(math.log(1 + math.exp(-1)), abs=1e-9)
    assert mb.total_loss(1.0, 0.5, 0.2) == pytest.approx(1.1)
    rng = np.random.default_rng(0)
    z = rng.normal(size=(12, 8))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    rep = mb.eval_retrieval(z, z)
    assert rep["recall_at"][1] == 100.0 and rep["median_rank"] == 1.0
    assert mb.beat_alignment_score([1.0, 2.0], [1.0, 2.0]) == 1.0


def test_end_to_end(tmp_path):
    data = tmp_path / "d.jsonl"
    mb.generate_dataset(json.dumps({"seed": 2, "num_beats": 8}), 16, str(data))
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"preset": "tiny", "max_epochs": 1, "batch_size": 8}))
    code, out, err = mb.run_cli(["train", "--config", str(cfg), "--data", str(data), "--out", str(tmp_path / "run")])
    assert code == 0, err
    audio, motion = mb.embed(str(tmp_path / "run" / "checkpoint.bin"), str(data))
    assert audio.shape == motion.shape == (16, 32)
    assert np.allclose(np.linalg.norm(audio, axis=1), 1.0)


@pytest.mark.skipif("MOTIONBEAT_CLI" not in os.environ, reason="CLI path not provided")
def test_cli_binary(tmp_path):
    cli = os.environ["MOTIONBEAT_CLI"]
    ok = subprocess.run([cli, "grad-check", "--kernel", "softdtw", "--json"], capture_output=True, text=True)
    assert ok.returncode == 0
    assert json.loads(ok.stdout)["max_rel_error"] < 1e-4
    missing = subprocess.run([cli, "train", "--config", str(tmp_path / "nope.json")], capture_output=True, text=True)
    assert missing.returncode == 1
    assert "nope.json" in missing.stderr
