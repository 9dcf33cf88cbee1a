import json

import numpy as np
import pytest

from phaseret.cli import main
from phaseret.images import load_image, save_pgm, synthetic_image
from phaseret.noise import PhaselessData


@pytest.fixture
def workspace(tmp_path):
    img_dir = tmp_path / "images"
    img_dir.mkdir()
    for i, kind in enumerate(("blobs", "boxes")):
        save_pgm(img_dir / f"{kind}.pgm", synthetic_image(kind, size=16, seed=i))
    cfg = {
        "operator": {"type": "cdp", "shape": [16, 16], "K": 4, "seed": 3},
        "images": ["images/blobs.pgm", "images/boxes.pgm"],
        "alphas": [9.0],
        "algorithms": [
            {"method": "hio", "iters": 50},
            {"method": "prdeep", "denoiser": "tv", "iters": 25, "sigmas": [40.0, 20.0]},
        ],
        "seed": 7,
    }
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(cfg))
    return tmp_path, cfg_path


def test_dump_defaults(capsys):
    assert main(["--dump-defaults"]) == 0
    out = capsys.readouterr().out
    parsed = json.loads(out)
    assert parsed["operator"]["type"] == "cdp"
    assert "seed" in parsed


def test_make_images(tmp_path, capsys):
    out = tmp_path / "imgs"
    assert main(["make-images", "--out", str(out), "--size", "24"]) == 0
    files = sorted(p.name for p in out.glob("*.pgm"))
    assert files == ["blobs.pgm", "boxes.pgm", "cells.pgm", "scene.pgm"]
    img = load_image(out / "blobs.pgm")
    assert img.shape == (24, 24)


def test_simulate_then_recover(workspace, capsys):
    tmp_path, cfg_path = workspace
    data_dir = tmp_path / "data"
    assert main(["simulate", "--config", str(cfg_path), "--out", str(data_dir)]) == 0
    files = sorted(p.name for p in data_dir.glob("*.pryd"))
    assert files == ["blobs__alpha9.pryd", "boxes__alpha9.pryd"]
    data = PhaselessData.load(data_dir / files[0])
    assert data.alpha == 9.0
    assert data.y.size == 4 * 16 * 16

    out_dir = tmp_path / "recon"
    assert main([
        "recover", "--config", str(cfg_path), "--algo", "hio",
        "--in", str(data_dir), "--out", str(out_dir),
    ]) == 0
    assert (out_dir / "blobs__alpha9__hio.pgm").exists()
    assert (out_dir / "recover_metrics.csv").exists()

    # unknown algorithm label is a usage error
    assert main([
        "recover", "--config", str(cfg_path), "--algo", "nope",
        "--in", str(data_dir), "--out", str(out_dir),
    ]) == 2


def test_bench_writes_csv(workspace, capsys):
    tmp_path, cfg_path = workspace
    out_csv = tmp_path / "run" / "results.csv"
    out_csv.parent.mkdir()
    assert main(["bench", "--config", str(cfg_path), "--out", str(out_csv)]) == 0
    lines = out_csv.read_text().splitlines()
    assert lines[0] == "image,algorithm,alpha,psnr,runtime_s,residual,seed,error"
    assert len(lines) == 1 + 2 * 1 * 2


def test_denoise_test_roundtrip(tmp_path, capsys):
    noisy_path = tmp_path / "noisy.pgm"
    rng = np.random.default_rng(1)
    clean = synthetic_image("boxes", size=32, seed=3)
    save_pgm(noisy_path, clean + rng.normal(0, 20, clean.shape))
    out_path = tmp_path / "out.pgm"
    assert main([
        "denoise-test", "--denoiser", "tv", "--sigma", "20",
        "--in", str(noisy_path), "--out", str(out_path),
    ]) == 0
    noisy = load_image(noisy_path)
    out = load_image(out_path)
    assert np.mean((out - clean) ** 2) < np.mean((noisy - clean) ** 2)


def test_no_command_prints_help(capsys):
    assert main([]) == 1
    assert "simulate" in capsys.readouterr().out
