import json

import numpy as np
import pytest

from dfmnet import cli, kernels
from dfmnet.images import save_gray, save_rgb
from dfmnet.quality import synthetic_pair


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


@pytest.fixture(scope="module")
def weight_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("w") / "w.dfmw"
    assert cli.main(["init-weights", "--seed", "3", "--out", str(path)]) == 0
    return path


@pytest.fixture
def scene(tmp_path):
    rgb, depth = synthetic_pair(1, size=96)
    save_rgb(rgb, tmp_path / "rgb.png")
    save_gray(depth, tmp_path / "depth.png")
    save_gray((depth > 100).astype(np.uint8) * 255, tmp_path / "gt.png")
    return tmp_path


def test_init_and_inspect(capsys, weight_file):
    code, out = run(capsys, "inspect", str(weight_file), "--entries")
    assert code == 0 and out["manifest_complete"]
    assert 0.80 <= out["stats"]["tdb_mb"] <= 1.00
    assert out["stats"]["file_bytes"] == weight_file.stat().st_size
    assert len(out["tensors"]) == out["entries"]


def test_infer_outputs(capsys, weight_file, scene):
    code, out = run(capsys, "infer", "--rgb", str(scene / "rgb.png"), "--depth", str(scene / "depth.png"),
                    "--weights", str(weight_file), "--out", str(scene / "s.png"),
                    "--save-coarse", str(scene / "c.png"), "--save-alpha", str(scene / "a.json"),
                    "--save-beta", str(scene / "betas"), "--gt", str(scene / "gt.png"))
    assert code == 0
    assert (scene / "s.png").exists() and (scene / "c.png").exists()
    assert len(out["alpha"]) == 5 and all(0 < a < 1 for a in out["alpha"])
    assert json.loads((scene / "a.json").read_text())["alpha"] == out["alpha"]
    assert sorted(p.name for p in (scene / "betas").iterdir()) == [f"beta{i}.png" for i in range(1, 6)]
    assert set(out["metrics"]) == {"mae", "max_f"}


def test_infer_ablation_flags(capsys, weight_file, scene):
    code, out = run(capsys, "infer", "--rgb", str(scene / "rgb.png"), "--depth", str(scene / "depth.png"),
                    "--weights", str(weight_file), "--out", str(scene / "s.png"), "--no-dqw", "--no-dha",
                    "--dha-recalib", "0", "--backend", "python")
    assert code == 0 and out["alpha"] == [1.0] * 5 and out["config"]["use_dha"] is False


def test_exit_codes(capsys, tmp_path, weight_file, scene):
    base = ["infer", "--rgb", str(scene / "rgb.png"), "--depth", str(scene / "depth.png"), "--out",
            str(tmp_path / "o.png")]
    assert cli.main(base[:2] + [str(tmp_path / "none.png")] + base[3:] + ["--weights", str(weight_file)]) == 2
    bad = tmp_path / "bad.dfmw"
    bad.write_bytes(b"NOPE" + weight_file.read_bytes()[4:])
    assert cli.main(base + ["--weights", str(bad)]) == 3
    assert cli.main(base + ["--weights", str(weight_file), "--gating", "identical"]) == 3
    save_gray(np.zeros((20, 20), np.uint8), tmp_path / "gray.png")
    shape_case = ["infer", "--rgb", str(tmp_path / "gray.png")] + base[3:] + ["--weights", str(weight_file)]
    assert cli.main(shape_case) == 4
    assert cli.main(["infer"]) == 1
    assert cli.main(["quality"]) == 1
    capsys.readouterr()


def test_quality_single_and_corpus(capsys, tmp_path):
    for sub in ("rgb", "depth"):
        (tmp_path / sub).mkdir()
    for k in range(4):
        rgb, depth = synthetic_pair(k, size=64)
        save_rgb(rgb, tmp_path / "rgb" / f"{k}.png")
        save_gray(depth, tmp_path / "depth" / f"{k}.png")
    code, single = run(capsys, "quality", "--rgb", str(tmp_path / "rgb" / "0.png"),
                       "--depth", str(tmp_path / "depth" / "0.png"))
    assert code == 0 and len(single["dice_per_scale"]) == 3
    code, corpus = run(capsys, "quality", "--dir", str(tmp_path), "--mismatch-seed", "2")
    assert code == 0 and corpus["pairs"] == 4 and corpus["mismatch_seed"] == 2
    save_gray(np.zeros((8, 8), np.uint8), tmp_path / "depth" / "extra.png")
    assert cli.main(["quality", "--rgb-dir", str(tmp_path / "rgb"), "--depth-dir", str(tmp_path / "depth")]) == 2


def test_bench_small(capsys):
    before = kernels.backend_name()
    code, out = run(capsys, "bench", "--runs", "2", "--warmup", "1", "--backend", "all")
    assert code == 0
    assert out["protocol"]["runs"] == 2 and out["protocol"]["warmup"] == 1
    assert [r["backend"] for r in out["results"]] == kernels.available_backends()
    assert out["mean_ms"] > 0
    assert kernels.backend_name() == before
    assert cli.main(["bench", "--runs", "0"]) == 1
