import numpy as np
import pytest

import genrec


def test_preset_parameter_counts():
    gray = genrec.Architecture.preset("grayscale")
    assert genrec.param_count(gray) == 819712
    assert gray.layer_param_counts() == [131072, 524288, 131072, 32768, 512]
    assert genrec.param_count(genrec.Architecture.preset("rgb")) == 4852736
    with pytest.raises(ValueError):
        genrec.Architecture.preset("huge")


def test_generate_is_deterministic_and_bounded():
    arch = genrec.Architecture.preset("tiny")
    a = genrec.Weights.random(arch, genrec.Rng(3))
    b = genrec.Weights.random(arch, genrec.Rng(3))
    assert a == b
    z = np.array([0.1, -0.4, 1.2, 0.3])
    img = genrec.generate(a, z)
    assert img.shape == (1, 16, 16)
    assert np.all(np.abs(img) <= 1.0)
    assert np.array_equal(img, genrec.generate(b, z))


def test_weights_round_trip(tmp_path):
    w = genrec.Weights.random(genrec.Architecture.preset("tiny"), genrec.Rng(1))
    w.save(tmp_path / "w.bin")
    assert genrec.Weights.load(tmp_path / "w.bin") == w


def test_projections():
    rng = np.random.default_rng(0)
    z = rng.standard_normal((6, 9))
    low = genrec.project_rank(z, 2)
    assert np.linalg.matrix_rank(low, tol=1e-9) == 2
    s = np.linalg.svd(z, compute_uv=False)
    assert np.linalg.norm(low - z) == pytest.approx(np.sqrt(np.sum(s[2:] ** 2)), abs=1e-9)
    line = genrec.project_affine(z, 1)
    assert genrec.max_line_distance(line) < 1e-8 * np.linalg.norm(line)


def test_sequences_and_psnr():
    frames = genrec.make_sequence("color_wheel", 3, 16)
    assert len(frames) == 3 and frames[0].shape == (3, 16, 16)
    x = np.array([0.0, 1.0, 0.0, 1.0])
    assert genrec.psnr(x, x + np.array([0.1, -0.1, 0.1, -0.1])) == pytest.approx(20.0)


def test_run_experiment(tmp_path):
    out = genrec.run_experiment(
        {
            "kind": "rotating_sprite",
            "frames": "6",
            "size": "16",
            "arch": "tiny",
            "measure": "gaussian:32",
            "epochs": "10",
            "lr_z": "0.05",
            "lr_gamma": "0.005",
            "constraint": "affine(1)",
            "holdout": "3-4",
            "seed": "5",
            "output": str(tmp_path / "run"),
        }
    )
    assert out["z"].shape == (4, 6)
    assert len(out["residual_history"]) == 10
    assert out["holdout_psnr"] is not None
    assert (tmp_path / "run" / "weights.bin").exists()
