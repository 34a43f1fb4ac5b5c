import json
import pathlib

import numpy as np
import pytest

from texsyn import channel_texture, save_texture
from texsyn.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, load_config, main
from texsyn.errors import ConfigError

REPO_CONFIGS = sorted(
    (pathlib.Path(__file__).resolve().parent.parent / "configs").glob("*.json")
)


def desk_config(tmp_path, *, epochs=6, seed=11, count=3, mode="SAGAN"):
    ti_path = tmp_path / "ti.png"
    save_texture(channel_texture((64, 64), seed=42), ti_path)
    cfg = {
        "mode": mode,
        "ti_paths": [str(ti_path)],
        "out_dir": str(tmp_path / "run"),
        "generator": {
            "lattice_dims": [8, 8],
            "filters": [8, 4, 4],
            "kernel": 5,
            "stride": 2,
            "latent_mode": "direct",
        },
        "discriminator": {
            "input_dims": [34, 34] if mode == "SAGAN" else [64, 64],
            "filters": [4, 8],
            "kernel": 5,
            "stride": 2,
        },
        "training": {
            "batch_size": 8,
            "epochs": epochs,
            "rng_seed": seed,
            "checkpoint_every": 100,
            **({"segment": [34, 34], "overlap": [4, 4]} if mode == "SAGAN" else {}),
        },
        "synthesis": {"output_dims": [64, 64], "count": count},
        "metrics": {"max_lag": 8},
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg, indent=2))
    return path, cfg


@pytest.mark.parametrize("config_path", REPO_CONFIGS, ids=lambda p: p.stem)
def test_repo_configs_validate(config_path):
    assert main(["validate-config", "--config", str(config_path)]) == EXIT_OK


def test_validate_rejects_bad_tiling(tmp_path):
    path, cfg = desk_config(tmp_path)
    cfg["training"]["segment"] = [67, 67]
    cfg["training"]["overlap"] = [3, 3]
    cfg["generator"]["lattice_dims"] = [32, 32]
    cfg["discriminator"]["input_dims"] = [67, 67]
    path.write_text(json.dumps(cfg))
    code = main(["validate-config", "--config", str(path)])
    assert code == EXIT_CONFIG
    with pytest.raises(ConfigError, match=r"c\*67 - \(c-1\)\*3"):
        load_config(path)


def test_validate_names_offending_key(tmp_path):
    path, cfg = desk_config(tmp_path)
    cfg["discriminator"]["input_dims"] = [30, 30]
    path.write_text(json.dumps(cfg))
    with pytest.raises(ConfigError, match="discriminator.input_dims"):
        load_config(path)


def test_unknown_subcommand_exits_2(capsys):
    assert main(["frobnicate", "--config", "x.json"]) == EXIT_CONFIG


def test_missing_config_file(tmp_path):
    assert main(["validate-config", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG


def test_train_writes_history_and_checkpoints(tmp_path, capsys):
    path, cfg = desk_config(tmp_path, epochs=6)
    assert main(["train", "--config", str(path)]) == EXIT_OK
    out = tmp_path / "run"
    lines = (out / "loss_history.csv").read_text().strip().splitlines()
    assert lines[0] == "step,j_d,j_g,d_real_mean,d_fake_mean"
    assert len(lines) == 1 + 6  # header + one row per step
    assert (out / "checkpoint_000006.ckpt").exists()


def test_generate_and_evaluate_pipeline(tmp_path):
    path, cfg = desk_config(tmp_path, epochs=4, count=3)
    assert main(["train", "--config", str(path)]) == EXIT_OK
    assert main(["generate", "--config", str(path)]) == EXIT_OK
    real_dir = tmp_path / "run" / "realizations"
    files = sorted(real_dir.glob("real_*.png"))
    assert [f.name for f in files] == ["real_0000.png", "real_0001.png", "real_0002.png"]
    assert main(["evaluate", "--config", str(path)]) == EXIT_OK
    eval_dir = tmp_path / "run" / "eval"
    for name in ("realizations_s2.csv", "realizations_c2.csv", "tis_s2.csv",
                 "tis_c2.csv", "summary.json"):
        assert (eval_dir / name).exists()
    summary = json.loads((eval_dir / "summary.json").read_text())
    assert summary["n_realizations"] == 3 and summary["n_tis"] == 1
    assert (eval_dir / "curves" / "real_0000_s2.csv").exists()


def test_generate_raw_flag(tmp_path):
    path, cfg = desk_config(tmp_path, epochs=4, count=2)
    assert main(["train", "--config", str(path)]) == EXIT_OK
    assert main(["generate", "--config", str(path), "--raw"]) == EXIT_OK
    raws = sorted((tmp_path / "run" / "realizations").glob("real_*.raw.npy"))
    assert len(raws) == 2
    arr = np.load(raws[0])
    assert arr.dtype == np.float32 and arr.min() >= -1.0 and arr.max() <= 1.0


def test_evaluate_empty_dir_exits_3(tmp_path):
    path, cfg = desk_config(tmp_path)
    (tmp_path / "run" / "realizations").mkdir(parents=True)
    assert main(["evaluate", "--config", str(path)]) == EXIT_RUNTIME


def test_seed_override_changes_results(tmp_path):
    path, cfg = desk_config(tmp_path, epochs=3)
    assert main(["train", "--config", str(path), "--out", str(tmp_path / "a"),
                 "--seed", "1"]) == EXIT_OK
    assert main(["train", "--config", str(path), "--out", str(tmp_path / "b"),
                 "--seed", "2"]) == EXIT_OK
    assert main(["train", "--config", str(path), "--out", str(tmp_path / "c"),
                 "--seed", "1"]) == EXIT_OK
    rows = lambda d: (d / "loss_history.csv").read_text()
    assert rows(tmp_path / "a") != rows(tmp_path / "b")
    assert rows(tmp_path / "a") == rows(tmp_path / "c")


def test_dcgan_mode_end_to_end(tmp_path):
    path, cfg = desk_config(tmp_path, epochs=3, mode="DCGAN")
    assert main(["train", "--config", str(path)]) == EXIT_OK
    assert main(["generate", "--config", str(path)]) == EXIT_OK
    assert len(list((tmp_path / "run" / "realizations").glob("*.png"))) == 3
