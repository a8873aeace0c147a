import json

import pandas as pd
import pytest
from typer.testing import CliRunner

from coldstart_playlist_lab.cli import app

runner = CliRunner()


def _ok(args):
    result = runner.invoke(app, args)
    assert result.exit_code == 0, result.output
    return result


@pytest.fixture
def workspace(tmp_path):
    data = tmp_path / "data"
    _ok(
        [
            "synth",
            "--n-users", "10",
            "--n-playlists", "60",
            "--n-songs", "80",
            "--dim", "5",
            "--playlist-size", "8",
            "--noise", "0",
            "--seed", "1",
            "--out", str(data),
        ]
    )
    corpus_args = [
        "--songs", str(data / "songs.csv"),
        "--playlists", str(data / "playlists.csv"),
        "--users", str(data / "users.csv"),
    ]
    split_dir = tmp_path / "split"
    _ok(["split", *corpus_args, "--setting", "cold_playlists", "--min-song-support", "1", "--out", str(split_dir)])
    return tmp_path, corpus_args, split_dir


def test_synth_and_split_outputs(workspace):
    _, _, split_dir = workspace
    meta = json.loads((split_dir / "split.json").read_text(encoding="utf-8"))
    assert meta["setting"] == "cold_playlists"
    assert meta["n_test_playlists"] > 0
    manifest = json.loads((split_dir / "run_manifest.json").read_text(encoding="utf-8"))
    assert manifest["command"] == "split"
    assert "split.json" in manifest["output_files"]
    # the generated corpus and the corpus read back from its files are the same
    synth = json.loads((split_dir.parent / "data" / "run_manifest.json").read_text(encoding="utf-8"))
    assert synth["corpus_fingerprint"] == manifest["corpus_fingerprint"]


def test_eval_is_reproducible_from_manifest(workspace):
    tmp_path, corpus_args, split_dir = workspace
    out1, out2 = tmp_path / "eval1", tmp_path / "eval2"
    args = ["eval", *corpus_args, "--split-dir", str(split_dir), "--topk", "5,10"]
    _ok([*args, "--out", str(out1)])
    _ok([*args, "--out", str(out2)])

    report = (out1 / "report.json").read_bytes()
    assert "auc" in json.loads(report)
    assert (out2 / "report.json").read_bytes() == report
    assert "auc=" in (out1 / "report.txt").read_text(encoding="utf-8")

    _ok(["run-config", "--config", str(out1 / "run_manifest.json")])
    assert (out1 / "report.json").read_bytes() == report


def test_train_then_eval_with_saved_model(workspace):
    tmp_path, corpus_args, split_dir = workspace
    model_dir = tmp_path / "model"
    _ok(["train", *corpus_args, "--split-dir", str(split_dir), "--max-iters", "30", "--out", str(model_dir)])
    summary = json.loads((model_dir / "training_summary.json").read_text(encoding="utf-8"))
    assert summary["iterations"] <= 30

    _ok(["eval", *corpus_args, "--split-dir", str(split_dir), "--model", str(model_dir / "model.bin"), "--out", str(tmp_path / "ev")])
    assert (tmp_path / "ev" / "curves.csv").exists()


def test_recommend_for_a_user(workspace):
    tmp_path, corpus_args, split_dir = workspace
    out = tmp_path / "rec"
    _ok(
        [
            "recommend", *corpus_args,
            "--split-dir", str(split_dir),
            "--method", "poprank",
            "--user", "u00",
            "--k", "5",
            "--out", str(out),
        ]
    )
    df = pd.read_csv(out / "recommendations.csv")
    assert df["rank"].tolist() == [1, 2, 3, 4, 5]
    assert df["score"].is_monotonic_decreasing


def test_missing_input_file_exits_with_data_error(tmp_path):
    missing = tmp_path / "missing_playlists.csv"
    songs = tmp_path / "songs.csv"
    songs.write_text("song_id,artist_id,release_year\ns1,a1,2000\n", encoding="utf-8")
    result = runner.invoke(app, ["eval", "--songs", str(songs), "--playlists", str(missing), "--method", "poprank", "--out", str(tmp_path / "o")])
    assert result.exit_code == 2
    assert str(missing) in result.output


def test_invalid_hyperparameter_exits_with_config_error(workspace):
    tmp_path, corpus_args, split_dir = workspace
    result = runner.invoke(app, ["eval", *corpus_args, "--split-dir", str(split_dir), "--p", "-1", "--out", str(tmp_path / "o")])
    assert result.exit_code == 1


def test_split_dir_for_another_setting_is_rejected(workspace):
    tmp_path, corpus_args, split_dir = workspace
    result = runner.invoke(
        app,
        ["eval", *corpus_args, "--split-dir", str(split_dir), "--setting", "cold_users", "--method", "poprank", "--out", str(tmp_path / "o")],
    )
    assert result.exit_code == 1
    assert "cold_playlists" in result.output


def test_init_config_creates_file(tmp_path):
    target = tmp_path / "cfg.yaml"
    _ok(["init-config", "--output", str(target)])
    assert target.exists()
    result = runner.invoke(app, ["init-config", "--output", str(target)])
    assert result.exit_code != 0
