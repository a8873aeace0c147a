import json

import numpy as np
import pandas as pd

from coldstart_playlist_lab.corpus import corpus_fingerprint
from coldstart_playlist_lab.model import recommend
from coldstart_playlist_lab.models import EvalReport, Method, RunConfig, Setting
from coldstart_playlist_lab.reporting import write_manifest, write_recommendations, write_report


def _report():
    return EvalReport(
        method=Method.POPRANK,
        setting=Setting.COLD_USERS,
        n_test_playlists=2,
        auc=0.75,
        hitrate={5: 0.5, 10: 1.0},
        novelty={5: 3.0, 10: 2.5},
        spread=1.25,
        per_playlist_auc=[0.5, 1.0],
    )


def test_write_report_files(tmp_path):
    written = write_report(_report(), str(tmp_path))
    assert written == ["report.txt", "report.json", "curves.csv"]

    lines = (tmp_path / "report.txt").read_text(encoding="utf-8").splitlines()
    assert lines == [
        "method=poprank",
        "setting=cold_users",
        "n_test_playlists=2",
        "auc=0.75",
        "hitrate@5=0.5",
        "hitrate@10=1.0",
        "novelty@5=3.0",
        "novelty@10=2.5",
        "spread=1.25",
    ]
    doc = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
    assert doc["auc"] == 0.75 and doc["hitrate"] == {"5": 0.5, "10": 1.0}

    curves = pd.read_csv(tmp_path / "curves.csv")
    assert curves["K"].tolist() == [5, 10]
    assert curves["novelty"].tolist() == [3.0, 2.5]


def test_recommendations_csv(tmp_path, tiny):
    rec = recommend(np.array([0.1, 0.9, 0.5]), 2, candidates=np.array([0, 2, 4]))
    write_recommendations(rec, tiny, str(tmp_path))
    df = pd.read_csv(tmp_path / "recommendations.csv")
    assert df["rank"].tolist() == [1, 2]
    assert df["song_id"].tolist() == ["s3", "s5"]
    assert df["artist_id"].tolist() == ["a2", "a3"]


def test_manifest_hashes_inputs_without_timestamps(tmp_path, tiny_paths):
    cfg = RunConfig(command="eval", songs=tiny_paths["songs"], playlists=tiny_paths["playlists"], out=str(tmp_path / "out"))
    path = write_manifest(cfg, cfg.out, ["report.txt"])
    first = path.read_bytes()
    doc = json.loads(first)
    assert set(doc) == {"command", "version", "config", "inputs", "output_files"}
    assert set(doc["inputs"]) == {tiny_paths["songs"], tiny_paths["playlists"]}
    assert doc["config"]["songs"] == tiny_paths["songs"]

    write_manifest(cfg, cfg.out, ["report.txt"])
    assert path.read_bytes() == first


def test_manifest_records_corpus_fingerprint(tmp_path, tiny_paths, tiny):
    cfg = RunConfig(command="split", songs=tiny_paths["songs"], playlists=tiny_paths["playlists"], out=str(tmp_path / "out"))
    doc = json.loads(write_manifest(cfg, cfg.out, ["split.json"], tiny).read_text(encoding="utf-8"))
    assert doc["corpus_fingerprint"] == corpus_fingerprint(tiny)
    assert len(doc["corpus_fingerprint"]) == 64
