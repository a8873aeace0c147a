from __future__ import annotations

import hashlib
import json
from pathlib import Path

import pandas as pd

from . import __version__
from .corpus import Corpus, corpus_fingerprint
from .model import Recommendation, TrainedModel
from .models import EvalReport, RunConfig

MANIFEST_FILE = "run_manifest.json"
INPUT_FIELDS = ("songs", "playlists", "users", "genres", "embeddings", "model_path")
INPUT_DIRS = ("split_dir", "features_dir")


def write_report(report: EvalReport, outdir: str) -> list[str]:
    """Write report.txt (key=value), report.json and curves.csv for one evaluation."""
    p = Path(outdir)
    p.mkdir(parents=True, exist_ok=True)

    lines = [
        f"method={report.method.value}",
        f"setting={report.setting.value}",
        f"n_test_playlists={report.n_test_playlists}",
        f"auc={report.auc!r}",
    ]
    lines += [f"hitrate@{K}={v!r}" for K, v in sorted(report.hitrate.items())]
    lines += [f"novelty@{K}={v!r}" for K, v in sorted(report.novelty.items())]
    lines.append(f"spread={report.spread!r}")
    (p / "report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    (p / "report.json").write_text(json.dumps(report.model_dump(mode="json"), indent=2), encoding="utf-8")

    curves = pd.DataFrame(
        {
            "K": sorted(report.hitrate),
            "hitrate": [report.hitrate[K] for K in sorted(report.hitrate)],
            "novelty": [report.novelty[K] for K in sorted(report.hitrate)],
        }
    )
    curves.to_csv(p / "curves.csv", index=False)
    return ["report.txt", "report.json", "curves.csv"]


def write_training_summary(model: TrainedModel, outdir: str) -> list[str]:
    p = Path(outdir)
    p.mkdir(parents=True, exist_ok=True)
    summary = {
        "hp": model.hp.model_dump(),
        "schema_hash": model.schema_hash,
        "dim": model.theta.dim,
        **model.summary,
    }
    (p / "training_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True), encoding="utf-8")
    return ["training_summary.json"]


def write_recommendations(rec: Recommendation, corpus: Corpus, outdir: str) -> list[str]:
    p = Path(outdir)
    p.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame(
        {
            "rank": range(1, rec.songs.size + 1),
            "song_id": [corpus.song_ids[m] for m in rec.songs],
            "artist_id": [corpus.artist_ids[corpus.song_artist[m]] for m in rec.songs],
            "score": rec.scores,
        }
    )
    df.to_csv(p / "recommendations.csv", index=False)
    return ["recommendations.csv"]


def file_sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def input_hashes(cfg: RunConfig) -> dict[str, str]:
    """SHA-256 of every input file the run read, keyed by path."""
    hashes: dict[str, str] = {}
    for name in INPUT_FIELDS:
        value = getattr(cfg, name)
        if value and Path(value).is_file():
            hashes[value] = file_sha256(Path(value))
    for name in INPUT_DIRS:
        value = getattr(cfg, name)
        if value and Path(value).is_dir():
            for f in sorted(Path(value).iterdir()):
                if f.is_file() and f.name != MANIFEST_FILE:
                    hashes[str(f)] = file_sha256(f)
    return hashes


def write_manifest(cfg: RunConfig, outdir: str, output_files: list[str], corpus: Corpus | None = None) -> Path:
    """run_manifest.json: enough to re-run the command bit-identically (no timestamps).

    With a corpus the manifest also records its fingerprint, which is
    independent of row order and formatting of the input files.
    """
    p = Path(outdir)
    p.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": cfg.command,
        "version": __version__,
        "config": cfg.model_dump(mode="json"),
        "inputs": input_hashes(cfg),
        "output_files": output_files,
    }
    if corpus is not None:
        manifest["corpus_fingerprint"] = corpus_fingerprint(corpus)
    path = p / MANIFEST_FILE
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    return path
