"""Seeded synthetic corpora with a planted multitask linear model."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .corpus import Corpus, build_corpus
from .features import FeatureMatrix
from .losses import ModelParams
from .models import ColumnOrigin, ColumnSpec, FeatureSchema, Setting, SyntheticSpec

ALPHA_NOISE = 0.3
BETA_SCALE = 0.3
MU_SCALE = 0.5
ATTR_NOISE = 0.1
YEARS = (1990, 2016)


@dataclass(frozen=True, eq=False)
class SyntheticData:
    corpus: Corpus
    features: FeatureMatrix
    planted: ModelParams


def generate_synthetic(spec: SyntheticSpec) -> SyntheticData:
    """Draw users in taste groups, score songs with the planted weights and let
    every playlist hold its top-L songs, with each member swapped for a random
    non-member with probability `noise`. Songs no playlist picked are dropped."""
    rng = np.random.default_rng(spec.seed)
    U, N, M, D, L = spec.n_users, spec.n_playlists, spec.n_songs, spec.dim, spec.playlist_size

    content = rng.standard_normal((M, D - 1))
    X = np.hstack([content, np.ones((M, 1))])

    centroids = rng.standard_normal((spec.n_taste_groups, D))
    group = rng.integers(spec.n_taste_groups, size=U)
    alpha = centroids[group] + ALPHA_NOISE * rng.standard_normal((U, D))
    beta = BETA_SCALE * rng.standard_normal((N, D))
    mu = MU_SCALE * rng.standard_normal(D)

    owner = np.concatenate([np.arange(U), rng.integers(U, size=N - U)])
    planted_scores = (alpha[owner] + beta + mu) @ X.T
    members = []
    for i in range(N):
        top = np.argsort(-planted_scores[i], kind="stable")[:L]
        chosen = set(top.tolist())
        for m in top:
            if rng.random() < spec.noise:
                outside = np.setdiff1d(np.arange(M), np.fromiter(chosen, dtype=np.int64))
                chosen.discard(int(m))
                chosen.add(int(rng.choice(outside)))
        members.append(np.sort(np.fromiter(chosen, dtype=np.int64)))

    projection = rng.standard_normal((D, spec.attr_dim)) / np.sqrt(D)
    attrs = alpha @ projection + ATTR_NOISE * rng.standard_normal((U, spec.attr_dim))
    n_artists = spec.n_artists or max(1, M // 5)
    artist = rng.integers(n_artists, size=M)
    year = rng.integers(YEARS[0], YEARS[1], size=M)

    used = np.zeros(M, dtype=bool)
    for m in members:
        used[m] = True
    kept = np.flatnonzero(used)
    new_index = np.full(M, -1)
    new_index[kept] = np.arange(kept.size)

    width = len(str(M))
    songs = pd.DataFrame(
        {
            "song_id": [f"s{m:0{width}d}" for m in range(kept.size)],
            "artist_id": [f"a{a:0{width}d}" for a in artist[kept]],
            "release_year": year[kept],
        }
    )
    for j in range(D - 1):
        songs[f"f{j}"] = content[kept, j]
    song_ids = songs["song_id"].tolist()
    playlists = pd.DataFrame(
        {
            "playlist_id": [f"p{i:0{len(str(N))}d}" for i in range(N)],
            "user_id": [f"u{u:0{len(str(U))}d}" for u in owner],
            "songs": [[song_ids[new_index[m]] for m in mem] for mem in members],
            "line": [None] * N,
        }
    )
    users = pd.DataFrame({"user_id": [f"u{u:0{len(str(U))}d}" for u in range(U)]})
    for j in range(spec.attr_dim):
        users[f"attr{j}"] = attrs[:, j]

    corpus = build_corpus(songs, playlists, users)
    columns = [ColumnSpec(name=f"f{j}", origin=ColumnOrigin.METADATA) for j in range(D - 1)]
    columns.append(ColumnSpec(name="bias", origin=ColumnOrigin.BIAS))
    features = FeatureMatrix(X[kept], FeatureSchema(setting=Setting.COLD_PLAYLISTS, columns=columns))
    return SyntheticData(corpus=corpus, features=features, planted=ModelParams(alpha, beta, mu))


def write_synthetic(data: SyntheticData, outdir: str) -> dict[str, Path]:
    """Write songs/playlists/users files in the ingestion formats."""
    p = Path(outdir)
    p.mkdir(parents=True, exist_ok=True)
    corpus = data.corpus
    meta_cols = list(corpus.metadata.columns)
    meta = corpus.metadata.to_numpy()

    song_lines = [",".join(["song_id", "artist_id", "release_year", *meta_cols])]
    for m, sid in enumerate(corpus.song_ids):
        values = [repr(float(v)) for v in meta[m]]
        song_lines.append(",".join([sid, corpus.artist_ids[corpus.song_artist[m]], str(int(corpus.release_year[m])), *values]))

    playlist_lines = ["playlist_id,user_id,songs"]
    for i, pid in enumerate(corpus.playlist_ids):
        songs = ";".join(corpus.song_ids[m] for m in corpus.playlist_members[i])
        playlist_lines.append(f"{pid},{corpus.user_ids[corpus.playlist_owner[i]]},{songs}")

    user_lines = [",".join(["user_id", *corpus.attribute_names])]
    for u, uid in enumerate(corpus.user_ids):
        user_lines.append(",".join([uid, *(repr(float(v)) for v in corpus.user_attributes[u])]))

    paths = {"songs": p / "songs.csv", "playlists": p / "playlists.csv", "users": p / "users.csv"}
    for key, lines in (("songs", song_lines), ("playlists", playlist_lines), ("users", user_lines)):
        paths[key].write_text("\n".join(lines) + "\n", encoding="utf-8")
    return paths
