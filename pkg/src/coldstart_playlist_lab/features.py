from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .corpus import Corpus, playlist_song_matrix
from .errors import DataError, SchemaMismatchError
from .models import ColumnOrigin, ColumnSpec, FeatureSchema, Setting
from .parsers import EMBEDDING_FALLBACK, parse_embeddings, parse_genres

logger = logging.getLogger(__name__)

FEATURES_FILE = "features.npy"
SCHEMA_FILE = "features.schema.json"


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Dense song features x_m (one row per song) and their schema."""

    values: np.ndarray
    schema: FeatureSchema

    def __post_init__(self) -> None:
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] < 1:
            raise DataError("feature matrix must be 2-D with at least one column")
        if v.shape[1] != len(self.schema.columns):
            raise SchemaMismatchError(f"feature matrix has {v.shape[1]} columns, schema describes {len(self.schema.columns)}")
        if not np.isfinite(v).all():
            raise DataError("feature matrix contains non-finite entries")
        if not np.all(v[:, self.bias_column] == 1.0):
            raise DataError("bias column must be identically 1.0")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n_songs(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def bias_column(self) -> int:
        return [c.origin for c in self.schema.columns].index(ColumnOrigin.BIAS)

    def take(self, rows: np.ndarray) -> "FeatureMatrix":
        return FeatureMatrix(self.values[np.asarray(rows, dtype=np.int64)], self.schema)


def feature_row(X: FeatureMatrix, m: int) -> np.ndarray:
    if not 0 <= m < X.n_songs:
        raise IndexError(f"song index {m} out of range for {X.n_songs} songs")
    return X.values[m]


def build_features(
    corpus: Corpus,
    train_playlists: np.ndarray,
    genre_table: str | None = None,
    embeddings: str | None = None,
    setting: Setting = Setting.COLD_PLAYLISTS,
    train_songs: np.ndarray | None = None,
) -> FeatureMatrix:
    """Assemble X from metadata, genres, artist embeddings, popularity and bias.

    Only training playlists (restricted to `train_songs`) contribute
    playcounts, and standardisation statistics come from training songs only.
    """
    train_playlists = np.asarray(train_playlists, dtype=np.int64)
    if train_playlists.size == 0:
        raise DataError("cannot build features from an empty training set")
    if train_songs is None:
        train_songs = np.arange(corpus.n_songs)
    train_songs = np.asarray(train_songs, dtype=np.int64)

    blocks: list[np.ndarray] = []
    specs: list[tuple[str, ColumnOrigin, bool]] = []

    meta = corpus.metadata.to_numpy(dtype=np.float64)
    for j, name in enumerate(corpus.metadata.columns):
        col = meta[:, j].copy()
        known = col[train_songs][~np.isnan(col[train_songs])]
        if known.size == 0:
            raise DataError(f"metadata column {name!r} is missing for every training song")
        col[np.isnan(col)] = known.mean()
        blocks.append(col[:, None])
        specs.append((str(name), ColumnOrigin.METADATA, True))

    if genre_table:
        onehot, labels = _genre_onehot(corpus, genre_table, train_songs)
        blocks.append(onehot)
        specs.extend((f"genre={g}", ColumnOrigin.GENRE_ONEHOT, False) for g in labels)

    if embeddings:
        emb = _artist_embeddings(corpus, embeddings)
        blocks.append(emb)
        specs.extend((f"artist_emb_{j}", ColumnOrigin.ARTIST_EMBEDDING, True) for j in range(emb.shape[1]))

    playcount = playlist_song_matrix(corpus, train_playlists, train_songs).sum(axis=0).astype(np.float64)
    if setting != Setting.COLD_SONGS:
        blocks.append(playcount[:, None])
        specs.append(("song_popularity", ColumnOrigin.SONG_POPULARITY, True))

    artist_count = np.bincount(corpus.song_artist, weights=playcount, minlength=corpus.n_artists)
    blocks.append(artist_count[corpus.song_artist][:, None])
    specs.append(("artist_popularity", ColumnOrigin.ARTIST_POPULARITY, True))

    blocks.append(np.ones((corpus.n_songs, 1)))
    specs.append(("bias", ColumnOrigin.BIAS, False))

    raw = np.hstack(blocks)
    values = np.empty_like(raw)
    columns: list[ColumnSpec] = []
    for j, (name, origin, continuous) in enumerate(specs):
        center, scale, standardised = 0.0, 1.0, False
        if continuous:
            train_col = raw[train_songs, j]
            sd = float(train_col.std())
            if sd > 1e-12:
                center, scale, standardised = float(train_col.mean()), sd, True
        values[:, j] = (raw[:, j] - center) / scale if standardised else raw[:, j]
        columns.append(ColumnSpec(name=name, origin=origin, center=center, scale=scale, standardised=standardised))

    return FeatureMatrix(values, FeatureSchema(setting=setting, columns=columns))


def save_features(X: FeatureMatrix, outdir: str) -> Path:
    p = Path(outdir)
    p.mkdir(parents=True, exist_ok=True)
    np.save(p / FEATURES_FILE, X.values, allow_pickle=False)
    (p / SCHEMA_FILE).write_text(X.schema.model_dump_json(indent=2), encoding="utf-8")
    return p


def load_features(indir: str) -> FeatureMatrix:
    p = Path(indir)
    for name in (FEATURES_FILE, SCHEMA_FILE):
        if not (p / name).exists():
            raise DataError(f"file not found: {p / name}")
    schema = FeatureSchema.model_validate(json.loads((p / SCHEMA_FILE).read_text(encoding="utf-8")))
    return FeatureMatrix(np.load(p / FEATURES_FILE, allow_pickle=False), schema)


def _genre_onehot(corpus: Corpus, path: str, train_songs: np.ndarray) -> tuple[np.ndarray, list[str]]:
    table = parse_genres(path)
    song_index = {s: i for i, s in enumerate(corpus.song_ids)}
    extra = [s for s in table["song_id"] if s not in song_index]
    if extra:
        logger.warning("%s: %d genre rows reference songs outside the corpus (first: %r)", path, len(extra), extra[0])

    genre = pd.Series([None] * corpus.n_songs, dtype=object)
    for s, g in zip(table["song_id"], table["genre"]):
        if s in song_index:
            genre[song_index[s]] = g

    train_genres = genre[train_songs]
    labels = sorted({g for g in train_genres if g is not None})
    if not labels:
        raise DataError(f"{path}: no training song has a known genre")
    col = {g: j for j, g in enumerate(labels)}

    onehot = np.zeros((corpus.n_songs, len(labels)))
    known = np.zeros(corpus.n_songs, dtype=bool)
    for m, g in enumerate(genre):
        if g in col:
            onehot[m, col[g]] = 1.0
            known[m] = True

    train_known = train_songs[known[train_songs]]
    onehot[~known] = onehot[train_known].mean(axis=0)
    return onehot, labels


def _artist_embeddings(corpus: Corpus, path: str) -> np.ndarray:
    table = parse_embeddings(path)
    fallback = table.loc[EMBEDDING_FALLBACK].to_numpy() if EMBEDDING_FALLBACK in table.index else None
    rows = np.empty((corpus.n_artists, table.shape[1]))
    for a, artist in enumerate(corpus.artist_ids):
        if artist in table.index:
            rows[a] = table.loc[artist].to_numpy()
        elif fallback is not None:
            rows[a] = fallback
        else:
            raise DataError(f"{path}: no embedding for artist {artist!r} and no fallback row {EMBEDDING_FALLBACK!r}")
    return rows[corpus.song_artist]
