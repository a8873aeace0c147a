from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .errors import DataError, at_line
from .parsers import parse_playlists, parse_songs, parse_users

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Membership:
    """Positive songs of one playlist inside a universe of `n_songs` songs."""

    positives: np.ndarray
    n_songs: int

    def __post_init__(self) -> None:
        pos = np.asarray(self.positives, dtype=np.int64)
        if pos.size and (np.any(np.diff(pos) <= 0) or pos[0] < 0 or pos[-1] >= self.n_songs):
            raise DataError("membership positives must be sorted, unique and in range")
        if not 1 <= pos.size < self.n_songs:
            raise DataError(f"degenerate membership: {pos.size} positives among {self.n_songs} songs")
        pos.setflags(write=False)
        object.__setattr__(self, "positives", pos)

    @classmethod
    def from_positives(cls, positives: Iterable[int], n_songs: int) -> "Membership":
        return cls(np.unique(np.fromiter(positives, dtype=np.int64)), n_songs)

    @property
    def n_pos(self) -> int:
        return int(self.positives.size)

    @property
    def n_neg(self) -> int:
        return self.n_songs - self.n_pos

    def mask(self) -> np.ndarray:
        m = np.zeros(self.n_songs, dtype=bool)
        m[self.positives] = True
        return m


@dataclass(frozen=True, eq=False)
class Corpus:
    """Immutable indexed songs, artists, users and playlists.

    Dense indices follow the lexicographic order of the external string ids.
    """

    song_ids: tuple[str, ...]
    artist_ids: tuple[str, ...]
    user_ids: tuple[str, ...]
    playlist_ids: tuple[str, ...]
    song_artist: np.ndarray
    release_year: np.ndarray
    metadata: pd.DataFrame
    user_attributes: np.ndarray
    attribute_names: tuple[str, ...]
    playlist_owner: np.ndarray
    playlist_members: tuple[np.ndarray, ...]
    user_playlists: tuple[np.ndarray, ...] = field(init=False)
    _index: dict[str, dict[str, int]] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        owners = np.asarray(self.playlist_owner, dtype=np.int64)
        by_user = tuple(np.flatnonzero(owners == u) for u in range(len(self.user_ids)))
        for arr in (self.song_artist, self.release_year, self.user_attributes, self.playlist_owner, *self.playlist_members, *by_user):
            arr.setflags(write=False)
        object.__setattr__(self, "user_playlists", by_user)
        object.__setattr__(
            self,
            "_index",
            {
                "song": {s: i for i, s in enumerate(self.song_ids)},
                "user": {s: i for i, s in enumerate(self.user_ids)},
                "playlist": {s: i for i, s in enumerate(self.playlist_ids)},
                "artist": {s: i for i, s in enumerate(self.artist_ids)},
            },
        )

    @property
    def n_songs(self) -> int:
        return len(self.song_ids)

    @property
    def n_artists(self) -> int:
        return len(self.artist_ids)

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_playlists(self) -> int:
        return len(self.playlist_ids)

    @property
    def has_user_attributes(self) -> bool:
        return self.user_attributes.shape[1] > 0

    def song_index(self, song_id: str) -> int:
        return self._lookup("song", song_id)

    def user_index(self, user_id: str) -> int:
        return self._lookup("user", user_id)

    def playlist_index(self, playlist_id: str) -> int:
        return self._lookup("playlist", playlist_id)

    def _lookup(self, kind: str, key: str) -> int:
        try:
            return self._index[kind][key]
        except KeyError:
            raise DataError(f"unknown {kind} id {key!r}") from None


def load_corpus(songs_path: str, playlists_path: str, users_path: str | None = None) -> Corpus:
    """Read, validate and index the songs/playlists(/users) files."""
    songs = parse_songs(songs_path)
    playlists = parse_playlists(playlists_path)
    users = parse_users(users_path) if users_path else None
    return build_corpus(songs, playlists, users, songs_path, playlists_path, users_path)


def build_corpus(
    songs: pd.DataFrame,
    playlists: pd.DataFrame,
    users: pd.DataFrame | None = None,
    songs_path: str = "<songs>",
    playlists_path: str = "<playlists>",
    users_path: str | None = None,
) -> Corpus:
    """Index parsed tables into a Corpus, enforcing referential integrity."""
    _reject_duplicates(songs, "song_id", songs_path)
    _reject_duplicates(playlists, "playlist_id", playlists_path)

    songs = songs.sort_values("song_id", kind="mergesort").reset_index(drop=True)
    song_ids = tuple(songs["song_id"])
    song_pos = {s: i for i, s in enumerate(song_ids)}
    artist_ids = tuple(sorted(set(songs["artist_id"])))
    artist_pos = {a: i for i, a in enumerate(artist_ids)}

    playlists = playlists.sort_values("playlist_id", kind="mergesort").reset_index(drop=True)
    user_ids = tuple(sorted(set(playlists["user_id"])))
    user_pos = {u: i for i, u in enumerate(user_ids)}

    members: list[np.ndarray] = []
    seen = np.zeros(len(song_ids), dtype=bool)
    for pid, songs_of, line in zip(playlists["playlist_id"], playlists["songs"], playlists["line"]):
        idx = []
        for s in songs_of:
            if s not in song_pos:
                raise DataError(at_line(playlists_path, _line(line), f"playlist {pid!r} references unknown song id {s!r}"))
            idx.append(song_pos[s])
        arr = np.asarray(sorted(idx), dtype=np.int64)
        if arr.size < 1:
            raise DataError(at_line(playlists_path, _line(line), f"playlist {pid!r} has no songs"))
        if np.any(np.diff(arr) == 0):
            dup = song_ids[int(arr[np.flatnonzero(np.diff(arr) == 0)[0]])]
            raise DataError(at_line(playlists_path, _line(line), f"playlist {pid!r} lists song {dup!r} more than once"))
        seen[arr] = True
        members.append(arr)

    if not seen.all():
        orphan = song_ids[int(np.flatnonzero(~seen)[0])]
        line = int(songs.loc[songs["song_id"] == orphan, "line"].iloc[0]) if "line" in songs else None
        raise DataError(at_line(songs_path, line, f"song {orphan!r} appears in no playlist"))

    metadata_cols = [c for c in songs.columns if c not in ("song_id", "artist_id", "release_year", "line")]
    metadata = songs[metadata_cols].astype(np.float64).reset_index(drop=True)

    attrs, attr_names = _user_attributes(users, user_ids, users_path)

    return Corpus(
        song_ids=song_ids,
        artist_ids=artist_ids,
        user_ids=user_ids,
        playlist_ids=tuple(playlists["playlist_id"]),
        song_artist=np.asarray([artist_pos[a] for a in songs["artist_id"]], dtype=np.int64),
        release_year=songs["release_year"].to_numpy(dtype=np.int64).copy(),
        metadata=metadata,
        user_attributes=attrs,
        attribute_names=attr_names,
        playlist_owner=np.asarray([user_pos[u] for u in playlists["user_id"]], dtype=np.int64),
        playlist_members=tuple(members),
    )


def membership(corpus: Corpus, i: int) -> Membership:
    if not 0 <= i < corpus.n_playlists:
        raise DataError(f"invalid playlist index {i}")
    return Membership(corpus.playlist_members[i], corpus.n_songs)


def playlist_song_matrix(corpus: Corpus, playlists: Sequence[int] | np.ndarray, songs: np.ndarray | None = None) -> np.ndarray:
    """Boolean (len(playlists) x M) incidence, optionally restricted to `songs`."""
    out = np.zeros((len(playlists), corpus.n_songs), dtype=bool)
    for r, i in enumerate(playlists):
        out[r, corpus.playlist_members[int(i)]] = True
    if songs is not None:
        keep = np.zeros(corpus.n_songs, dtype=bool)
        keep[songs] = True
        out &= keep
    return out


def dump_corpus(corpus: Corpus) -> bytes:
    """Canonical JSON serialisation; identical inputs give identical bytes."""
    meta = corpus.metadata.to_numpy()
    doc = {
        "songs": [
            {
                "id": s,
                "artist": corpus.artist_ids[int(corpus.song_artist[m])],
                "release_year": int(corpus.release_year[m]),
                "metadata": [None if np.isnan(v) else float(v) for v in meta[m]],
            }
            for m, s in enumerate(corpus.song_ids)
        ],
        "metadata_columns": list(corpus.metadata.columns),
        "users": [
            {"id": u, "attributes": [float(v) for v in corpus.user_attributes[k]]}
            for k, u in enumerate(corpus.user_ids)
        ],
        "attribute_names": list(corpus.attribute_names),
        "playlists": [
            {
                "id": p,
                "owner": corpus.user_ids[int(corpus.playlist_owner[i])],
                "members": [corpus.song_ids[int(m)] for m in corpus.playlist_members[i]],
            }
            for i, p in enumerate(corpus.playlist_ids)
        ],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


def corpus_fingerprint(corpus: Corpus) -> str:
    return hashlib.sha256(dump_corpus(corpus)).hexdigest()


def _user_attributes(
    users: pd.DataFrame | None, user_ids: tuple[str, ...], users_path: str | None
) -> tuple[np.ndarray, tuple[str, ...]]:
    if users is None:
        return np.zeros((len(user_ids), 0), dtype=np.float64), ()

    path = users_path or "<users>"
    _reject_duplicates(users, "user_id", path)
    names = tuple(c for c in users.columns if c not in ("user_id", "line"))
    table = users.set_index("user_id")

    unknown = sorted(set(table.index) - set(user_ids))
    if unknown:
        logger.warning("%s: %d users own no playlist and are ignored (first: %r)", path, len(unknown), unknown[0])
    missing = [u for u in user_ids if u not in table.index]
    if missing:
        logger.warning("%s: %d users have no attribute row; attributes imputed (first: %r)", path, len(missing), missing[0])

    attrs = table.reindex(list(user_ids))[list(names)].to_numpy(dtype=np.float64)
    col_means = np.zeros(attrs.shape[1])
    for j in range(attrs.shape[1]):
        finite = attrs[~np.isnan(attrs[:, j]), j]
        col_means[j] = finite.mean() if finite.size else 0.0
    attrs = np.where(np.isnan(attrs), col_means[None, :], attrs)
    return np.ascontiguousarray(attrs), names


def _reject_duplicates(df: pd.DataFrame, col: str, path: str) -> None:
    dup = df[col].duplicated()
    if dup.any():
        row = df[dup].iloc[0]
        raise DataError(at_line(path, _line(row.get("line")), f"duplicate {col} {row[col]!r}"))


def _line(value: object) -> int | None:
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return None
    return int(value)
