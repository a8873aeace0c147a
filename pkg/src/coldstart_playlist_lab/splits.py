"""Train/test split protocols for the cold playlists, cold users and cold songs settings."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Corpus, Membership, playlist_song_matrix
from .errors import DataError, SplitError
from .models import Setting, SplitSpec
from .validation import validate_split

logger = logging.getLogger(__name__)

TRAIN_FILE = "train_playlists.txt"
TEST_FILE = "test_playlists.txt"
HELD_FILE = "held_songs.txt"
META_FILE = "split.json"


@dataclass(frozen=True, eq=False)
class SplitResult:
    """Partition of a corpus for one setting.

    In the cold-songs setting a test playlist is also a training playlist:
    its non-held members are the seed used for training and its held
    members are the test positives.
    """

    setting: Setting
    train_playlists: np.ndarray
    test_playlists: np.ndarray
    train_songs: np.ndarray
    held_songs: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    integrity: tuple[str, ...] = ()

    @property
    def candidates(self) -> np.ndarray:
        """Songs a recommender ranks at test time."""
        return self.held_songs if self.setting == Setting.COLD_SONGS else self.train_songs

    def seed_members(self, corpus: Corpus, i: int) -> np.ndarray:
        members = corpus.playlist_members[i]
        return members[np.isin(members, self.train_songs)]

    def test_truth(self, corpus: Corpus, i: int) -> Membership:
        """Test positives of playlist i as positions inside `candidates`."""
        positions = np.flatnonzero(np.isin(self.candidates, corpus.playlist_members[i]))
        return Membership(positions, self.candidates.size)


def make_split(corpus: Corpus, spec: SplitSpec) -> SplitResult:
    if spec.setting == Setting.COLD_PLAYLISTS:
        return split_cold_playlists(corpus, spec)
    if spec.setting == Setting.COLD_USERS:
        return split_cold_users(corpus, spec)
    return split_cold_songs(corpus, spec)


def split_cold_playlists(corpus: Corpus, spec: SplitSpec) -> SplitResult:
    """Hold part of the playlists of about `user_fraction` of the users.

    A held playlist has every song in >= min_song_support playlists of the
    corpus and in at least one remaining training playlist, and its owner
    keeps at least one training playlist.
    """
    rng = np.random.default_rng(spec.seed)
    support = _support(corpus)
    eligible = np.array([bool(np.all(support[m] >= spec.min_song_support)) for m in corpus.playlist_members])
    if not eligible.any():
        raise SplitError(f"no playlist has all of its songs in at least {spec.min_song_support} playlists")

    target = max(1, int(round(spec.user_fraction * corpus.n_users)))
    train_count = support.copy()
    held: list[int] = []
    n_users = 0
    for u in rng.permutation(corpus.n_users):
        if n_users >= target:
            break
        own = corpus.user_playlists[u]
        if own.size < 2:
            continue
        candidates = own[eligible[own]]
        if candidates.size == 0:
            continue
        n_hold = min(int(np.ceil(spec.playlist_fraction * own.size)), own.size - 1)
        taken = []
        for i in rng.permutation(candidates):
            if len(taken) >= n_hold:
                break
            members = corpus.playlist_members[i]
            if np.all(train_count[members] >= 2):
                train_count[members] -= 1
                taken.append(int(i))
        if taken:
            held.extend(taken)
            n_users += 1

    if not held:
        raise SplitError("cold playlists constraints cannot be satisfied for this corpus")
    if n_users < target:
        logger.warning("only %d of %d requested users contribute test playlists", n_users, target)
    return _finish(corpus, spec, np.asarray(held, dtype=np.int64))


def split_cold_users(corpus: Corpus, spec: SplitSpec) -> SplitResult:
    """Hold every playlist of about `user_fraction` of the users, skipping users
    whose removal would leave some song without a training playlist."""
    rng = np.random.default_rng(spec.seed)
    incidence = playlist_song_matrix(corpus, np.arange(corpus.n_playlists)).astype(np.int64)
    train_count = incidence.sum(axis=0)
    target = max(1, int(round(spec.user_fraction * corpus.n_users)))

    held: list[int] = []
    n_users = 0
    for u in rng.permutation(corpus.n_users):
        if n_users >= target:
            break
        own = corpus.user_playlists[u]
        counts = incidence[own].sum(axis=0)
        if np.all(train_count - counts >= 1):
            train_count -= counts
            held.extend(int(i) for i in own)
            n_users += 1
        else:
            logger.debug("user %s kept for training: holding it would orphan a song", corpus.user_ids[u])

    if not held:
        raise SplitError("no user can be held out without orphaning a training song")
    if n_users < target:
        logger.warning("only %d of %d requested users could be held out", n_users, target)
    return _finish(corpus, spec, np.asarray(held, dtype=np.int64))


def split_cold_songs(corpus: Corpus, spec: SplitSpec) -> SplitResult:
    """Hold the n_new_songs latest released songs (ties by song index ascending)."""
    M = corpus.n_songs
    n_new = spec.n_new_songs if spec.n_new_songs is not None else max(1, M // 10)
    if n_new >= M:
        raise SplitError(f"n_new_songs={n_new} must be smaller than the number of songs ({M})")

    latest_first = np.lexsort((np.arange(M), -corpus.release_year))
    held = np.sort(latest_first[:n_new])
    is_held = np.zeros(M, dtype=bool)
    is_held[held] = True

    train, test = [], []
    for i, members in enumerate(corpus.playlist_members):
        n_held = int(is_held[members].sum())
        if n_held == members.size:
            continue
        train.append(i)
        if n_held == n_new:
            logger.warning("playlist %s contains every held song and is not used for testing", corpus.playlist_ids[i])
        elif n_held:
            test.append(i)
    if not test:
        raise SplitError("no playlist mixes held and non-held songs")

    result = SplitResult(
        setting=Setting.COLD_SONGS,
        train_playlists=np.asarray(train, dtype=np.int64),
        test_playlists=np.asarray(test, dtype=np.int64),
        train_songs=np.flatnonzero(~is_held),
        held_songs=held,
    )
    return _with_integrity(corpus, spec, result)


def save_split(split: SplitResult, corpus: Corpus, outdir: str) -> Path:
    p = Path(outdir)
    p.mkdir(parents=True, exist_ok=True)
    _write_ids(p / TRAIN_FILE, [corpus.playlist_ids[i] for i in split.train_playlists])
    _write_ids(p / TEST_FILE, [corpus.playlist_ids[i] for i in split.test_playlists])
    _write_ids(p / HELD_FILE, [corpus.song_ids[m] for m in split.held_songs])
    meta = {
        "setting": split.setting.value,
        "n_train_playlists": int(split.train_playlists.size),
        "n_test_playlists": int(split.test_playlists.size),
        "n_held_songs": int(split.held_songs.size),
        "integrity": list(split.integrity),
    }
    (p / META_FILE).write_text(json.dumps(meta, indent=2, sort_keys=True), encoding="utf-8")
    return p


def load_split(indir: str, corpus: Corpus) -> SplitResult:
    p = Path(indir)
    for name in (TRAIN_FILE, TEST_FILE, HELD_FILE, META_FILE):
        if not (p / name).exists():
            raise DataError(f"file not found: {p / name}")
    meta = json.loads((p / META_FILE).read_text(encoding="utf-8"))
    held = np.sort(np.asarray([corpus.song_index(s) for s in _read_ids(p / HELD_FILE)], dtype=np.int64))
    keep = np.ones(corpus.n_songs, dtype=bool)
    keep[held] = False
    return SplitResult(
        setting=Setting(meta["setting"]),
        train_playlists=np.sort(np.asarray([corpus.playlist_index(s) for s in _read_ids(p / TRAIN_FILE)], dtype=np.int64)),
        test_playlists=np.sort(np.asarray([corpus.playlist_index(s) for s in _read_ids(p / TEST_FILE)], dtype=np.int64)),
        train_songs=np.flatnonzero(keep),
        held_songs=held,
        integrity=tuple(meta.get("integrity", [])),
    )


def _support(corpus: Corpus) -> np.ndarray:
    return playlist_song_matrix(corpus, np.arange(corpus.n_playlists)).sum(axis=0).astype(np.int64)


def _finish(corpus: Corpus, spec: SplitSpec, held_playlists: np.ndarray) -> SplitResult:
    is_test = np.zeros(corpus.n_playlists, dtype=bool)
    is_test[held_playlists] = True
    result = SplitResult(
        setting=spec.setting,
        train_playlists=np.flatnonzero(~is_test),
        test_playlists=np.flatnonzero(is_test),
        train_songs=np.arange(corpus.n_songs),
    )
    return _with_integrity(corpus, spec, result)


def _with_integrity(corpus: Corpus, spec: SplitSpec, result: SplitResult) -> SplitResult:
    messages = validate_split(corpus, result, spec)
    for msg in messages:
        if msg.startswith("WARN:"):
            logger.warning(msg)
    errors = [m for m in messages if m.startswith("ERROR:")]
    if errors:
        raise SplitError("; ".join(errors))
    return SplitResult(
        setting=result.setting,
        train_playlists=result.train_playlists,
        test_playlists=result.test_playlists,
        train_songs=result.train_songs,
        held_songs=result.held_songs,
        integrity=tuple(messages),
    )


def _write_ids(path: Path, ids: list[str]) -> None:
    path.write_text("".join(f"{i}\n" for i in ids), encoding="utf-8")


def _read_ids(path: Path) -> list[str]:
    return [line.strip() for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
