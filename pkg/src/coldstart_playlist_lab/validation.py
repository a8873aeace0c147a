from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from .corpus import Corpus, playlist_song_matrix
from .models import Setting, SplitSpec

if TYPE_CHECKING:
    from .splits import SplitResult


def validate_split(corpus: Corpus, split: "SplitResult", spec: SplitSpec | None = None, strict: bool = False) -> list[str]:
    """Check the integrity constraints of a split and return warnings/errors."""
    messages: list[str] = []
    train, test = split.train_playlists, split.test_playlists

    if train.size == 0:
        messages.append("ERROR: no training playlists")
    if test.size == 0:
        messages.append("ERROR: no test playlists")

    train_incidence = playlist_song_matrix(corpus, train, split.train_songs)
    in_training = train_incidence.any(axis=0)

    if split.setting == Setting.COLD_SONGS:
        messages.extend(_check_cold_songs(corpus, split, spec, train_incidence))
    else:
        overlap = np.intersect1d(train, test)
        if overlap.size:
            messages.append(f"ERROR: {overlap.size} playlists are both training and test playlists")
        test_songs = playlist_song_matrix(corpus, test).any(axis=0)
        orphans = int(np.count_nonzero(test_songs & ~in_training))
        if orphans:
            messages.append(f"ERROR: {orphans} test songs appear in no training playlist")

        train_users = set(corpus.playlist_owner[train].tolist())
        test_users = set(corpus.playlist_owner[test].tolist())
        if split.setting == Setting.COLD_PLAYLISTS:
            missing = test_users - train_users
            if missing:
                messages.append(f"ERROR: {len(missing)} test users keep no training playlist")
            if spec is not None:
                support = playlist_song_matrix(corpus, np.arange(corpus.n_playlists)).sum(axis=0)
                low = sum(1 for i in test if np.any(support[corpus.playlist_members[i]] < spec.min_song_support))
                if low:
                    messages.append(f"ERROR: {low} test playlists contain songs in fewer than {spec.min_song_support} playlists")
        else:
            shared = test_users & train_users
            if shared:
                messages.append(f"ERROR: {len(shared)} test users also own training playlists")

        if spec is not None and test.size:
            achieved = len(test_users) / corpus.n_users
            if achieved + 1e-12 < 0.5 * spec.user_fraction:
                messages.append(
                    f"WARN: test users cover {achieved:.1%} of users, requested about {spec.user_fraction:.0%}"
                )

    if strict and any(m.startswith("WARN:") for m in messages):
        messages.append("ERROR: strict mode enabled; warnings treated as failures")
    return messages


def split_is_valid(corpus: Corpus, split: "SplitResult", spec: SplitSpec | None = None) -> bool:
    return not any(m.startswith("ERROR:") for m in validate_split(corpus, split, spec))


def _check_cold_songs(corpus: Corpus, split: "SplitResult", spec: SplitSpec | None, train_incidence: np.ndarray) -> list[str]:
    messages: list[str] = []
    held = split.held_songs
    if held.size == 0:
        messages.append("ERROR: cold songs split holds no songs")
        return messages
    if np.intersect1d(held, split.train_songs).size:
        messages.append("ERROR: held songs are also training songs")

    empty_seed = int(np.count_nonzero(~train_incidence.any(axis=1)))
    if empty_seed:
        messages.append(f"ERROR: {empty_seed} training playlists have no non-held song")

    test_held = playlist_song_matrix(corpus, split.test_playlists, held)
    if np.any(~test_held.any(axis=1)):
        messages.append("ERROR: some test playlists have no held song")
    if not np.all(np.isin(split.test_playlists, split.train_playlists)):
        messages.append("ERROR: some test playlists have no seed playlist in training")

    newest_kept = corpus.release_year[split.train_songs].max(initial=np.iinfo(np.int64).min)
    oldest_held = corpus.release_year[held].min()
    if newest_kept > oldest_held:
        messages.append("ERROR: a kept song was released after a held song")
    if spec is not None and spec.n_new_songs is not None and held.size != spec.n_new_songs:
        messages.append(f"ERROR: {held.size} songs held, expected {spec.n_new_songs}")
    return messages
