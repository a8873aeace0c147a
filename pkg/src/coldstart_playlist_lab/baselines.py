"""Popularity baselines: PopRank, Same Artists Greatest Hits, Collocated Artists Greatest Hits."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .corpus import Corpus, playlist_song_matrix
from .models import Setting

TOP_ARTISTS_FOR_COLD_USERS = 10


@dataclass(frozen=True, eq=False)
class PopularityTable:
    song_playcount: np.ndarray
    artist_playcount: np.ndarray

    def song_artist_playcount(self, corpus: Corpus) -> np.ndarray:
        return self.artist_playcount[corpus.song_artist]


@dataclass(frozen=True, eq=False)
class CollocationMatrix:
    """Artist x artist counts of training playlists containing both artists."""

    counts: sparse.csr_matrix

    def weight(self, artists: np.ndarray, context: np.ndarray) -> np.ndarray:
        if context.size == 0:
            return np.zeros(artists.size)
        return np.asarray(self.counts[:, context].sum(axis=1)).ravel()[artists]


def popularity_table(corpus: Corpus, train_playlists: np.ndarray, train_songs: np.ndarray | None = None) -> PopularityTable:
    counts = playlist_song_matrix(corpus, train_playlists, train_songs).sum(axis=0).astype(np.float64)
    by_artist = np.bincount(corpus.song_artist, weights=counts, minlength=corpus.n_artists)
    return PopularityTable(song_playcount=counts, artist_playcount=by_artist)


def collocation_matrix(corpus: Corpus, train_playlists: np.ndarray, train_songs: np.ndarray | None = None) -> CollocationMatrix:
    incidence = playlist_song_matrix(corpus, train_playlists, train_songs)
    rows, songs = np.nonzero(incidence)
    pa = sparse.coo_matrix(
        (np.ones(rows.size), (rows, corpus.song_artist[songs])),
        shape=(incidence.shape[0], corpus.n_artists),
    ).tocsr()
    pa.data[:] = 1.0
    return CollocationMatrix(counts=(pa.T @ pa).tocsr())


def context_artists(corpus: Corpus, playlists: np.ndarray, songs: np.ndarray | None = None) -> np.ndarray:
    """Distinct artists of the given playlists, optionally restricted to `songs`."""
    if len(playlists) == 0:
        return np.zeros(0, dtype=np.int64)
    members = playlist_song_matrix(corpus, playlists, songs).any(axis=0)
    return np.unique(corpus.song_artist[members])


def top_artists(pop: PopularityTable, n: int = TOP_ARTISTS_FOR_COLD_USERS) -> np.ndarray:
    order = np.lexsort((np.arange(pop.artist_playcount.size), -pop.artist_playcount))
    return np.sort(order[:n])


def poprank_scores(pop: PopularityTable, corpus: Corpus, setting: Setting) -> np.ndarray:
    """Song playcount; artist playcount in the cold-songs setting. One score per corpus song."""
    if setting == Setting.COLD_SONGS:
        return pop.song_artist_playcount(corpus)
    return pop.song_playcount.copy()


def sagh_scores(pop: PopularityTable, corpus: Corpus, context: np.ndarray, setting: Setting) -> np.ndarray:
    """PopRank score for songs whose artist is in `context` (artist indices), zero otherwise."""
    in_context = np.isin(corpus.song_artist, context)
    return np.where(in_context, poprank_scores(pop, corpus, setting), 0.0)


def cagh_scores(
    pop: PopularityTable, colloc: CollocationMatrix, corpus: Corpus, context: np.ndarray, setting: Setting
) -> np.ndarray:
    """PopRank score times the summed collocation of the song's artist with the context artists."""
    weight = colloc.weight(corpus.song_artist, np.asarray(context, dtype=np.int64))
    return poprank_scores(pop, corpus, setting) * weight
