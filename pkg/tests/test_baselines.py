import numpy as np

from coldstart_playlist_lab.baselines import (
    cagh_scores,
    collocation_matrix,
    context_artists,
    popularity_table,
    poprank_scores,
    sagh_scores,
    top_artists,
)
from coldstart_playlist_lab.models import Setting

ALL = np.arange(6)


def test_playcounts_over_training_playlists(tiny):
    pop = popularity_table(tiny, ALL)
    assert pop.song_playcount.tolist() == [2, 2, 2, 2, 3, 3]
    assert pop.artist_playcount.tolist() == [4, 4, 6]

    partial = popularity_table(tiny, np.array([0, 1]))
    assert partial.song_playcount.tolist() == [1, 1, 2, 1, 0, 0]

    restricted = popularity_table(tiny, ALL, train_songs=np.array([0, 1, 2, 3]))
    assert restricted.song_playcount.tolist() == [2, 2, 2, 2, 0, 0]
    assert restricted.artist_playcount.tolist() == [4, 4, 0]


def test_collocation_counts_playlists_sharing_artists(tiny):
    counts = collocation_matrix(tiny, ALL).counts.toarray()
    np.testing.assert_array_equal(counts, [[3, 1, 2], [1, 3, 1], [2, 1, 4]])


def test_poprank_uses_artist_counts_for_cold_songs(tiny):
    pop = popularity_table(tiny, ALL)
    assert poprank_scores(pop, tiny, Setting.COLD_PLAYLISTS).tolist() == [2, 2, 2, 2, 3, 3]
    assert poprank_scores(pop, tiny, Setting.COLD_SONGS).tolist() == [4, 4, 4, 4, 6, 6]


def test_sagh_keeps_only_context_artists(tiny):
    pop = popularity_table(tiny, ALL)
    assert sagh_scores(pop, tiny, np.array([1]), Setting.COLD_PLAYLISTS).tolist() == [0, 0, 2, 2, 0, 0]
    assert sagh_scores(pop, tiny, np.array([], dtype=np.int64), Setting.COLD_PLAYLISTS).tolist() == [0] * 6


def test_cagh_weights_by_collocation(tiny):
    pop = popularity_table(tiny, ALL)
    colloc = collocation_matrix(tiny, ALL)
    scores = cagh_scores(pop, colloc, tiny, np.array([0]), Setting.COLD_PLAYLISTS)
    assert scores.tolist() == [6, 6, 2, 2, 6, 6]
    both = cagh_scores(pop, colloc, tiny, np.array([0, 1]), Setting.COLD_PLAYLISTS)
    assert both.tolist() == [8, 8, 8, 8, 9, 9]


def test_context_and_top_artists(tiny):
    assert context_artists(tiny, np.array([0, 1])).tolist() == [0, 1]
    assert context_artists(tiny, np.array([0, 1]), songs=np.array([2, 3])).tolist() == [1]
    assert context_artists(tiny, np.array([], dtype=np.int64)).size == 0

    pop = popularity_table(tiny, ALL)
    # a1 and a2 tie on playcount; the lower index is kept
    assert top_artists(pop, 2).tolist() == [0, 2]
