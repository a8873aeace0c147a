from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np
from scipy.special import softmax
from scipy.stats import entropy, rankdata

from .corpus import Membership


def hit_rate_at_k(recommended: Sequence[int] | np.ndarray, truth: Membership, K: int) -> float:
    """Share of the playlist's songs found among the first K recommendations."""
    if K < 1:
        raise ValueError("K must be >= 1")
    top = np.asarray(recommended, dtype=np.int64)[:K]
    return float(np.isin(truth.positives, top).sum() / truth.n_pos)


def auc(scores: np.ndarray, truth: Membership) -> float:
    """P(positive scored above negative), ties counted as one half."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != (truth.n_songs,):
        raise ValueError(f"expected {truth.n_songs} scores, got {scores.shape}")
    ranks = rankdata(scores)
    n_pos, n_neg = truth.n_pos, truth.n_neg
    return float((ranks[truth.positives].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def smoothed_popularity(counts: np.ndarray) -> np.ndarray:
    """(count + 1) / (sum(count) + M): a popularity mass that is never zero."""
    counts = np.asarray(counts, dtype=np.float64)
    return (counts + 1.0) / (counts.sum() + counts.size)


def novelty_at_k(recommendations: Mapping[int, Sequence[Sequence[int]]], popularity: np.ndarray, K: int) -> float:
    """Mean over users of the mean over their test playlists of sum(-log2 pop_m) / K over the top-K.

    `recommendations` maps a user to the ranked lists of its test playlists;
    items index into `popularity` (already normalised, see smoothed_popularity).
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if not recommendations:
        raise ValueError("novelty needs at least one test playlist")
    info = -np.log2(np.asarray(popularity, dtype=np.float64))
    per_user = []
    for user in sorted(recommendations):
        lists = recommendations[user]
        if not lists:
            raise ValueError(f"user {user} has no test playlists")
        per_user.append(np.mean([info[np.asarray(r[:K], dtype=np.int64)].sum() / min(K, len(r)) for r in lists]))
    return float(np.mean(per_user))


def spread(mean_scores: np.ndarray) -> float:
    """Natural-log entropy of softmax(mean scores) over the candidate songs."""
    mean_scores = np.asarray(mean_scores, dtype=np.float64)
    if not np.isfinite(mean_scores).all():
        raise ValueError("spread needs finite scores")
    return float(entropy(softmax(mean_scores)))
