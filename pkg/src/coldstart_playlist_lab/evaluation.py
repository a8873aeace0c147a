"""Per-setting evaluation of MTC and the popularity baselines."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd

from .baselines import (
    CollocationMatrix,
    PopularityTable,
    cagh_scores,
    collocation_matrix,
    context_artists,
    popularity_table,
    poprank_scores,
    sagh_scores,
    top_artists,
)
from .corpus import Corpus
from .errors import ConfigError
from .features import FeatureMatrix
from .metrics import auc, hit_rate_at_k, novelty_at_k, smoothed_popularity, spread
from .model import (
    TrainedModel,
    recommend,
    score_cold_playlist,
    score_cold_song,
    score_cold_user,
    score_cold_user_anonymous,
    train,
)
from .models import EvalReport, Hyperparams, Method, OwlqnConfig, Setting
from .splits import SplitResult

logger = logging.getLogger(__name__)

DEFAULT_TOPK = (5, 10, 20, 50, 100)


@dataclass(eq=False)
class Scorer:
    """Scores the split's candidate songs for one query with one method."""

    method: Method
    corpus: Corpus
    split: SplitResult
    X: FeatureMatrix | None = None
    model: TrainedModel | None = None
    knn: int = 10
    pop: PopularityTable = field(init=False)
    colloc: CollocationMatrix | None = field(init=False, default=None)

    def __post_init__(self) -> None:
        self.method = Method(self.method)
        if self.method == Method.MTC and (self.X is None or self.model is None):
            raise ConfigError("method mtc needs a trained model and a feature matrix")
        self.pop = popularity_table(self.corpus, self.split.train_playlists, self.split.train_songs)
        if self.method == Method.CAGH:
            self.colloc = collocation_matrix(self.corpus, self.split.train_playlists, self.split.train_songs)

    @property
    def setting(self) -> Setting:
        return self.split.setting

    def query(self, u: int, i: int | None = None) -> np.ndarray:
        """Scores over `split.candidates` for user u (and playlist i in the cold-songs setting)."""
        if self.method == Method.MTC:
            return self._mtc(u, i)
        return self._baseline(u, i)[self.split.candidates]

    def _mtc(self, u: int, i: int | None) -> np.ndarray:
        if self.setting == Setting.COLD_PLAYLISTS:
            return score_cold_playlist(self.model, self.X, u)[self.split.candidates]
        if self.setting == Setting.COLD_USERS:
            if self.corpus.has_user_attributes:
                return score_cold_user(self.model, self.X, self.corpus.user_attributes[u], self.knn)[self.split.candidates]
            return score_cold_user_anonymous(self.model, self.X)[self.split.candidates]
        if i is None:
            raise ConfigError("the cold songs setting scores songs for a playlist; none given")
        return score_cold_song(self.model, self.X.take(self.split.held_songs), u, i)

    def _baseline(self, u: int, i: int | None) -> np.ndarray:
        if self.method == Method.POPRANK:
            return poprank_scores(self.pop, self.corpus, self.setting)
        context = self._context(u, i)
        if self.method == Method.SAGH:
            return sagh_scores(self.pop, self.corpus, context, self.setting)
        return cagh_scores(self.pop, self.colloc, self.corpus, context, self.setting)

    def _context(self, u: int, i: int | None) -> np.ndarray:
        # a new user owns no training playlist: use the most popular artists
        if self.setting == Setting.COLD_USERS:
            return top_artists(self.pop)
        if self.setting == Setting.COLD_SONGS:
            if i is None:
                raise ConfigError("the cold songs setting scores songs for a playlist; none given")
            return context_artists(self.corpus, [i], self.split.train_songs)
        own = np.intersect1d(self.corpus.user_playlists[u], self.split.train_playlists)
        return context_artists(self.corpus, own)

    def candidate_popularity(self) -> np.ndarray:
        """Smoothed popularity mass of each candidate; artist playcounts for new songs."""
        if self.setting == Setting.COLD_SONGS:
            counts = self.pop.song_artist_playcount(self.corpus)[self.split.candidates]
        else:
            counts = self.pop.song_playcount[self.split.candidates]
        return smoothed_popularity(counts)


def evaluate(
    method: Method | str,
    corpus: Corpus,
    split: SplitResult,
    X: FeatureMatrix | None = None,
    model: TrainedModel | None = None,
    topk: Sequence[int] = DEFAULT_TOPK,
    knn: int = 10,
) -> EvalReport:
    """Rank the candidates for every test playlist and aggregate the metrics.

    AUC is the unweighted mean over test playlists; HitRate@K and Novelty@K
    are computed for every K in `topk` (K larger than the candidate set is
    truncated to it); Spread is the entropy of softmax of each candidate's
    mean score over all test queries.
    """
    scorer = Scorer(Method(method), corpus, split, X, model, knn)
    candidates = split.candidates
    n_cand = candidates.size
    per_auc: list[float] = []
    hits: dict[int, list[float]] = {K: [] for K in topk}
    rankings: dict[int, list[np.ndarray]] = {}
    total = np.zeros(n_cand)

    for i in split.test_playlists:
        u = int(corpus.playlist_owner[i])
        scores = scorer.query(u, int(i))
        truth = split.test_truth(corpus, int(i))
        per_auc.append(auc(scores, truth))
        order = recommend(scores, n_cand).songs
        for K in topk:
            hits[K].append(hit_rate_at_k(order, truth, min(K, n_cand)))
        rankings.setdefault(u, []).append(order)
        total += scores

    popularity = scorer.candidate_popularity()
    report = EvalReport(
        method=scorer.method,
        setting=split.setting,
        n_test_playlists=len(per_auc),
        auc=float(np.mean(per_auc)),
        hitrate={K: float(np.mean(v)) for K, v in hits.items()},
        novelty={K: novelty_at_k(rankings, popularity, K) for K in topk},
        spread=spread(total / len(per_auc)),
        per_playlist_auc=per_auc,
    )
    logger.info("%s on %s: auc=%.4f over %d test playlists", report.method.value, report.setting.value, report.auc, report.n_test_playlists)
    return report


def grid_search(
    corpus: Corpus,
    split: SplitResult,
    X: FeatureMatrix,
    lambda1: Sequence[float],
    lambda2: Sequence[float],
    lambda3: Sequence[float],
    p: Sequence[float],
    cfg: OwlqnConfig | None = None,
    knn: int = 10,
    topk: Sequence[int] = DEFAULT_TOPK,
    workers: int = 1,
) -> pd.DataFrame:
    """Train and evaluate MTC for every hyperparameter combination; best test AUC first."""
    rows = []
    for l1, l2, l3, pp in itertools.product(lambda1, lambda2, lambda3, p):
        hp = Hyperparams(lambda1=l1, lambda2=l2, lambda3=l3, p=pp)
        model = train(corpus, X, split.train_playlists, hp, cfg, train_songs=split.train_songs, workers=workers)
        report = evaluate(Method.MTC, corpus, split, X, model, topk=topk, knn=knn)
        rows.append(
            {
                "lambda1": l1,
                "lambda2": l2,
                "lambda3": l3,
                "p": pp,
                "auc": report.auc,
                **{f"hitrate@{K}": v for K, v in report.hitrate.items()},
                "iterations": model.summary["iterations"],
                "termination": model.summary["termination"],
            }
        )
        logger.info("grid point %s -> auc=%.4f", hp.model_dump(), report.auc)
    if not rows:
        raise ConfigError("grid is empty; give at least one value per hyperparameter")
    return pd.DataFrame(rows).sort_values("auc", ascending=False, kind="stable").reset_index(drop=True)
