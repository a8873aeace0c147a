"""Risk functions of the multitask ranking model.

Scores are f(m, u, i) = (alpha_u + beta_i + mu) . x_m. Every risk is an
average over training playlists of a per-playlist term; exponential sums are
evaluated in the log domain and raw scores are clamped to [-limit, limit].
"""
from __future__ import annotations

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .corpus import Corpus, Membership, playlist_song_matrix
from .errors import DataError, NumericalError
from .features import FeatureMatrix
from .models import Hyperparams

logger = logging.getLogger(__name__)

SCORE_LIMIT = 50.0
LOG_MAX = float(np.log(np.finfo(np.float64).max))
CHUNK = 64


@dataclass(eq=False)
class ModelParams:
    """theta = ({alpha_u}, {beta_i}, mu); flat layout is alpha, beta, mu row-major."""

    alpha: np.ndarray
    beta: np.ndarray
    mu: np.ndarray

    def __post_init__(self) -> None:
        self.alpha = np.asarray(self.alpha, dtype=np.float64)
        self.beta = np.asarray(self.beta, dtype=np.float64)
        self.mu = np.asarray(self.mu, dtype=np.float64)
        d = self.mu.shape[0]
        if self.alpha.ndim != 2 or self.beta.ndim != 2 or self.alpha.shape[1] != d or self.beta.shape[1] != d:
            raise ValueError(f"inconsistent parameter shapes {self.alpha.shape}, {self.beta.shape}, {self.mu.shape}")

    @classmethod
    def zeros(cls, n_users: int, n_playlists: int, dim: int) -> "ModelParams":
        return cls(np.zeros((n_users, dim)), np.zeros((n_playlists, dim)), np.zeros(dim))

    @classmethod
    def from_vector(cls, vec: np.ndarray, n_users: int, n_playlists: int, dim: int) -> "ModelParams":
        vec = np.asarray(vec, dtype=np.float64)
        a = n_users * dim
        b = a + n_playlists * dim
        if vec.shape != (b + dim,):
            raise ValueError(f"parameter vector has length {vec.shape}, expected {b + dim}")
        return cls(vec[:a].reshape(n_users, dim).copy(), vec[a:b].reshape(n_playlists, dim).copy(), vec[b:].copy())

    @property
    def dim(self) -> int:
        return self.mu.shape[0]

    @property
    def n_users(self) -> int:
        return self.alpha.shape[0]

    @property
    def n_playlists(self) -> int:
        return self.beta.shape[0]

    def ravel(self) -> np.ndarray:
        return np.concatenate([self.alpha.ravel(), self.beta.ravel(), self.mu])

    def weights(self, users: np.ndarray, playlists: np.ndarray) -> np.ndarray:
        return self.alpha[users] + self.beta[playlists] + self.mu

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.alpha).all() and np.isfinite(self.beta).all() and np.isfinite(self.mu).all())


@dataclass(frozen=True, eq=False)
class PlaylistTasks:
    """Training view: which playlists, their owners, and positives over `songs`."""

    playlists: np.ndarray
    owners: np.ndarray
    songs: np.ndarray
    labels: np.ndarray
    n_pos: np.ndarray = field(init=False)
    n_neg: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        n_pos = self.labels.sum(axis=1)
        n_neg = self.labels.shape[1] - n_pos
        if self.labels.shape[0] == 0:
            raise DataError("no training playlists")
        if np.any(n_pos < 1) or np.any(n_neg < 1):
            bad = int(np.flatnonzero((n_pos < 1) | (n_neg < 1))[0])
            raise DataError(f"playlist {int(self.playlists[bad])} needs at least one positive and one negative song")
        object.__setattr__(self, "n_pos", n_pos.astype(np.float64))
        object.__setattr__(self, "n_neg", n_neg.astype(np.float64))

    @classmethod
    def from_corpus(
        cls, corpus: Corpus, playlists: np.ndarray | None = None, songs: np.ndarray | None = None
    ) -> "PlaylistTasks":
        playlists = np.arange(corpus.n_playlists) if playlists is None else np.asarray(playlists, dtype=np.int64)
        songs = np.arange(corpus.n_songs) if songs is None else np.asarray(songs, dtype=np.int64)
        labels = playlist_song_matrix(corpus, playlists)[:, songs]
        return cls(playlists, corpus.playlist_owner[playlists], songs, labels)

    @property
    def size(self) -> int:
        return self.labels.shape[0]


@dataclass
class ScoreGuard:
    """Run-level clamp counter shared by every loss evaluation of a run."""

    limit: float = SCORE_LIMIT
    clamped: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def clamp(self, scores: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        inside = np.abs(scores) <= self.limit
        n_out = int(scores.size - np.count_nonzero(inside))
        if n_out:
            with self._lock:
                self.clamped += n_out
            scores = np.clip(scores, -self.limit, self.limit)
        return scores, inside


@dataclass(frozen=True)
class RiskBreakdown:
    total: float
    per_playlist: np.ndarray


def score(theta: ModelParams, X: FeatureMatrix, m: int, u: int, i: int) -> float:
    if X.dim != theta.dim:
        raise ValueError(f"feature dimension {X.dim} does not match parameter dimension {theta.dim}")
    return float((theta.alpha[u] + theta.beta[i] + theta.mu) @ X.values[m])


def bottom_push_risk(scores: np.ndarray, truth: Membership) -> float:
    """Fraction of negatives scored at or above the lowest-scored positive."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != (truth.n_songs,):
        raise ValueError(f"expected {truth.n_songs} scores, got {scores.shape}")
    mask = truth.mask()
    lowest = scores[mask].min()
    return float(np.count_nonzero(scores[~mask] >= lowest) / truth.n_neg)


def rank_risk_surrogate(
    theta: ModelParams, X: FeatureMatrix, tasks: PlaylistTasks, guard: ScoreGuard | None = None, workers: int = 1
) -> float:
    return risk_breakdown("surrogate", theta, X, tasks, guard=guard, workers=workers).total


def rank_risk_lse(
    theta: ModelParams, X: FeatureMatrix, tasks: PlaylistTasks, p: float, guard: ScoreGuard | None = None, workers: int = 1
) -> float:
    return risk_breakdown("lse", theta, X, tasks, p=p, guard=guard, workers=workers).total


def mtc_risk(
    theta: ModelParams, X: FeatureMatrix, tasks: PlaylistTasks, p: float, guard: ScoreGuard | None = None, workers: int = 1
) -> float:
    return risk_breakdown("mtc", theta, X, tasks, p=p, guard=guard, workers=workers).total


def mean_bottom_push_risk(theta: ModelParams, X: FeatureMatrix, tasks: PlaylistTasks, workers: int = 1) -> float:
    return risk_breakdown("bottom_push", theta, X, tasks, workers=workers).total


def risk_breakdown(
    kind: str,
    theta: ModelParams,
    X: FeatureMatrix,
    tasks: PlaylistTasks,
    p: float = 1.0,
    guard: ScoreGuard | None = None,
    workers: int = 1,
) -> RiskBreakdown:
    """Per-playlist terms of one risk: mtc, lse, surrogate or bottom_push."""
    if p <= 0:
        raise ValueError("p must be positive")
    try:
        term_fn = _TERMS[kind]
    except KeyError:
        raise ValueError(f"unknown risk {kind!r}; expected one of {sorted(_TERMS)}") from None

    def chunk(lo: int, hi: int) -> np.ndarray:
        S, _ = _scores(theta, X, tasks, lo, hi, guard)
        return term_fn(S, tasks.labels[lo:hi], tasks.n_pos[lo:hi], tasks.n_neg[lo:hi], p)

    per = np.concatenate(_map_chunks(chunk, tasks.size, workers))
    return RiskBreakdown(total=float(per.sum() / tasks.size), per_playlist=per)


def mtc_risk_grad(
    theta: ModelParams, X: FeatureMatrix, tasks: PlaylistTasks, p: float, guard: ScoreGuard | None = None, workers: int = 1
) -> tuple[float, ModelParams]:
    """Classification risk and its gradient with respect to alpha, beta and mu."""
    if p <= 0:
        raise ValueError("p must be positive")

    def chunk(lo: int, hi: int) -> tuple[np.ndarray, np.ndarray]:
        S, inside = _scores(theta, X, tasks, lo, hi, guard)
        Y = tasks.labels[lo:hi]
        n_pos, n_neg = tasks.n_pos[lo:hi], tasks.n_neg[lo:hi]
        terms = _mtc_terms(S, Y, n_pos, n_neg, p)
        with np.errstate(over="ignore"):
            G = np.where(Y, -np.exp(-p * S) / n_pos[:, None], np.exp(S) / n_neg[:, None])
        G[~inside] = 0.0
        return terms, G @ X.values[tasks.songs]

    parts = _map_chunks(chunk, tasks.size, workers)
    terms = np.concatenate([t for t, _ in parts])
    gW = np.concatenate([g for _, g in parts]) / tasks.size
    return float(terms.sum() / tasks.size), _chain(theta, tasks, gW)


def rank_risk_lse_grad(
    theta: ModelParams, X: FeatureMatrix, tasks: PlaylistTasks, p: float, guard: ScoreGuard | None = None
) -> tuple[float, ModelParams]:
    """Gradient of the log-sum-exp ranking risk; used for stationarity checks, not training."""
    if p <= 0:
        raise ValueError("p must be positive")
    S, inside = _scores(theta, X, tasks, 0, tasks.size, guard)
    Y = tasks.labels
    terms = _lse_terms(S, Y, tasks.n_pos, tasks.n_neg, p)

    neg_log = logsumexp(np.where(Y, -np.inf, S), axis=1, keepdims=True)
    pos_log = logsumexp(np.where(Y, -p * S, -np.inf), axis=1, keepdims=True)
    pos_w = np.exp(np.where(Y, -p * S, -np.inf) - pos_log)
    neg_w = np.exp(np.where(Y, -np.inf, S) - neg_log)
    G = terms[:, None] * (neg_w - pos_w)
    G[~inside] = 0.0
    gW = (G @ X.values[tasks.songs]) / tasks.size
    return float(terms.sum() / tasks.size), _chain(theta, tasks, gW)


def regulariser(theta: ModelParams, hp: Hyperparams) -> tuple[float, ModelParams, np.ndarray]:
    """Smooth part lambda1 * sum ||alpha_u||^2 with its gradient, plus per-coordinate L1 weights.

    The L1 weights (0 on alpha, lambda2 on beta, lambda3 on mu) follow the
    flat layout of `ModelParams.ravel` and are left to the optimiser.
    """
    for name in ("lambda1", "lambda2", "lambda3"):
        if getattr(hp, name) < 0:
            raise ValueError(f"{name} must be nonnegative")
    smooth = float(hp.lambda1 * np.sum(theta.alpha**2))
    grad = ModelParams(2.0 * hp.lambda1 * theta.alpha, np.zeros_like(theta.beta), np.zeros_like(theta.mu))
    l1 = np.concatenate(
        [
            np.zeros(theta.alpha.size),
            np.full(theta.beta.size, hp.lambda2),
            np.full(theta.mu.size, hp.lambda3),
        ]
    )
    return smooth, grad, l1


def omega(theta: ModelParams, hp: Hyperparams) -> float:
    smooth, _, l1 = regulariser(theta, hp)
    return smooth + float(l1 @ np.abs(theta.ravel()))


def _scores(
    theta: ModelParams, X: FeatureMatrix, tasks: PlaylistTasks, lo: int, hi: int, guard: ScoreGuard | None
) -> tuple[np.ndarray, np.ndarray]:
    if X.dim != theta.dim:
        raise ValueError(f"feature dimension {X.dim} does not match parameter dimension {theta.dim}")
    W = theta.weights(tasks.owners[lo:hi], tasks.playlists[lo:hi])
    S = W @ X.values[tasks.songs].T
    local = guard if guard is not None else ScoreGuard()
    before = local.clamped
    S, inside = local.clamp(S)
    if guard is None and local.clamped > before:
        logger.warning("clamped %d scores to [-%g, %g]", local.clamped - before, local.limit, local.limit)
    return S, inside


def _mtc_terms(S: np.ndarray, Y: np.ndarray, n_pos: np.ndarray, n_neg: np.ndarray, p: float) -> np.ndarray:
    pos_log = logsumexp(np.where(Y, -p * S, -np.inf), axis=1) - np.log(p * n_pos)
    neg_log = logsumexp(np.where(Y, -np.inf, S), axis=1) - np.log(n_neg)
    _check_overflow(pos_log, neg_log)
    return np.exp(pos_log) + np.exp(neg_log)


def _lse_terms(S: np.ndarray, Y: np.ndarray, n_pos: np.ndarray, n_neg: np.ndarray, p: float) -> np.ndarray:
    neg_log = logsumexp(np.where(Y, -np.inf, S), axis=1, keepdims=True)
    log_delta = neg_log - S
    log_term = logsumexp(np.where(Y, p * log_delta, -np.inf), axis=1) / p - np.log(n_neg)
    _check_overflow(log_term)
    return np.exp(log_term)


def _surrogate_terms(S: np.ndarray, Y: np.ndarray, n_pos: np.ndarray, n_neg: np.ndarray, p: float) -> np.ndarray:
    lowest = np.where(Y, S, np.inf).min(axis=1)
    log_term = logsumexp(np.where(Y, -np.inf, S), axis=1) - lowest - np.log(n_neg)
    _check_overflow(log_term)
    return np.exp(log_term)


def _bottom_push_terms(S: np.ndarray, Y: np.ndarray, n_pos: np.ndarray, n_neg: np.ndarray, p: float) -> np.ndarray:
    lowest = np.where(Y, S, np.inf).min(axis=1, keepdims=True)
    return np.count_nonzero(~Y & (S >= lowest), axis=1) / n_neg


_TERMS: dict[str, Callable[..., np.ndarray]] = {
    "mtc": _mtc_terms,
    "lse": _lse_terms,
    "surrogate": _surrogate_terms,
    "bottom_push": _bottom_push_terms,
}


def _check_overflow(*logs: np.ndarray) -> None:
    for v in logs:
        if np.any(v > LOG_MAX) or np.any(np.isnan(v)):
            raise NumericalError("exponential loss overflows despite the log-domain guard")


def _chain(theta: ModelParams, tasks: PlaylistTasks, gW: np.ndarray) -> ModelParams:
    grad = ModelParams.zeros(theta.n_users, theta.n_playlists, theta.dim)
    np.add.at(grad.beta, tasks.playlists, gW)
    np.add.at(grad.alpha, tasks.owners, gW)
    grad.mu = gW.sum(axis=0)
    return grad


def _map_chunks(fn: Callable[[int, int], object], n: int, workers: int) -> list:
    bounds = [(lo, min(lo + CHUNK, n)) for lo in range(0, n, CHUNK)]
    if workers <= 1 or len(bounds) <= 1:
        return [fn(lo, hi) for lo, hi in bounds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda b: fn(*b), bounds))
