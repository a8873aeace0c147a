from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Corpus
from .errors import DataError, ModelFormatError, SchemaMismatchError
from .features import FeatureMatrix
from .losses import ModelParams, PlaylistTasks, ScoreGuard, mean_bottom_push_risk, mtc_risk_grad, regulariser
from .models import FeatureSchema, Hyperparams, OwlqnConfig, RecommendMode
from .owlqn import minimize

logger = logging.getLogger(__name__)

MAGIC = b"CSPLMTC\x00"
FORMAT_VERSION = 1


@dataclass(eq=False)
class TrainedModel:
    """Parameters of a trained MTC model plus what is needed to score with it."""

    theta: ModelParams
    hp: Hyperparams
    schema: FeatureSchema
    n_songs: int
    train_playlists: np.ndarray
    train_users: np.ndarray
    playlist_owner: np.ndarray
    user_attributes: np.ndarray
    summary: dict = field(default_factory=dict)

    @property
    def schema_hash(self) -> str:
        return self.schema.schema_hash()


@dataclass(frozen=True)
class Recommendation:
    songs: np.ndarray
    scores: np.ndarray
    mode: RecommendMode


def train(
    corpus: Corpus,
    X: FeatureMatrix,
    train_playlists: np.ndarray,
    hp: Hyperparams | None = None,
    cfg: OwlqnConfig | None = None,
    init_seed: int = 0,
    train_songs: np.ndarray | None = None,
    init_scale: float = 0.0,
    workers: int = 1,
) -> TrainedModel:
    """Minimise Omega(theta) + R_mtc(theta) over the training playlists with OWL-QN."""
    hp = hp or Hyperparams()
    cfg = cfg or OwlqnConfig()
    if X.n_songs != corpus.n_songs:
        raise DataError(f"feature matrix has {X.n_songs} rows, corpus has {corpus.n_songs} songs")

    tasks = PlaylistTasks.from_corpus(corpus, train_playlists, train_songs)
    U, N, D = corpus.n_users, corpus.n_playlists, X.dim
    theta0 = ModelParams.zeros(U, N, D)
    if init_scale > 0:
        rng = np.random.default_rng(init_seed)
        theta0 = ModelParams.from_vector(init_scale * rng.standard_normal(theta0.ravel().size), U, N, D)

    guard = ScoreGuard()

    def objective(vec: np.ndarray) -> tuple[float, np.ndarray]:
        theta = ModelParams.from_vector(vec, U, N, D)
        risk, grad = mtc_risk_grad(theta, X, tasks, hp.p, guard=guard, workers=workers)
        smooth, smooth_grad, _ = regulariser(theta, hp)
        return risk + smooth, grad.ravel() + smooth_grad.ravel()

    _, _, l1 = regulariser(theta0, hp)
    report = minimize(objective, l1, theta0.ravel(), cfg)
    theta = ModelParams.from_vector(report.x, U, N, D)
    if guard.clamped:
        logger.warning("clamped %d scores to [-%g, %g] during training", guard.clamped, guard.limit, guard.limit)

    summary = report.summary()
    summary.update(
        {
            "n_train_playlists": int(tasks.size),
            "n_train_songs": int(tasks.songs.size),
            "clamped_scores": guard.clamped,
            "zero_beta": int(np.count_nonzero(theta.beta[tasks.playlists] == 0)),
            "zero_mu": int(np.count_nonzero(theta.mu == 0)),
            "train_bottom_push_risk": mean_bottom_push_risk(theta, X, tasks, workers=workers),
        }
    )
    return TrainedModel(
        theta=theta,
        hp=hp,
        schema=X.schema,
        n_songs=X.n_songs,
        train_playlists=np.asarray(tasks.playlists, dtype=np.int64),
        train_users=np.unique(tasks.owners),
        playlist_owner=np.asarray(corpus.playlist_owner, dtype=np.int64),
        user_attributes=np.asarray(corpus.user_attributes, dtype=np.float64),
        summary=summary,
    )


def check_schema(model: TrainedModel, X: FeatureMatrix) -> None:
    if X.schema.schema_hash() != model.schema_hash:
        raise SchemaMismatchError("feature schema differs from the schema the model was trained with")


def score_cold_playlist(model: TrainedModel, X: FeatureMatrix, u: int) -> np.ndarray:
    """Scores of every song for a new playlist of training user u: (alpha_u + mu) . x_m."""
    check_schema(model, X)
    _require_training_user(model, u)
    return X.values @ (model.theta.alpha[u] + model.theta.mu)


def score_cold_user(model: TrainedModel, X: FeatureMatrix, attrs: np.ndarray, k: int = 10) -> np.ndarray:
    """Scores for a new user from the mean alpha of the k most cosine-similar training users."""
    check_schema(model, X)
    if k < 1:
        raise ValueError("k must be >= 1")
    if model.user_attributes.shape[1] == 0:
        raise DataError("no user attributes available; use score_cold_user_anonymous")
    attrs = np.asarray(attrs, dtype=np.float64)
    if attrs.shape != (model.user_attributes.shape[1],):
        raise DataError(f"expected {model.user_attributes.shape[1]} user attributes, got {attrs.shape}")
    nbrs = nearest_users(model, attrs, k)
    return X.values @ (model.theta.alpha[nbrs].mean(axis=0) + model.theta.mu)


def nearest_users(model: TrainedModel, attrs: np.ndarray, k: int) -> np.ndarray:
    users = model.train_users
    ref = model.user_attributes[users]
    norms = np.linalg.norm(ref, axis=1) * np.linalg.norm(attrs)
    with np.errstate(invalid="ignore", divide="ignore"):
        sims = np.where(norms > 0, (ref @ attrs) / norms, 0.0)
    order = np.lexsort((users, -sims))
    return users[order[:k]]


def score_cold_user_anonymous(model: TrainedModel, X: FeatureMatrix) -> np.ndarray:
    check_schema(model, X)
    return X.values @ model.theta.mu


def score_cold_song(model: TrainedModel, X_new: FeatureMatrix, u: int, i: int) -> np.ndarray:
    """Scores of new songs for training playlist i of user u: (alpha_u + beta_i + mu) . x."""
    check_schema(model, X_new)
    if not 0 <= i < model.playlist_owner.size or int(model.playlist_owner[i]) != u:
        raise DataError(f"playlist {i} is not owned by user {u}")
    if i not in set(model.train_playlists.tolist()):
        raise DataError(f"playlist {i} is not a training playlist")
    w = model.theta.alpha[u] + model.theta.beta[i] + model.theta.mu
    return X_new.values @ w


def recommend(
    scores: np.ndarray,
    K: int,
    mode: RecommendMode = RecommendMode.TOP_K,
    seed: int | np.random.Generator = 0,
    candidates: np.ndarray | None = None,
) -> Recommendation:
    """Top-K by (score desc, song asc), or K distinct songs drawn with softmax(score) probabilities."""
    scores = np.asarray(scores, dtype=np.float64)
    candidates = np.arange(scores.size) if candidates is None else np.asarray(candidates, dtype=np.int64)
    if K <= 0:
        raise ValueError("K must be positive")
    if K > scores.size:
        raise ValueError(f"K={K} exceeds the {scores.size} candidates")

    if RecommendMode(mode) == RecommendMode.TOP_K:
        picked = np.lexsort((candidates, -scores))[:K]
    else:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        # Gumbel-top-K draws K items without replacement, each draw proportional to exp(score)
        keys = scores + rng.gumbel(size=scores.size)
        picked = np.lexsort((candidates, -keys))[:K]
    return Recommendation(songs=candidates[picked], scores=scores[picked], mode=RecommendMode(mode))


def save_model(model: TrainedModel, path: str) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    theta = model.theta
    header = {
        "format_version": FORMAT_VERSION,
        "M": model.n_songs,
        "N": theta.n_playlists,
        "U": theta.n_users,
        "D": theta.dim,
        "A": int(model.user_attributes.shape[1]),
        "n_train_playlists": int(model.train_playlists.size),
        "n_train_users": int(model.train_users.size),
        "hp": model.hp.model_dump(),
        "schema_hash": model.schema_hash,
        "schema": model.schema.model_dump(mode="json"),
        "summary": model.summary,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with p.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(blob)))
        fh.write(blob)
        for arr in (theta.alpha, theta.beta, theta.mu, model.user_attributes):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        for arr in (model.train_playlists, model.train_users, model.playlist_owner):
            fh.write(np.ascontiguousarray(arr, dtype="<i8").tobytes())
    return p


def load_model(path: str) -> TrainedModel:
    p = Path(path)
    if not p.exists():
        raise DataError(f"file not found: {path}")
    raw = p.read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        raise ModelFormatError(f"{path}: not a model file (bad magic bytes)")
    offset = len(MAGIC)
    try:
        version, n_header = struct.unpack_from("<II", raw, offset)
    except struct.error as e:
        raise ModelFormatError(f"{path}: truncated model file") from e
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"{path}: model format version {version}, expected {FORMAT_VERSION}")
    offset += 8
    try:
        header = json.loads(raw[offset : offset + n_header].decode("utf-8"))
        U, N, D, A = header["U"], header["N"], header["D"], header["A"]
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as e:
        raise ModelFormatError(f"{path}: unreadable model header") from e
    offset += n_header

    def take(dtype: str, count: int, shape: tuple[int, ...]) -> np.ndarray:
        nonlocal offset
        arr = np.frombuffer(raw, dtype=dtype, count=count, offset=offset).reshape(shape)
        offset += arr.nbytes
        return arr.astype(dtype[1:] if dtype.startswith("<") else dtype).copy()

    try:
        alpha = take("<f8", U * D, (U, D))
        beta = take("<f8", N * D, (N, D))
        mu = take("<f8", D, (D,))
        attrs = take("<f8", U * A, (U, A))
        train_playlists = take("<i8", header["n_train_playlists"], (header["n_train_playlists"],))
        train_users = take("<i8", header["n_train_users"], (header["n_train_users"],))
        owners = take("<i8", N, (N,))
    except (ValueError, KeyError) as e:
        raise ModelFormatError(f"{path}: truncated model file") from e
    try:
        schema = FeatureSchema.model_validate(header["schema"])
    except (ValueError, KeyError) as e:
        raise ModelFormatError(f"{path}: unreadable model header") from e
    if schema.schema_hash() != header["schema_hash"]:
        raise ModelFormatError(f"{path}: stored schema does not match its hash")
    return TrainedModel(
        theta=ModelParams(alpha, beta, mu),
        hp=Hyperparams(**header["hp"]),
        schema=schema,
        n_songs=header["M"],
        train_playlists=train_playlists,
        train_users=train_users,
        playlist_owner=owners,
        user_attributes=attrs,
        summary=header["summary"],
    )


def _require_training_user(model: TrainedModel, u: int) -> None:
    if u not in set(model.train_users.tolist()):
        raise DataError(f"user {u} has no training playlists")
