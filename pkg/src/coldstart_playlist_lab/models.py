from __future__ import annotations

import hashlib
from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class Setting(str, Enum):
    COLD_PLAYLISTS = "cold_playlists"
    COLD_USERS = "cold_users"
    COLD_SONGS = "cold_songs"


class Method(str, Enum):
    MTC = "mtc"
    POPRANK = "poprank"
    SAGH = "sagh"
    CAGH = "cagh"


class RecommendMode(str, Enum):
    TOP_K = "top-k"
    SAMPLED = "sampled"


class ColumnOrigin(str, Enum):
    METADATA = "metadata"
    GENRE_ONEHOT = "genre_onehot"
    ARTIST_EMBEDDING = "artist_embedding"
    SONG_POPULARITY = "song_popularity"
    ARTIST_POPULARITY = "artist_popularity"
    BIAS = "bias"


class Hyperparams(BaseModel):
    """Regularisation constants and push exponent of the MTC objective."""

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    lambda1: float = Field(1e-4, ge=0.0)
    lambda2: float = Field(1e-2, ge=0.0)
    lambda3: float = Field(1e-4, ge=0.0)
    p: float = Field(1.0, gt=0.0)


class OwlqnConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    memory: int = Field(10, ge=1)
    max_iters: int = Field(500, ge=1)
    grad_tol: float = Field(1e-6, gt=0.0)
    sufficient_decrease: float = Field(1e-4, gt=0.0, lt=1.0)
    shrink: float = Field(0.5, gt=0.0, lt=1.0)
    max_line_search_steps: int = Field(50, ge=1)


class SplitSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    setting: Setting
    user_fraction: float | None = None
    playlist_fraction: float = Field(0.5, gt=0.0, le=1.0)
    n_new_songs: int | None = Field(None, ge=1)
    min_song_support: int = Field(5, ge=1)
    seed: int = 0

    @model_validator(mode="before")
    @classmethod
    def _default_user_fraction(cls, data: object) -> object:
        if isinstance(data, dict) and data.get("user_fraction") is None and "setting" in data:
            data = dict(data)
            data["user_fraction"] = 0.30 if Setting(data["setting"]) == Setting.COLD_USERS else 0.20
        return data

    @field_validator("user_fraction")
    @classmethod
    def _fraction_range(cls, v: float | None) -> float | None:
        if v is not None and not 0.0 < v < 1.0:
            raise ValueError("user_fraction must be in (0, 1)")
        return v


class SyntheticSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    n_users: int = Field(50, ge=1)
    n_playlists: int = Field(200, ge=1)
    n_songs: int = Field(500, ge=2, le=2000)
    dim: int = Field(20, ge=2)
    playlist_size: int = Field(10, ge=1)
    noise: float = Field(0.05, ge=0.0, lt=1.0)
    n_artists: int | None = Field(None, ge=1)
    n_taste_groups: int = Field(5, ge=1)
    attr_dim: int = Field(6, ge=1)
    seed: int = 0

    @model_validator(mode="after")
    def _check_sizes(self) -> "SyntheticSpec":
        if self.n_playlists < self.n_users:
            raise ValueError("n_playlists must be >= n_users (every user owns a playlist)")
        if self.playlist_size >= self.n_songs:
            raise ValueError("playlist_size must be smaller than n_songs")
        return self


class ColumnSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    origin: ColumnOrigin
    center: float = 0.0
    scale: float = 1.0
    standardised: bool = False


class FeatureSchema(BaseModel):
    """Ordered description of the song feature columns."""

    model_config = ConfigDict(frozen=True)

    setting: Setting
    columns: list[ColumnSpec]

    @model_validator(mode="after")
    def _check_columns(self) -> "FeatureSchema":
        origins = [c.origin for c in self.columns]
        if origins.count(ColumnOrigin.BIAS) != 1:
            raise ValueError("feature schema needs exactly one bias column")
        if self.setting == Setting.COLD_SONGS and ColumnOrigin.SONG_POPULARITY in origins:
            raise ValueError("song popularity is not a feature in the cold songs setting")
        return self

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def schema_hash(self) -> str:
        return hashlib.sha256(self.model_dump_json().encode("utf-8")).hexdigest()


class EvalReport(BaseModel):
    method: Method
    setting: Setting
    n_test_playlists: int
    auc: float = Field(ge=0.0, le=1.0)
    hitrate: dict[int, float]
    novelty: dict[int, float]
    spread: float = Field(ge=0.0)
    per_playlist_auc: list[float]

    @field_validator("hitrate")
    @classmethod
    def _hitrate_monotone(cls, v: dict[int, float]) -> dict[int, float]:
        values = [v[k] for k in sorted(v)]
        if any(b < a - 1e-12 for a, b in zip(values, values[1:])):
            raise ValueError("hitrate must be non-decreasing in K")
        return v


class RunConfig(BaseModel):
    """Everything one CLI invocation needs; also what a run manifest stores."""

    model_config = ConfigDict(extra="forbid")

    command: str
    songs: str | None = None
    playlists: str | None = None
    users: str | None = None
    genres: str | None = None
    embeddings: str | None = None
    split_dir: str | None = None
    features_dir: str | None = None
    model_path: str | None = None
    out: str = "outputs"

    setting: Setting = Setting.COLD_PLAYLISTS
    method: Method = Method.MTC
    hp: Hyperparams = Hyperparams()
    optimiser: OwlqnConfig = OwlqnConfig()
    knn: int = Field(10, ge=1)
    topk: list[int] = Field(default_factory=lambda: [5, 10, 20, 50, 100])
    seed: int = 0
    threads: int = Field(1, ge=1)

    user_fraction: float | None = None
    n_new_songs: int | None = None
    min_song_support: int = 5
    synthetic: SyntheticSpec | None = None

    user: str | None = None
    playlist: str | None = None
    k: int = Field(10, ge=1)
    mode: RecommendMode = RecommendMode.TOP_K

    grid_lambda1: list[float] = Field(default_factory=list)
    grid_lambda2: list[float] = Field(default_factory=list)
    grid_lambda3: list[float] = Field(default_factory=list)
    grid_p: list[float] = Field(default_factory=list)

    @field_validator("topk")
    @classmethod
    def _topk_sorted(cls, v: list[int]) -> list[int]:
        if not v:
            raise ValueError("topk list must not be empty")
        if any(k < 1 for k in v):
            raise ValueError("topk values must be >= 1")
        if v != sorted(set(v)):
            raise ValueError("topk list must be sorted ascending without duplicates")
        return v

    def split_spec(self) -> SplitSpec:
        return SplitSpec(
            setting=self.setting,
            user_fraction=self.user_fraction,
            n_new_songs=self.n_new_songs,
            min_song_support=self.min_song_support,
            seed=self.seed,
        )
