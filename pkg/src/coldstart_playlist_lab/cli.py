from __future__ import annotations

import logging
from pathlib import Path
from typing import Callable

import typer
from pydantic import ValidationError
from rich import print
from rich.logging import RichHandler

from .config import load_config, write_default_config
from .corpus import Corpus, load_corpus
from .errors import ConfigError, DataError, LabError
from .evaluation import Scorer, evaluate, grid_search
from .features import FeatureMatrix, build_features, load_features, save_features
from .model import TrainedModel, load_model, recommend, save_model, train
from .models import Method, RecommendMode, RunConfig, Setting, SyntheticSpec
from .reporting import write_manifest, write_recommendations, write_report, write_training_summary
from .splits import SplitResult, load_split, make_split, save_split
from .synthetic import generate_synthetic, write_synthetic

app = typer.Typer(help="Cold-start playlist recommendation lab CLI")
logger = logging.getLogger(__name__)

MODEL_FILE = "model.bin"

# files a command wrote, and the corpus it read or generated
RunOutput = tuple[list[str], Corpus]


@app.callback()
def main(
    log_level: str = typer.Option("WARNING", "--log-level", help="DEBUG | INFO | WARNING | ERROR"),
):
    """Split, featurise, train, evaluate and recommend for cold-start playlists."""
    level = getattr(logging, log_level.upper(), None)
    if not isinstance(level, int):
        raise typer.BadParameter(f"unknown log level: {log_level}")
    logging.basicConfig(level=level, format="%(message)s", handlers=[RichHandler(show_path=False)], force=True)


def _topk(value: str) -> list[int]:
    try:
        return [int(k) for k in value.split(",") if k.strip()]
    except ValueError as e:
        raise ConfigError(f"--topk must be a comma-separated list of integers, got {value!r}") from e


def _floats(value: str | None) -> list[float]:
    if not value:
        return []
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigError(f"grid values must be comma-separated numbers, got {value!r}") from e


def _main(build: Callable[[], RunConfig]) -> None:
    """Build the config, run it and map errors to exit codes (1 config, 2 data)."""
    try:
        _execute(build())
    except (ConfigError, ValidationError) as e:
        typer.echo(f"Config error: {e}", err=True)
        raise typer.Exit(code=1) from e
    except DataError as e:
        typer.echo(f"Data error: {e}", err=True)
        raise typer.Exit(code=2) from e
    except LabError as e:
        typer.echo(f"Error: {e}", err=True)
        raise typer.Exit(code=1) from e


def _execute(cfg: RunConfig) -> None:
    try:
        handler = _COMMANDS[cfg.command]
    except KeyError:
        raise ConfigError(f"unknown command {cfg.command!r}; expected one of {sorted(_COMMANDS)}") from None
    logger.info("running %s (setting=%s, method=%s, seed=%d)", cfg.command, cfg.setting.value, cfg.method.value, cfg.seed)
    written, corpus = handler(cfg)
    write_manifest(cfg, cfg.out, written, corpus)
    print(f"[green]Done[/green] -> outputs written to [bold]{cfg.out}[/bold]")


def _corpus(cfg: RunConfig) -> Corpus:
    if not cfg.songs or not cfg.playlists:
        raise ConfigError("--songs and --playlists are required")
    return load_corpus(cfg.songs, cfg.playlists, cfg.users)


def _split(cfg: RunConfig, corpus: Corpus) -> SplitResult:
    if cfg.split_dir:
        split = load_split(cfg.split_dir, corpus)
        if split.setting != cfg.setting:
            raise ConfigError(f"split in {cfg.split_dir} is for {split.setting.value}, not {cfg.setting.value}")
        return split
    return make_split(corpus, cfg.split_spec())


def _features(cfg: RunConfig, corpus: Corpus, split: SplitResult) -> FeatureMatrix:
    if cfg.features_dir:
        X = load_features(cfg.features_dir)
        if X.schema.setting != split.setting:
            raise ConfigError(f"features in {cfg.features_dir} were built for {X.schema.setting.value}")
        return X
    return build_features(corpus, split.train_playlists, cfg.genres, cfg.embeddings, split.setting, split.train_songs)


def _model(cfg: RunConfig, corpus: Corpus, split: SplitResult, X: FeatureMatrix) -> TrainedModel:
    if cfg.model_path:
        return load_model(cfg.model_path)
    return train(
        corpus,
        X,
        split.train_playlists,
        cfg.hp,
        cfg.optimiser,
        init_seed=cfg.seed,
        train_songs=split.train_songs,
        workers=cfg.threads,
    )


def _run_synth(cfg: RunConfig) -> RunOutput:
    spec = cfg.synthetic or SyntheticSpec(seed=cfg.seed)
    data = generate_synthetic(spec)
    paths = write_synthetic(data, cfg.out)
    print(
        f"[cyan]Synthetic corpus[/cyan]: {data.corpus.n_users} users, "
        f"{data.corpus.n_playlists} playlists, {data.corpus.n_songs} songs"
    )
    return [p.name for p in paths.values()], data.corpus


def _run_split(cfg: RunConfig) -> RunOutput:
    corpus = _corpus(cfg)
    split = make_split(corpus, cfg.split_spec())
    for msg in split.integrity:
        print(f"[yellow]{msg}[/yellow]")
    save_split(split, corpus, cfg.out)
    print(f"[cyan]Split[/cyan]: {split.train_playlists.size} train / {split.test_playlists.size} test playlists")
    return ["train_playlists.txt", "test_playlists.txt", "held_songs.txt", "split.json"], corpus


def _run_features(cfg: RunConfig) -> RunOutput:
    corpus = _corpus(cfg)
    split = _split(cfg, corpus)
    X = build_features(corpus, split.train_playlists, cfg.genres, cfg.embeddings, split.setting, split.train_songs)
    save_features(X, cfg.out)
    return ["features.npy", "features.schema.json"], corpus


def _run_train(cfg: RunConfig) -> RunOutput:
    corpus = _corpus(cfg)
    split = _split(cfg, corpus)
    X = _features(cfg, corpus, split)
    model = _model(cfg, corpus, split, X)
    save_model(model, str(Path(cfg.out) / MODEL_FILE))
    print(f"[cyan]Training[/cyan]: {model.summary['termination']} after {model.summary['iterations']} iterations")
    return [MODEL_FILE, *write_training_summary(model, cfg.out)], corpus


def _run_eval(cfg: RunConfig) -> RunOutput:
    corpus = _corpus(cfg)
    split = _split(cfg, corpus)
    X = model = None
    if cfg.method == Method.MTC:
        X = _features(cfg, corpus, split)
        model = _model(cfg, corpus, split, X)
    report = evaluate(cfg.method, corpus, split, X, model, topk=cfg.topk, knn=cfg.knn)
    print(f"[cyan]{report.method.value}[/cyan] on {report.setting.value}: AUC {report.auc:.4f}")
    return write_report(report, cfg.out), corpus


def _run_recommend(cfg: RunConfig) -> RunOutput:
    corpus = _corpus(cfg)
    split = _split(cfg, corpus)
    X = model = None
    if cfg.method == Method.MTC:
        X = _features(cfg, corpus, split)
        model = _model(cfg, corpus, split, X)
    scorer = Scorer(cfg.method, corpus, split, X, model, cfg.knn)

    if split.setting == Setting.COLD_SONGS:
        if not cfg.playlist:
            raise ConfigError("--playlist is required in the cold songs setting")
        i = corpus.playlist_index(cfg.playlist)
        if i not in set(split.train_playlists.tolist()):
            raise DataError(f"playlist {cfg.playlist} has no seed songs in the training split")
        u = int(corpus.playlist_owner[i])
    else:
        if not cfg.user:
            raise ConfigError("--user is required in the cold playlists and cold users settings")
        u, i = corpus.user_index(cfg.user), None

    scores = scorer.query(u, i)
    K = min(cfg.k, scores.size)
    rec = recommend(scores, K, cfg.mode, cfg.seed, candidates=split.candidates)
    return write_recommendations(rec, corpus, cfg.out), corpus


def _run_grid(cfg: RunConfig) -> RunOutput:
    corpus = _corpus(cfg)
    split = _split(cfg, corpus)
    X = _features(cfg, corpus, split)
    table = grid_search(
        corpus,
        split,
        X,
        cfg.grid_lambda1 or [cfg.hp.lambda1],
        cfg.grid_lambda2 or [cfg.hp.lambda2],
        cfg.grid_lambda3 or [cfg.hp.lambda3],
        cfg.grid_p or [cfg.hp.p],
        cfg.optimiser,
        knn=cfg.knn,
        topk=cfg.topk,
        workers=cfg.threads,
    )
    Path(cfg.out).mkdir(parents=True, exist_ok=True)
    table.to_csv(Path(cfg.out) / "grid.csv", index=False)
    return ["grid.csv"], corpus


_COMMANDS: dict[str, Callable[[RunConfig], RunOutput]] = {
    "synth": _run_synth,
    "split": _run_split,
    "features": _run_features,
    "train": _run_train,
    "eval": _run_eval,
    "recommend": _run_recommend,
    "grid": _run_grid,
}


SongsOpt = typer.Option(None, "--songs", help="Songs CSV (song_id,artist_id,release_year,metadata...)")
PlaylistsOpt = typer.Option(None, "--playlists", help="Playlists CSV (playlist_id,user_id,song;song;...)")
UsersOpt = typer.Option(None, "--users", help="Optional users CSV (user_id,attributes...)")
SplitDirOpt = typer.Option(None, "--split-dir", help="Directory written by `split`; split on the fly if omitted")
FeaturesDirOpt = typer.Option(None, "--features-dir", help="Directory written by `features`; built on the fly if omitted")
SettingOpt = typer.Option(Setting.COLD_PLAYLISTS, "--setting", help="cold_playlists | cold_users | cold_songs")
SeedOpt = typer.Option(0, "--seed", help="Seed for splits, initialisation and sampling")
OutOpt = typer.Option("outputs", "--out", help="Output directory")


@app.command()
def synth(
    n_users: int = typer.Option(50, help="Number of users"),
    n_playlists: int = typer.Option(200, help="Number of playlists"),
    n_songs: int = typer.Option(500, help="Number of songs (at most 2000)"),
    dim: int = typer.Option(20, help="Feature dimension including the bias column"),
    playlist_size: int = typer.Option(10, help="Songs per playlist"),
    noise: float = typer.Option(0.05, help="Probability a playlist member is swapped for a random song"),
    seed: int = SeedOpt,
    out: str = OutOpt,
):
    """Generate a synthetic corpus with a planted multitask linear model."""
    _main(
        lambda: RunConfig(
            command="synth",
            seed=seed,
            out=out,
            synthetic=SyntheticSpec(
                n_users=n_users,
                n_playlists=n_playlists,
                n_songs=n_songs,
                dim=dim,
                playlist_size=playlist_size,
                noise=noise,
                seed=seed,
            ),
        )
    )


@app.command()
def split(
    songs: str | None = SongsOpt,
    playlists: str | None = PlaylistsOpt,
    users: str | None = UsersOpt,
    setting: Setting = SettingOpt,
    user_fraction: float | None = typer.Option(None, help="Share of users contributing test playlists"),
    n_new_songs: int | None = typer.Option(None, help="Cold songs: number of latest songs to hold"),
    min_song_support: int = typer.Option(5, help="Cold playlists: minimum playlists per test song"),
    seed: int = SeedOpt,
    out: str = OutOpt,
):
    """Split a corpus into training and test playlists for one setting."""
    _main(
        lambda: RunConfig(
            command="split",
            songs=songs,
            playlists=playlists,
            users=users,
            setting=setting,
            user_fraction=user_fraction,
            n_new_songs=n_new_songs,
            min_song_support=min_song_support,
            seed=seed,
            out=out,
        )
    )


@app.command()
def features(
    songs: str | None = SongsOpt,
    playlists: str | None = PlaylistsOpt,
    users: str | None = UsersOpt,
    split_dir: str | None = SplitDirOpt,
    setting: Setting = SettingOpt,
    genres: str | None = typer.Option(None, help="Optional song genre CSV"),
    embeddings: str | None = typer.Option(None, help="Optional artist embedding CSV"),
    seed: int = SeedOpt,
    out: str = OutOpt,
):
    """Build the song feature matrix from training data."""
    _main(
        lambda: RunConfig(
            command="features",
            songs=songs,
            playlists=playlists,
            users=users,
            split_dir=split_dir,
            setting=setting,
            genres=genres,
            embeddings=embeddings,
            seed=seed,
            out=out,
        )
    )


@app.command("train")
def train_cmd(
    songs: str | None = SongsOpt,
    playlists: str | None = PlaylistsOpt,
    users: str | None = UsersOpt,
    split_dir: str | None = SplitDirOpt,
    features_dir: str | None = FeaturesDirOpt,
    setting: Setting = SettingOpt,
    lambda1: float = typer.Option(1e-4, "--lambda1", help="L2 weight on user weights"),
    lambda2: float = typer.Option(1e-2, "--lambda2", help="L1 weight on playlist weights"),
    lambda3: float = typer.Option(1e-4, "--lambda3", help="L1 weight on shared weights"),
    p: float = typer.Option(1.0, "--p", help="Push exponent"),
    max_iters: int = typer.Option(500, help="Optimiser iteration cap"),
    threads: int = typer.Option(1, "--threads", help="Worker threads for loss evaluation"),
    seed: int = SeedOpt,
    out: str = OutOpt,
):
    """Train the MTC model with OWL-QN."""
    _main(
        lambda: RunConfig(
            command="train",
            songs=songs,
            playlists=playlists,
            users=users,
            split_dir=split_dir,
            features_dir=features_dir,
            setting=setting,
            hp={"lambda1": lambda1, "lambda2": lambda2, "lambda3": lambda3, "p": p},
            optimiser={"max_iters": max_iters},
            threads=threads,
            seed=seed,
            out=out,
        )
    )


@app.command("eval")
def eval_cmd(
    songs: str | None = SongsOpt,
    playlists: str | None = PlaylistsOpt,
    users: str | None = UsersOpt,
    split_dir: str | None = SplitDirOpt,
    features_dir: str | None = FeaturesDirOpt,
    model: str | None = typer.Option(None, "--model", help="Trained model file; trained on the fly if omitted"),
    setting: Setting = SettingOpt,
    method: Method = typer.Option(Method.MTC, "--method", help="mtc | poprank | sagh | cagh"),
    lambda1: float = typer.Option(1e-4, "--lambda1"),
    lambda2: float = typer.Option(1e-2, "--lambda2"),
    lambda3: float = typer.Option(1e-4, "--lambda3"),
    p: float = typer.Option(1.0, "--p"),
    knn: int = typer.Option(10, "--knn", help="Neighbours for cold users"),
    topk: str = typer.Option("5,10,20,50,100", "--topk", help="Comma-separated K values"),
    threads: int = typer.Option(1, "--threads"),
    seed: int = SeedOpt,
    out: str = OutOpt,
):
    """Evaluate a method; writes report.txt (key=value), report.json and curves.csv.

    report.json fields: method, setting, n_test_playlists, auc, hitrate (K ->
    value), novelty (K -> value), spread, per_playlist_auc.
    """
    _main(
        lambda: RunConfig(
            command="eval",
            songs=songs,
            playlists=playlists,
            users=users,
            split_dir=split_dir,
            features_dir=features_dir,
            model_path=model,
            setting=setting,
            method=method,
            hp={"lambda1": lambda1, "lambda2": lambda2, "lambda3": lambda3, "p": p},
            knn=knn,
            topk=_topk(topk),
            threads=threads,
            seed=seed,
            out=out,
        )
    )


@app.command("recommend")
def recommend_cmd(
    songs: str | None = SongsOpt,
    playlists: str | None = PlaylistsOpt,
    users: str | None = UsersOpt,
    split_dir: str | None = SplitDirOpt,
    features_dir: str | None = FeaturesDirOpt,
    model: str | None = typer.Option(None, "--model", help="Trained model file; trained on the fly if omitted"),
    setting: Setting = SettingOpt,
    method: Method = typer.Option(Method.MTC, "--method"),
    user: str | None = typer.Option(None, "--user", help="User id (cold playlists / cold users)"),
    playlist: str | None = typer.Option(None, "--playlist", help="Playlist id (cold songs)"),
    k: int = typer.Option(10, "--k", help="Number of songs to recommend"),
    mode: RecommendMode = typer.Option(RecommendMode.TOP_K, "--mode", help="top-k | sampled"),
    knn: int = typer.Option(10, "--knn"),
    seed: int = SeedOpt,
    out: str = OutOpt,
):
    """Recommend K songs for a user (or extend a playlist with new songs)."""
    _main(
        lambda: RunConfig(
            command="recommend",
            songs=songs,
            playlists=playlists,
            users=users,
            split_dir=split_dir,
            features_dir=features_dir,
            model_path=model,
            setting=setting,
            method=method,
            user=user,
            playlist=playlist,
            k=k,
            mode=mode,
            knn=knn,
            seed=seed,
            out=out,
        )
    )


@app.command()
def grid(
    songs: str | None = SongsOpt,
    playlists: str | None = PlaylistsOpt,
    users: str | None = UsersOpt,
    split_dir: str | None = SplitDirOpt,
    features_dir: str | None = FeaturesDirOpt,
    setting: Setting = SettingOpt,
    lambda1: str | None = typer.Option(None, "--lambda1", help="Comma-separated values"),
    lambda2: str | None = typer.Option(None, "--lambda2", help="Comma-separated values"),
    lambda3: str | None = typer.Option(None, "--lambda3", help="Comma-separated values"),
    p: str | None = typer.Option(None, "--p", help="Comma-separated values"),
    knn: int = typer.Option(10, "--knn"),
    topk: str = typer.Option("5,10,20,50,100", "--topk"),
    threads: int = typer.Option(1, "--threads"),
    seed: int = SeedOpt,
    out: str = OutOpt,
):
    """Grid search over lambda1/2/3 and p; writes grid.csv ranked by test AUC."""
    _main(
        lambda: RunConfig(
            command="grid",
            songs=songs,
            playlists=playlists,
            users=users,
            split_dir=split_dir,
            features_dir=features_dir,
            setting=setting,
            grid_lambda1=_floats(lambda1),
            grid_lambda2=_floats(lambda2),
            grid_lambda3=_floats(lambda3),
            grid_p=_floats(p),
            knn=knn,
            topk=_topk(topk),
            threads=threads,
            seed=seed,
            out=out,
        )
    )


@app.command("run-config")
def run_config(
    config: str = typer.Option(..., "--config", help="YAML config or run_manifest.json"),
):
    """Run a command from a YAML config file or a previous run manifest."""
    _main(lambda: load_config(config))


@app.command("init-config")
def init_config(
    output: str = typer.Option("coldstart_playlist.yaml", "--output", help="Where to write starter config"),
    force: bool = typer.Option(False, help="Overwrite existing file"),
):
    """Generate a starter YAML config."""
    try:
        p = write_default_config(output, force=force)
    except ConfigError as e:
        raise typer.BadParameter(str(e)) from e

    print(f"[green]Config template created[/green]: {p}")


if __name__ == "__main__":
    app()
