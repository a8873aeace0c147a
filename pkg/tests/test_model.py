import numpy as np
import pytest

from coldstart_playlist_lab.corpus import load_corpus
from coldstart_playlist_lab.errors import DataError, ModelFormatError, SchemaMismatchError
from coldstart_playlist_lab.losses import ModelParams, PlaylistTasks, mtc_risk_grad
from coldstart_playlist_lab.model import (
    MAGIC,
    TrainedModel,
    load_model,
    nearest_users,
    recommend,
    save_model,
    score_cold_playlist,
    score_cold_song,
    score_cold_user,
    score_cold_user_anonymous,
    train,
)
from coldstart_playlist_lab.features import FeatureMatrix
from coldstart_playlist_lab.models import FeatureSchema, Hyperparams, OwlqnConfig, RecommendMode, Setting
from coldstart_playlist_lab.owlqn import minimize
from conftest import plain_features


def _manual_model(X, owners, attrs, train_playlists=None, seed=0):
    rng = np.random.default_rng(seed)
    U, N, D = attrs.shape[0], owners.size, X.dim
    theta = ModelParams(rng.standard_normal((U, D)), rng.standard_normal((N, D)), rng.standard_normal(D))
    train_playlists = np.arange(N) if train_playlists is None else np.asarray(train_playlists)
    return TrainedModel(
        theta=theta,
        hp=Hyperparams(),
        schema=X.schema,
        n_songs=X.n_songs,
        train_playlists=train_playlists,
        train_users=np.unique(owners[train_playlists]),
        playlist_owner=owners,
        user_attributes=attrs,
    )


@pytest.fixture(scope="module")
def trained(small_synthetic):
    data = small_synthetic
    return train(data.corpus, data.features, np.arange(data.corpus.n_playlists), cfg=OwlqnConfig(max_iters=60))


def test_train_reports_summary(trained, small_synthetic):
    summary = trained.summary
    assert summary["n_train_playlists"] == small_synthetic.corpus.n_playlists
    assert summary["termination"] in {"converged", "max_iters", "line_search_failure"}
    trace = summary["trace"]
    assert trace[-1] < trace[0]
    assert all(b <= a for a, b in zip(trace, trace[1:]))
    assert 0.0 <= summary["train_bottom_push_risk"] <= 1.0
    assert trained.theta.alpha.shape == (small_synthetic.corpus.n_users, small_synthetic.features.dim)


def test_training_beats_zero_model_on_its_own_playlists(trained, small_synthetic):
    from coldstart_playlist_lab.corpus import membership
    from coldstart_playlist_lab.metrics import auc

    corpus, X = small_synthetic.corpus, small_synthetic.features
    aucs = []
    for i in range(corpus.n_playlists):
        w = trained.theta.weights(corpus.playlist_owner[[i]], np.array([i]))[0]
        aucs.append(auc(X.values @ w, membership(corpus, i)))
    assert np.mean(aucs) > 0.8


def test_save_load_round_trip(tmp_path, trained):
    path = tmp_path / "model.bin"
    save_model(trained, str(path))
    loaded = load_model(str(path))
    np.testing.assert_array_equal(loaded.theta.ravel(), trained.theta.ravel())
    np.testing.assert_array_equal(loaded.train_users, trained.train_users)
    assert loaded.hp == trained.hp
    assert loaded.schema_hash == trained.schema_hash

    again = tmp_path / "again.bin"
    save_model(loaded, str(again))
    assert again.read_bytes() == path.read_bytes()


def test_load_rejects_corrupt_files(tmp_path, trained):
    path = tmp_path / "model.bin"
    save_model(trained, str(path))
    raw = path.read_bytes()

    bad_magic = tmp_path / "magic.bin"
    bad_magic.write_bytes(b"NOTMODEL" + raw[len(MAGIC):])
    with pytest.raises(ModelFormatError, match="magic"):
        load_model(str(bad_magic))

    bad_version = tmp_path / "version.bin"
    bad_version.write_bytes(raw[: len(MAGIC)] + (99).to_bytes(4, "little") + raw[len(MAGIC) + 4 :])
    with pytest.raises(ModelFormatError, match="version 99"):
        load_model(str(bad_version))

    truncated = tmp_path / "short.bin"
    truncated.write_bytes(raw[:-16])
    with pytest.raises(ModelFormatError, match="truncated"):
        load_model(str(truncated))

    stub = tmp_path / "stub.bin"
    stub.write_bytes(raw[: len(MAGIC) + 3])
    with pytest.raises(ModelFormatError, match="truncated"):
        load_model(str(stub))

    garbled = tmp_path / "garbled.bin"
    start = len(MAGIC) + 8
    garbled.write_bytes(raw[:start] + b"X" + raw[start + 1 :])
    with pytest.raises(ModelFormatError, match="header"):
        load_model(str(garbled))

    with pytest.raises(DataError, match="file not found"):
        load_model(str(tmp_path / "missing.bin"))


def test_cold_playlist_scores_use_user_and_shared_weights():
    X = plain_features(np.column_stack([np.arange(5.0), np.ones(5)]))
    owners = np.array([0, 0, 1])
    model = _manual_model(X, owners, np.zeros((3, 0)), train_playlists=[0, 1])
    np.testing.assert_allclose(score_cold_playlist(model, X, 0), X.values @ (model.theta.alpha[0] + model.theta.mu))
    with pytest.raises(DataError, match="no training playlists"):
        score_cold_playlist(model, X, 1)


def test_schema_mismatch_is_rejected():
    X = plain_features(np.column_stack([np.arange(5.0), np.ones(5)]))
    model = _manual_model(X, np.array([0]), np.zeros((1, 0)))
    other = FeatureMatrix(X.values, FeatureSchema(setting=Setting.COLD_USERS, columns=X.schema.columns))
    with pytest.raises(SchemaMismatchError):
        score_cold_playlist(model, other, 0)


def test_cold_user_scores_average_nearest_neighbours():
    X = plain_features(np.column_stack([np.arange(4.0), np.ones(4)]))
    attrs = np.array([[1.0, 0.0], [0.9, 0.1], [0.0, 1.0], [1.0, 0.0]])
    owners = np.array([0, 1, 2, 3])
    model = _manual_model(X, owners, attrs)

    # users 0 and 3 tie on similarity; the lower index wins
    np.testing.assert_array_equal(nearest_users(model, np.array([2.0, 0.0]), 1), [0])
    np.testing.assert_array_equal(nearest_users(model, np.array([2.0, 0.0]), 3), [0, 3, 1])

    expected = X.values @ (model.theta.alpha[[0, 3]].mean(axis=0) + model.theta.mu)
    np.testing.assert_allclose(score_cold_user(model, X, np.array([5.0, 0.0]), k=2), expected)

    with pytest.raises(DataError):
        score_cold_user(model, X, np.array([1.0, 0.0, 0.0]))


def test_anonymous_cold_user_uses_shared_weights():
    X = plain_features(np.column_stack([np.arange(4.0), np.ones(4)]))
    model = _manual_model(X, np.array([0]), np.zeros((1, 0)))
    np.testing.assert_allclose(score_cold_user_anonymous(model, X), X.values @ model.theta.mu)
    with pytest.raises(DataError, match="no user attributes"):
        score_cold_user(model, X, np.zeros(0))


def test_cold_song_scores_for_a_training_playlist():
    X = plain_features(np.column_stack([np.arange(3.0), np.ones(3)]))
    owners = np.array([0, 1])
    model = _manual_model(X, owners, np.zeros((2, 0)), train_playlists=[0])
    theta = model.theta
    np.testing.assert_allclose(score_cold_song(model, X, 0, 0), X.values @ (theta.alpha[0] + theta.beta[0] + theta.mu))
    with pytest.raises(DataError, match="not owned"):
        score_cold_song(model, X, 1, 0)
    with pytest.raises(DataError, match="not a training playlist"):
        score_cold_song(model, X, 1, 1)


def test_recommend_top_k_breaks_ties_by_song_index():
    rec = recommend(np.array([1.0, 3.0, 3.0, 0.0]), 2)
    assert rec.songs.tolist() == [1, 2]
    assert rec.scores.tolist() == [3.0, 3.0]

    rec = recommend(np.array([1.0, 3.0, 2.0]), 2, candidates=np.array([10, 20, 30]))
    assert rec.songs.tolist() == [20, 30]


def test_recommend_rejects_bad_k():
    with pytest.raises(ValueError):
        recommend(np.zeros(3), 0)
    with pytest.raises(ValueError):
        recommend(np.zeros(3), 4)


def test_sampled_recommendations_are_distinct_and_seeded():
    scores = np.linspace(0.0, 2.0, 20)
    a = recommend(scores, 10, RecommendMode.SAMPLED, seed=3)
    b = recommend(scores, 10, RecommendMode.SAMPLED, seed=3)
    assert a.songs.tolist() == b.songs.tolist()
    assert len(set(a.songs.tolist())) == 10


def test_sampled_frequencies_follow_softmax():
    rng = np.random.default_rng(11)
    n = 5000
    counts = np.zeros(5)
    for _ in range(n):
        counts[recommend(np.zeros(5), 1, "sampled", seed=rng).songs[0]] += 1
    sigma = np.sqrt(0.2 * 0.8 / n)
    assert np.all(np.abs(counts / n - 0.2) < 4 * sigma)


def test_training_is_deterministic(small_synthetic):
    corpus, X = small_synthetic.corpus, small_synthetic.features
    cfg = OwlqnConfig(max_iters=20)
    a = train(corpus, X, np.arange(30), cfg=cfg)
    b = train(corpus, X, np.arange(30), cfg=cfg)
    assert a.theta.ravel().tobytes() == b.theta.ravel().tobytes()
    assert a.summary["trace"] == b.summary["trace"]


def test_random_initialisation_is_seeded(small_synthetic):
    corpus, X = small_synthetic.corpus, small_synthetic.features
    cfg = OwlqnConfig(max_iters=3)
    zero = train(corpus, X, np.arange(30), cfg=cfg)
    a = train(corpus, X, np.arange(30), cfg=cfg, init_scale=0.01, init_seed=1)
    b = train(corpus, X, np.arange(30), cfg=cfg, init_scale=0.01, init_seed=1)
    c = train(corpus, X, np.arange(30), cfg=cfg, init_scale=0.01, init_seed=2)
    # at theta = 0 both exponential sums average to 1
    assert zero.summary["trace"][0] == pytest.approx(2.0)
    assert a.summary["trace"] == b.summary["trace"]
    assert a.summary["trace"][0] != zero.summary["trace"][0]
    assert a.summary["trace"][0] != c.summary["trace"][0]


def test_large_l1_weights_zero_playlist_and_shared_weights(small_synthetic):
    corpus, X = small_synthetic.corpus, small_synthetic.features
    hp = Hyperparams(lambda2=1e3, lambda3=1e3)
    model = train(corpus, X, np.arange(corpus.n_playlists), hp=hp, cfg=OwlqnConfig(max_iters=30))
    assert np.abs(model.theta.beta).sum() == 0.0
    assert np.abs(model.theta.mu).sum() == 0.0
    assert model.summary["zero_mu"] == X.dim
    assert np.abs(model.theta.alpha).sum() > 0.0


def test_default_regularisation_lets_user_weights_carry_the_fit(small_synthetic):
    corpus, X = small_synthetic.corpus, small_synthetic.features
    model = train(corpus, X, np.arange(corpus.n_playlists), cfg=OwlqnConfig(max_iters=200))
    assert np.abs(model.theta.alpha).sum() > np.abs(model.theta.beta).sum()


def test_unused_weights_do_not_move_scores():
    X = plain_features(np.column_stack([np.arange(5.0), np.ones(5)]))
    model = _manual_model(X, np.array([0, 0, 1]), np.zeros((2, 0)))
    new_playlist = score_cold_playlist(model, X, 0)
    anonymous = score_cold_user_anonymous(model, X)
    rng = np.random.default_rng(5)

    model.theta.beta += rng.standard_normal(model.theta.beta.shape)
    np.testing.assert_array_equal(score_cold_playlist(model, X, 0), new_playlist)
    model.theta.alpha += rng.standard_normal(model.theta.alpha.shape)
    np.testing.assert_array_equal(score_cold_user_anonymous(model, X), anonymous)


def test_top_k_ignores_a_constant_shift():
    scores = np.random.default_rng(2).integers(0, 5, size=30).astype(np.float64)
    assert recommend(scores, 10).songs.tolist() == recommend(scores + 100.0, 10).songs.tolist()


ALIAS_SONGS = "song_id,artist_id,release_year,x\n" + "".join(f"s{m},a{m % 2},2000,{m}\n" for m in range(8))
# no playlist is a contiguous run of x, so every per-playlist optimum is finite
ALIAS_PLAYLISTS = "playlist_id,user_id,songs\np1,u1,s0;s3;s5\np2,u2,s1;s2;s6\np3,u3,s2;s4;s7\n"


def test_one_playlist_per_user_matches_independent_weight_vectors(tmp_path):
    songs = tmp_path / "songs.csv"
    playlists = tmp_path / "playlists.csv"
    songs.write_text(ALIAS_SONGS, encoding="utf-8")
    playlists.write_text(ALIAS_PLAYLISTS, encoding="utf-8")
    corpus = load_corpus(str(songs), str(playlists))
    X = plain_features(np.column_stack([(np.arange(8.0) - 3.5) / 2.0, np.ones(8)]))
    tight = OwlqnConfig(max_iters=2000, grad_tol=1e-10)

    joint = train(corpus, X, np.arange(3), hp=Hyperparams(lambda1=0.0, lambda2=0.0, lambda3=0.0), cfg=tight)
    for i in range(3):
        tasks = PlaylistTasks.from_corpus(corpus, np.array([i]))

        def objective(w, tasks=tasks):
            theta = ModelParams(np.zeros((3, 2)), np.zeros((3, 2)), w)
            risk, grad = mtc_risk_grad(theta, X, tasks, 1.0)
            return risk, grad.mu

        single = minimize(objective, np.zeros(2), np.zeros(2), tight)
        np.testing.assert_allclose(score_cold_song(joint, X, i, i), X.values @ single.x, atol=1e-6)
