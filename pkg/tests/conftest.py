import numpy as np
import pytest

from coldstart_playlist_lab.corpus import load_corpus
from coldstart_playlist_lab.features import FeatureMatrix
from coldstart_playlist_lab.losses import PlaylistTasks
from coldstart_playlist_lab.models import ColumnOrigin, ColumnSpec, FeatureSchema, Setting, SyntheticSpec
from coldstart_playlist_lab.synthetic import generate_synthetic

SONGS = """song_id,artist_id,release_year,tempo,energy
# six songs, three artists
s1,a1,2000,1.0,0.5
s2,a1,2001,2.0,?
s3,a2,2002,3.0,0.1
s4,a2,2003,4.0,0.9
s5,a3,2004,5.0,0.3
s6,a3,2005,6.0,0.7
"""

PLAYLISTS = """playlist_id,user_id,songs
p1,u1,s1;s2;s3
p2,u1,s3;s4
p3,u2,s4;s5;s6
p4,u2,s1;s5
p5,u3,s2;s6
p6,u3,s5;s6
"""

USERS = """user_id,age
u1,20
u2,30
u3,?
"""


def write_tiny(tmp_path):
    paths = {}
    for name, text in (("songs", SONGS), ("playlists", PLAYLISTS), ("users", USERS)):
        p = tmp_path / f"{name}.csv"
        p.write_text(text, encoding="utf-8")
        paths[name] = str(p)
    return paths


@pytest.fixture
def tiny_paths(tmp_path):
    return write_tiny(tmp_path)


@pytest.fixture
def tiny(tiny_paths):
    return load_corpus(tiny_paths["songs"], tiny_paths["playlists"], tiny_paths["users"])


@pytest.fixture(scope="session")
def small_synthetic():
    return generate_synthetic(
        SyntheticSpec(n_users=12, n_playlists=48, n_songs=120, dim=6, playlist_size=8, noise=0.0, n_taste_groups=3, seed=7)
    )


def plain_features(values):
    """Feature matrix over raw values; the last column must be the bias."""
    values = np.asarray(values, dtype=np.float64)
    columns = [ColumnSpec(name=f"x{j}", origin=ColumnOrigin.METADATA) for j in range(values.shape[1] - 1)]
    columns.append(ColumnSpec(name="bias", origin=ColumnOrigin.BIAS))
    return FeatureMatrix(values, FeatureSchema(setting=Setting.COLD_PLAYLISTS, columns=columns))


def random_tasks(rng, n_users, n_playlists, n_songs, dim, n_pos=None):
    """Random features with a bias column and random playlist labels."""
    X = plain_features(np.hstack([rng.standard_normal((n_songs, dim - 1)), np.ones((n_songs, 1))]))
    owners = np.concatenate([np.arange(n_users), rng.integers(n_users, size=n_playlists - n_users)])
    labels = np.zeros((n_playlists, n_songs), dtype=bool)
    for i in range(n_playlists):
        k = n_pos(rng) if callable(n_pos) else (n_pos or int(rng.integers(1, n_songs // 2)))
        labels[i, rng.choice(n_songs, size=k, replace=False)] = True
    tasks = PlaylistTasks(np.arange(n_playlists), owners, np.arange(n_songs), labels)
    return X, tasks
