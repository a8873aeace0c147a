import json

import pytest

from coldstart_playlist_lab.config import load_config, write_default_config
from coldstart_playlist_lab.errors import ConfigError
from coldstart_playlist_lab.models import Method, Setting


def test_write_default_config_roundtrip(tmp_path):
    p = tmp_path / "starter.yaml"
    write_default_config(str(p), force=False)
    cfg = load_config(str(p))
    assert cfg.command == "eval"
    assert cfg.setting == Setting.COLD_PLAYLISTS
    assert cfg.method == Method.MTC
    assert cfg.hp.lambda1 == 1e-4
    assert cfg.topk == [5, 10, 20, 50, 100]


def test_existing_config_needs_force(tmp_path):
    p = tmp_path / "starter.yaml"
    write_default_config(str(p))
    with pytest.raises(ConfigError, match="already exists"):
        write_default_config(str(p))
    write_default_config(str(p), force=True)


def test_missing_command(tmp_path):
    p = tmp_path / "cfg.yaml"
    p.write_text("setting: cold_users\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="command"):
        load_config(str(p))


def test_invalid_values_are_config_errors(tmp_path):
    p = tmp_path / "cfg.yaml"
    p.write_text("command: eval\nhp:\n  p: -1.0\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(str(p))
    p.write_text("command: eval\ntopk: [10, 5]\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(str(p))
    p.write_text("- just\n- a list\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="YAML object"):
        load_config(str(p))


def test_manifest_config_entry_is_loaded(tmp_path):
    p = tmp_path / "run_manifest.json"
    p.write_text(json.dumps({"command": "eval", "config": {"command": "eval", "method": "cagh", "knn": 3}}), encoding="utf-8")
    cfg = load_config(str(p))
    assert cfg.method == Method.CAGH and cfg.knn == 3


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(str(tmp_path / "nope.yaml"))
