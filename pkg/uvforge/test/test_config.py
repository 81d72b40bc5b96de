import os
from pathlib import Path

import pytest

from uvforge.config import (
    UvforgeSettings,
    apply_override,
    config_fingerprint,
    load_run_config,
    write_resolved_config,
)
from uvforge.exceptions import ConfigError, MissingFileError
from uvforge.types import AttentionKind, RunConfig

RESOURCE_DIR = Path(__file__).parent / "resources" / "yaml"


def test_defaults():
    config = load_run_config()
    assert config == RunConfig()
    assert config.sample.guidance == 1.4
    assert config.train_s.attention is AttentionKind.self_


def test_file_then_overrides_in_order():
    config = load_run_config(
        RESOURCE_DIR / "tiny_corpus.yaml", ["corpus.seed=8", "corpus.seed=9", "train_a.attention=self"]
    )
    assert config.corpus.seed == 9
    assert config.corpus.uv_size == 32
    assert config.model.base_channels == 4
    assert config.train_a.attention is AttentionKind.self_


@pytest.mark.parametrize(
    "assignment, expected",
    [
        ("sample.guidance=2", 2.0),
        ("sample.guidance=1e-3", 1e-3),
        ("ablate.arms=[ch+self, no-adj]", ["ch+self", "no-adj"]),
        ('ablate.arms=["ch+ch"]', ["ch+ch"]),
        ("eval.limit=", None),
    ],
)
def test_override_values_are_parsed(assignment, expected):
    config = load_run_config(overrides=[assignment])
    section, key = assignment.split("=")[0].split(".")
    assert getattr(getattr(config, section), key) == expected


@pytest.mark.parametrize(
    "source, overrides, key",
    [
        ("unknown_key.yaml", [], "corpus.bogus"),
        (None, ["corpus.image_size=4"], "corpus.image_size"),
        (None, ["sample.steps=many"], "sample.steps"),
        (None, ["nosuch.key=1"], "nosuch"),
        (None, ["corpus.seed.deeper=1"], "corpus.seed"),
        (None, ["no_equals_sign"], "no_equals_sign"),
        ("not_a_mapping.yaml", [], ""),
    ],
)
def test_config_errors_name_the_key(source, overrides, key):
    with pytest.raises(ConfigError) as einfo:
        load_run_config(RESOURCE_DIR / source if source else None, overrides)
    assert einfo.value.key_path == key
    assert einfo.value.code == 2
    assert einfo.value.details() == {"key": key}


def test_missing_config_file(tmp_path):
    with pytest.raises(MissingFileError) as einfo:
        load_run_config(tmp_path / "absent.yaml")
    assert einfo.value.code == 3


def test_apply_override_creates_sections():
    data = {}
    apply_override(data, "corpus.seed=3")
    apply_override(data, "corpus.pose_range=10.5")
    assert data == {"corpus": {"seed": 3, "pose_range": 10.5}}


def test_resolved_config_replays(tmp_path):
    config = load_run_config(RESOURCE_DIR / "tiny_corpus.yaml", ["sample.views=2"])
    path = write_resolved_config(config, tmp_path / "config.resolved.yaml")
    replayed = load_run_config(path)
    assert replayed == config
    assert config_fingerprint(replayed) == config_fingerprint(config)
    write_resolved_config(replayed, tmp_path / "again.yaml")
    assert (tmp_path / "again.yaml").read_bytes() == path.read_bytes()


def test_fingerprint():
    base = RunConfig()
    assert len(config_fingerprint(base)) == 12
    assert config_fingerprint(base) == config_fingerprint(RunConfig())
    assert config_fingerprint(base) != config_fingerprint(load_run_config(overrides=["corpus.seed=1"]))
    assert config_fingerprint({"b": 1, "a": 2}) == config_fingerprint({"a": 2, "b": 1})


def test_settings_threads(tmp_path, mocker):
    settings_file = tmp_path / "config.yaml"
    settings_file.write_text("threads: 3\nruns_root: /data/runs\n")
    mocker.patch.dict(os.environ, {}, clear=True)
    assert UvforgeSettings(settings_file).threads() == 3
    assert UvforgeSettings(settings_file).runs_root() == Path("/data/runs")
    assert UvforgeSettings(settings_file, threads=5).threads() == 5

    mocker.patch.dict(os.environ, {"UVFORGE_THREADS": "2", "UVFORGE_RUNS": "elsewhere"})
    assert UvforgeSettings(settings_file).threads() == 2
    assert UvforgeSettings(settings_file).runs_root() == Path("elsewhere")


@pytest.mark.parametrize("env, key", [("0", "UVFORGE_THREADS"), ("two", "UVFORGE_THREADS")])
def test_settings_reject_bad_threads(tmp_path, mocker, env, key):
    mocker.patch.dict(os.environ, {"UVFORGE_THREADS": env})
    with pytest.raises(ConfigError) as einfo:
        UvforgeSettings(tmp_path / "absent.yaml").threads()
    assert einfo.value.key_path == key
