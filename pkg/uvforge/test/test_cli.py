import json
from pathlib import Path

import pytest
import yaml

from uvforge.cli import build_parser, run
from uvforge.cli.main import resolve_config
from uvforge.cli.rundir import LOCK_NAME, RESOLVED_CONFIG_NAME, open_run_dir
from uvforge.corpus import load_manifest
from uvforge.exceptions import RunLockedError
from uvforge.types import RunConfig

RESOURCE_DIR = Path(__file__).parent / "resources" / "yaml"
TINY = str(RESOURCE_DIR / "tiny_corpus.yaml")


def error_line(capsys) -> dict:
    lines = [ln for ln in capsys.readouterr().err.splitlines() if ln.startswith("{")]
    return json.loads(lines[-1])


def events(run_dir: Path) -> list[str]:
    return [json.loads(ln)["event"] for ln in (run_dir / "events.jsonl").read_text().splitlines()]


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "corpus"
    assert run(["corpus", "--config", TINY, "--out", str(out), "--threads", "1"]) == 0
    return out


def test_corpus_command_writes_a_run(corpus_dir):
    manifest = load_manifest(corpus_dir)
    assert len(manifest.records) + len(manifest.skipped) == 3
    assert (corpus_dir / RESOLVED_CONFIG_NAME).exists()
    assert not (corpus_dir / LOCK_NAME).exists()
    names = events(corpus_dir)
    assert names[0] == "run_start"
    assert names[-1] == "run_done"
    assert "corpus_done" in names


def test_resolved_config_replays_the_corpus(corpus_dir, tmp_path):
    replay = tmp_path / "replay"
    assert run(["corpus", "--config", str(corpus_dir / RESOLVED_CONFIG_NAME), "--out", str(replay)]) == 0
    assert (replay / "manifest.jsonl").read_bytes() == (corpus_dir / "manifest.jsonl").read_bytes()
    assert (replay / RESOLVED_CONFIG_NAME).read_bytes() == (corpus_dir / RESOLVED_CONFIG_NAME).read_bytes()


def test_flags_override_set_which_overrides_the_file():
    parser = build_parser()
    assert resolve_config(parser.parse_args(["corpus", "--config", TINY])).corpus.seed == 7
    args = parser.parse_args(["corpus", "--config", TINY, "--set", "corpus.seed=8"])
    assert resolve_config(args).corpus.seed == 8
    args = parser.parse_args(["corpus", "--config", TINY, "--set", "corpus.seed=8", "--seed", "9"])
    assert resolve_config(args).corpus.seed == 9


@pytest.mark.parametrize(
    "argv, section, expected",
    [
        (
            ["train-appearance", "--corpus", "c", "--attention", "self", "--no-landmarks"],
            "train_a",
            {"landmarks": False, "attention": "self"},
        ),
        (["train-structure", "--corpus", "c", "--direction", "uv_to_2d", "--steps", "3"], "train_s", {"steps": 3}),
        (
            ["recover", "--corpus", "c", "--model", "m", "--input", "x", "--no-color-adjust"],
            "sample",
            {"color_adjust": False},
        ),
        (["interp", "--corpus", "c", "--model", "m", "--guidance", "2.5", "--views", "2"], "sample", {"views": 2}),
        (
            ["ablate", "--corpus", "c", "--model", "m", "--arms", "ch+self, no-adj"],
            "ablate",
            {"arms": ["ch+self", "no-adj"]},
        ),
        (["eval", "--corpus", "c", "--baseline", "gt", "--limit", "4"], "eval", {"limit": 4}),
    ],
)
def test_flags_map_onto_config(argv, section, expected):
    config = resolve_config(build_parser().parse_args(argv))
    for key, value in expected.items():
        assert getattr(getattr(config, section), key) == value


def test_unknown_key_exits_with_its_path(tmp_path, capsys):
    code = run(["corpus", "--config", str(RESOURCE_DIR / "unknown_key.yaml"), "--out", str(tmp_path / "r")])
    assert code == 2
    line = error_line(capsys)
    assert line["error"] == "config"
    assert line["key"] == "corpus.bogus"
    assert not (tmp_path / "r").exists()


def test_invalid_set_value(tmp_path, capsys):
    assert run(["corpus", "--set", "corpus.image_size=4", "--out", str(tmp_path / "r")]) == 2
    assert error_line(capsys)["key"] == "corpus.image_size"


def test_missing_config_file(tmp_path, capsys):
    assert run(["corpus", "--config", str(tmp_path / "absent.yaml"), "--out", str(tmp_path / "r")]) == 3
    line = error_line(capsys)
    assert line["error"] == "missing_file"
    assert line["path"].endswith("absent.yaml")


def test_missing_corpus(tmp_path, capsys):
    assert run(["eval", "--corpus", str(tmp_path / "nowhere"), "--baseline", "gt", "--out", str(tmp_path / "r")]) == 3
    assert error_line(capsys)["path"].endswith("nowhere")


def test_unknown_sample_id(corpus_dir, tmp_path, capsys):
    argv = ["recover", "--config", TINY, "--corpus", str(corpus_dir), "--model", str(tmp_path), "--input", "nobody"]
    assert run([*argv, "--out", str(tmp_path / "r")]) == 3
    assert "nobody" in error_line(capsys)["message"]


def test_missing_checkpoint(corpus_dir, tmp_path, capsys):
    sample_id = load_manifest(corpus_dir).records[0].id
    argv = ["recover", "--config", TINY, "--corpus", str(corpus_dir), "--model", str(tmp_path / "m")]
    assert run([*argv, "--input", sample_id, "--out", str(tmp_path / "r")]) == 3
    assert error_line(capsys)["path"].endswith(".ckpt")


def test_eval_needs_a_model_or_baseline(corpus_dir, tmp_path, capsys):
    assert run(["eval", "--config", TINY, "--corpus", str(corpus_dir), "--out", str(tmp_path / "r")]) == 2
    assert error_line(capsys)["key"] == "model"


def test_locked_run_directory(tmp_path, capsys):
    out = tmp_path / "busy"
    out.mkdir()
    (out / LOCK_NAME).write_text("12345\n")
    assert run(["corpus", "--config", TINY, "--out", str(out)]) == 4
    assert error_line(capsys)["error"] == "locked"
    assert (out / LOCK_NAME).read_text() == "12345\n"


def test_lock_is_held_while_running(tmp_path):
    config = RunConfig()
    with open_run_dir(tmp_path, config, "test") as run_dir:
        assert (tmp_path / LOCK_NAME).exists()
        with pytest.raises(RunLockedError):
            with open_run_dir(tmp_path, config, "test"):
                pass
        assert run_dir.log.of("run_start")[0]["command"] == "test"
    assert not (tmp_path / LOCK_NAME).exists()
    assert yaml.safe_load((tmp_path / RESOLVED_CONFIG_NAME).read_text())["sample"]["guidance"] == 1.4


def test_lock_is_released_after_a_failure(tmp_path):
    with pytest.raises(RuntimeError):
        with open_run_dir(tmp_path, RunConfig(), "test"):
            raise RuntimeError("boom")
    assert not (tmp_path / LOCK_NAME).exists()
    assert "run_done" not in events(tmp_path)


def test_eval_baseline_writes_reports(corpus_dir, tmp_path):
    out = tmp_path / "eval"
    argv = ["eval", "--config", TINY, "--corpus", str(corpus_dir), "--baseline", "mean-fill", "--out", str(out)]
    assert run([*argv, "--threads", "2"]) == 0
    assert (out / "mean-fill.csv").exists()
    summary = json.loads((out / "mean-fill.json").read_text())
    assert summary["label"] == "mean-fill"
    assert "eval_done" in events(out)


def test_edit_rejects_unknown_region(corpus_dir, tmp_path, capsys):
    sample_id = load_manifest(corpus_dir).records[0].id
    argv = ["edit", "--config", TINY, "--corpus", str(corpus_dir), "--model", str(tmp_path)]
    argv += ["--out", str(tmp_path / "r")]
    argv += ["--set", f"edit.base={sample_id}", "--set", f"edit.layers=[{{sample_id: {sample_id}, regions: [tail]}}]"]
    assert run(argv) == 2
    assert error_line(capsys)["key"] == "edit.layers.0.regions"


def test_ablate_view_check_flag():
    parser = build_parser()
    assert parser.parse_args(["ablate", "--corpus", "c", "--model", "m", "--view-check"]).view_check
    assert not parser.parse_args(["ablate", "--corpus", "c", "--model", "m"]).view_check
