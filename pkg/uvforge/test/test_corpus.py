import json
from pathlib import Path

import numpy as np
import pytest

from uvforge.corpus import generate_corpus, load_ground_truth, load_manifest, load_sample, read_raster, write_raster
from uvforge.corpus.rasters import RASTER_MAGIC
from uvforge.exceptions import CorpusError, MissingFileError, SampleRejectedError
from uvforge.runlog import EventLog
from uvforge.types import CorpusConfig, Split

TINY = dict(image_size=32, uv_size=32, seed=5)


def tree_bytes(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.mark.parametrize(
    "array",
    [
        np.linspace(0.0, 1.0, 48, dtype=np.float32).reshape(4, 4, 3),
        np.linspace(-1.0, 2.0, 20, dtype=np.float32).reshape(4, 5),
        np.eye(6, dtype=bool),
    ],
)
def test_raster_round_trip(tmp_path, array):
    path = write_raster(tmp_path / "a.uvf", array)
    assert path.read_bytes()[:4] == RASTER_MAGIC
    back = read_raster(path)
    assert back.dtype == array.dtype
    assert np.array_equal(back, array)


def test_read_raster_errors(tmp_path):
    with pytest.raises(MissingFileError) as einfo:
        read_raster(tmp_path / "nope.uvf")
    assert einfo.value.path == str(tmp_path / "nope.uvf")

    (tmp_path / "junk.uvf").write_bytes(b"PNG\x00" + bytes(40))
    with pytest.raises(CorpusError):
        read_raster(tmp_path / "junk.uvf")

    good = write_raster(tmp_path / "good.uvf", np.ones((4, 4, 3), dtype=np.float32))
    (tmp_path / "short.uvf").write_bytes(good.read_bytes()[:-4])
    with pytest.raises(CorpusError) as einfo:
        read_raster(tmp_path / "short.uvf")
    assert "payload bytes" in str(einfo.value)


def test_single_sample_corpus(tmp_path):
    config = CorpusConfig(train_count=1, eval_count=0, **TINY)
    manifest = generate_corpus(config, tmp_path, threads=1)
    assert len(manifest.records) == 1
    record = manifest.records[0]
    assert record.split is Split.train
    assert record.id == "face_00000"
    assert not manifest.missing_files()
    sample = load_sample(manifest, record)
    assert sample.I_w.shape == (32, 32, 3) and sample.T_w.shape == (32, 32, 3)
    assert sample.M_I.dtype == bool
    for png in record.previews.values():
        assert (tmp_path / png).exists()


def test_manifest_layout(tmp_path):
    config = CorpusConfig(train_count=2, eval_count=1, **TINY)
    generate_corpus(config, tmp_path, threads=1)
    lines = (tmp_path / "manifest.jsonl").read_text().splitlines()
    header = json.loads(lines[0])
    assert header["kind"] == "uvforge-corpus"
    assert header["config"]["train_count"] == 2
    assert [json.loads(ln)["split"] for ln in lines[1:]] == ["train", "train", "eval"]

    manifest = load_manifest(tmp_path)
    assert [r.id for r in manifest.split("eval")] == ["face_00002"]
    assert manifest.record("face_00001").index == 1
    with pytest.raises(KeyError):
        manifest.record("face_00099")


def test_thread_count_does_not_change_output(tmp_path):
    config = CorpusConfig(train_count=3, eval_count=1, **TINY)
    generate_corpus(config, tmp_path / "one", threads=1)
    generate_corpus(config, tmp_path / "two", threads=2)
    one, two = tree_bytes(tmp_path / "one"), tree_bytes(tmp_path / "two")
    assert one.keys() == two.keys()
    for name in one:
        assert one[name] == two[name], name


def test_training_never_reads_ground_truth(tmp_path, mocker):
    config = CorpusConfig(train_count=2, eval_count=1, **TINY)
    manifest = generate_corpus(config, tmp_path, threads=1)
    reads = mocker.patch("uvforge.corpus.generate.read_raster", wraps=read_raster)
    for record in manifest.records:
        load_sample(manifest, record)
    opened = [str(call.args[0]) for call in reads.call_args_list]
    assert opened and not any("gt_uv" in name for name in opened)
    assert all("gt_uv" not in p.name for p in manifest.training_paths())

    gt = load_ground_truth(manifest, manifest.records[0])
    assert gt.shape == (32, 32, 3)
    assert "gt_uv" in str(reads.call_args.args[0])


def test_rejected_samples_are_skipped(tmp_path, mocker):
    mocker.patch(
        "uvforge.corpus.generate.prepare_sample",
        side_effect=SampleRejectedError("combined skin mask is empty", "x", "empty_skin_mask"),
    )
    log = EventLog()
    config = CorpusConfig(train_count=2, eval_count=0, max_resample=1, **TINY)
    manifest = generate_corpus(config, tmp_path, threads=1, log=log)
    assert manifest.records == []
    assert manifest.skipped == ["face_00000", "face_00001"]
    assert len(log.of("sample_rejected")) == 4
    assert len(log.of("sample_skipped")) == 2
    assert load_manifest(tmp_path).skipped == manifest.skipped


def test_write_failure_removes_partial_corpus(tmp_path, mocker):
    mocker.patch("uvforge.corpus.generate.write_raster", side_effect=OSError("disk full"))
    config = CorpusConfig(train_count=2, eval_count=0, **TINY)
    with pytest.raises(CorpusError) as einfo:
        generate_corpus(config, tmp_path, threads=2)
    assert einfo.value.sample_id in ("face_00000", "face_00001")
    assert not (tmp_path / "samples").exists()
    assert not (tmp_path / "manifest.jsonl").exists()


def test_load_manifest_missing_file(tmp_path):
    with pytest.raises(MissingFileError):
        load_manifest(tmp_path)
    config = CorpusConfig(train_count=1, eval_count=0, **TINY)
    manifest = generate_corpus(config, tmp_path, threads=1)
    victim = manifest.training_paths()[0]
    victim.unlink()
    with pytest.raises(MissingFileError) as einfo:
        load_manifest(tmp_path)
    assert einfo.value.path == str(victim)
    assert load_manifest(tmp_path, check_files=False).records[0].id == "face_00000"
