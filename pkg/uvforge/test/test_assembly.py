import numpy as np
import pytest

from uvforge.assembly import (
    ARMS,
    AssemblySpec,
    NetworkSpec,
    RecoveryRequest,
    Role,
    assemble,
    build_network,
    compose_edit,
    interpolate,
    load_network,
    recover_uv,
    resolve_arm,
    save_network,
    slerp_embeddings,
    train_appearance,
    train_structure,
)
from uvforge.autodiff import Tensor, load_checkpoint, no_tape
from uvforge.color import transfer_stats
from uvforge.corpus import build_sample
from uvforge.diffusion import appearance_batch, init_backbone
from uvforge.exceptions import (
    CheckpointError,
    ConfigError,
    MissingFileError,
    NonFiniteError,
    ShapeError,
    TrainingHaltedError,
)
from uvforge.render import atlas_mask
from uvforge.runlog import EventLog
from uvforge.types import AttentionKind, CorpusConfig, ModelConfig, SampleConfig, StructureDirection
from uvforge.types.config import RunConfig, TrainConfig, WarmupConfig

MICRO = ModelConfig(
    base_channels=4, time_dim=8, embed_dim=8, token_dim=8, token_grid=2, attn_dim=4, heads=2, timesteps=20
)
FAST = SampleConfig(steps=2, guidance=1.4, seed=3, color_adjust=True)


def micro_config(**train) -> RunConfig:
    step = {"steps": 2, "batch_size": 2, "checkpoint_every": 1, "log_every": 1, **train}
    return RunConfig(
        model=MICRO,
        warmup=WarmupConfig(steps=1, batch_size=2),
        train_a=TrainConfig(**step),
        train_s=TrainConfig(**{"seed": 2, "attention": AttentionKind.self_, **step}),
    )


@pytest.fixture(scope="module")
def samples():
    config = CorpusConfig(image_size=32, uv_size=32, seed=9, train_count=3, eval_count=0)
    out = []
    for i in range(3):
        built = build_sample(config, i, f"face_{i:05d}")
        assert built is not None
        out.append(built[0])
    return out


@pytest.fixture(scope="module")
def model_dir(samples, tmp_path_factory):
    out = tmp_path_factory.mktemp("models")
    config = micro_config()
    train_appearance(samples, config, out)
    train_structure(samples, config, out)
    return out


@pytest.mark.parametrize(
    "spec, name",
    [
        (NetworkSpec(role=Role.appearance, attention=AttentionKind.channel), "phi_a_ch"),
        (NetworkSpec(role=Role.appearance, attention=AttentionKind.self_), "phi_a_self"),
        (NetworkSpec(role=Role.appearance, attention=AttentionKind.channel, landmarks=False), "phi_a_ch_nolm"),
        (NetworkSpec(role=Role.structure, attention=AttentionKind.self_), "phi_s_self"),
        (NetworkSpec(role=Role.structure, attention=AttentionKind.channel), "phi_s_ch"),
        (
            NetworkSpec(role=Role.structure, attention=AttentionKind.self_, direction=StructureDirection.uv_to_two_d),
            "phi_s_self_uv2d",
        ),
    ],
)
def test_network_names(spec, name):
    assert spec.name == name


def test_every_arm_names_known_networks():
    names = {"phi_a_ch", "phi_a_self", "phi_a_ch_nolm", "phi_s_self", "phi_s_ch", "phi_s_self_uv2d"}
    for arm in ARMS.values():
        assert set(arm.checkpoints()) <= names
    assert ARMS["no-adj"].color_adjust is False
    assert ARMS["ch+self"].backbone_source == "phi_s_self"


def test_training_writes_checkpoints(model_dir):
    for name in ["backbone", "phi_a_ch", "phi_s_self"]:
        assert (model_dir / f"{name}.ckpt").exists()
    ckpt = load_checkpoint(model_dir / "phi_a_ch.ckpt")
    assert ckpt.metadata["name"] == "phi_a_ch"
    assert ckpt.metadata["step"] == 2
    assert ckpt.metadata["network"]["role"] == "appearance"


def test_training_is_deterministic(samples, tmp_path):
    config = micro_config()
    log = EventLog()
    first = train_appearance(samples, config, tmp_path / "a", backbone=init_backbone(MICRO), log=log)
    second = train_appearance(samples, config, tmp_path / "b", backbone=init_backbone(MICRO))
    assert len(first.losses) == 2
    assert all(np.isfinite(first.losses))
    assert first.losses == second.losses
    assert [e["step"] for e in log.of("train_step")] == [1, 2]
    assert [e["step"] for e in log.of("checkpoint")] == [1, 2]


def test_training_halt_keeps_last_good_checkpoint(samples, tmp_path, mocker):
    mocker.patch(
        "uvforge.assembly.train.train_step",
        side_effect=[0.5, NonFiniteError("gradient is not finite", "grad")],
    )
    log = EventLog()
    with pytest.raises(TrainingHaltedError) as einfo:
        train_appearance(samples, micro_config(steps=5), tmp_path, backbone=init_backbone(MICRO), log=log)
    assert einfo.value.step == 2
    assert einfo.value.checkpoint == str(tmp_path / "phi_a_ch.ckpt")
    assert load_checkpoint(tmp_path / "phi_a_ch.ckpt").metadata["step"] == 1
    assert log.of("train_halted")[0]["step"] == 2


def test_backbone_stays_frozen_while_training(samples, tmp_path):
    backbone = init_backbone(MICRO)
    before = {k: v.copy() for k, v in backbone.state().items()}
    train_structure(samples, micro_config(), tmp_path, backbone=backbone)
    net, spec = load_network(tmp_path / "phi_s_self.ckpt")
    assert spec.role is Role.structure
    for name, value in before.items():
        np.testing.assert_array_equal(net.backbone.state()[name], value)


def test_identity_assembly_matches_the_trained_network(samples, model_dir):
    net, _ = load_network(model_dir / "phi_a_ch.ckpt")
    model = assemble(AssemblySpec(extractor="phi_a_ch", control="phi_a_ch"), model_dir)
    batch = appearance_batch(samples[:2])
    x = Tensor(batch.target)
    t = np.array([3, 17])
    with no_tape():
        expected = net(x, t, batch.detail, batch.hint).data
        actual = model.noise(x, t, batch.detail, batch.hint).data
    np.testing.assert_array_equal(actual, expected)


def test_swapped_assembly_recovers_a_texture(samples, model_dir):
    model = assemble(ARMS["ch+self"], model_dir)
    request = RecoveryRequest.from_sample(samples[0], FAST)
    log = EventLog()
    result = model.recover(request, log=log)
    valid = atlas_mask(32)
    assert result.texture.shape == (32, 32, 3)
    assert result.color_adjusted
    assert np.all(np.isfinite(result.texture))
    assert result.texture.min() >= 0.0 and result.texture.max() <= 1.0
    assert np.all(result.texture[~valid] == 0.0)
    assert log.of("recovered")[0]["clamped"] == result.clamped


def test_recovery_is_deterministic(samples, model_dir):
    model = assemble(ARMS["ch+self"], model_dir)
    request = RecoveryRequest.from_sample(samples[1], FAST)
    np.testing.assert_array_equal(model.recover(request).texture, model.recover(request).texture)
    other = request.model_copy(update={"seed": 4})
    assert not np.array_equal(model.recover(request).raw, model.recover(other).raw)


def test_recovery_without_color_adjustment(samples, model_dir):
    model = assemble(ARMS["no-adj"], model_dir)
    request = RecoveryRequest.from_sample(samples[0], FAST, color_adjust=False)
    result = model.recover(request)
    assert not result.color_adjusted
    assert result.texture is result.raw


def test_no_adj_differs_from_default_only_by_the_color_transfer(samples, model_dir):
    sample = samples[0]
    plain = assemble(ARMS["no-adj"], model_dir).recover(RecoveryRequest.from_sample(sample, FAST, color_adjust=False))
    default = assemble(ARMS["ch+self"], model_dir).recover(RecoveryRequest.from_sample(sample, FAST))
    np.testing.assert_array_equal(plain.raw, default.raw)
    adjusted = transfer_stats(plain.texture, atlas_mask(32), sample.I_w, sample.M_I)
    np.testing.assert_allclose(adjusted.texture, default.texture, atol=1e-4)
    assert adjusted.clamped == default.clamped


def test_interpolation_endpoint_matches_recovery(samples, model_dir):
    model = assemble(ARMS["ch+self"], model_dir)
    request = RecoveryRequest.from_sample(samples[0], FAST, color_adjust=False)
    other = RecoveryRequest.from_sample(samples[1], FAST, color_adjust=False)
    results = interpolate(model, request, other.views, [0.0, 0.5])
    assert len(results) == 2
    np.testing.assert_array_equal(results[0].texture, recover_uv(model, request).texture)
    with pytest.raises(ShapeError):
        interpolate(model, request, other.views * 2, [0.5])


def test_incompatible_checkpoint_is_named(model_dir, tmp_path):
    wide = MICRO.model_copy(update={"base_channels": 8})
    spec = NetworkSpec(role=Role.structure, attention=AttentionKind.self_)
    path = save_network(tmp_path / "phi_s_self.ckpt", build_network(init_backbone(wide), spec, wide), spec, wide, 0)
    checkpoints = {"phi_a_ch": load_checkpoint(model_dir / "phi_a_ch.ckpt"), "phi_s_self": load_checkpoint(path)}
    with pytest.raises(CheckpointError) as einfo:
        assemble(ARMS["ch+self"], checkpoints)
    assert "phi_a_ch" in str(einfo.value)
    assert einfo.value.offending


def test_missing_checkpoint(model_dir):
    with pytest.raises(MissingFileError) as einfo:
        assemble(ARMS["ch+ch"], model_dir)
    assert einfo.value.path.endswith("phi_s_ch.ckpt")
    assert einfo.value.code == 3


def test_unknown_arm():
    with pytest.raises(ConfigError) as einfo:
        resolve_arm("ch+lm")
    assert einfo.value.key_path == "ablate.arms"


def test_request_validation(samples):
    sample = samples[0]
    base = {"position_map": sample.uv_position_full, "color_adjust": False}
    with pytest.raises(ValueError):
        RecoveryRequest(views=[], masks=[], **base)
    with pytest.raises(ValueError):
        RecoveryRequest(views=[sample.T_w], masks=[], **base)
    with pytest.raises(ValueError):
        RecoveryRequest(views=[sample.T_w[:16]], masks=[sample.M_T[:16]], **base)
    with pytest.raises(ValueError):
        RecoveryRequest(views=[sample.T_w], masks=[sample.M_T], position_map=sample.uv_position_full)
    request = RecoveryRequest(views=[sample.T_w], masks=[sample.M_T], **base)
    assert request.uv_size == 32


def test_multi_view_request_covers_the_unwrap(samples):
    sample = samples[0]
    request = RecoveryRequest.from_sample(sample, FAST.model_copy(update={"views": 3}))
    assert 1 <= len(request.views) <= 3
    np.testing.assert_array_equal(request.union_mask(), sample.M_T)


def test_slerp_endpoints_are_exact():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(1, 4, 8)), rng.normal(size=(1, 4, 8))
    np.testing.assert_array_equal(slerp_embeddings(a, b, 0.0), a)
    np.testing.assert_array_equal(slerp_embeddings(a, b, 1.0), b)


def test_slerp_follows_the_great_circle():
    a = np.array([[1.0, 0.0]])
    b = np.array([[0.0, 1.0]])
    mid = slerp_embeddings(a, b, 0.5)
    np.testing.assert_allclose(mid, [[np.sqrt(0.5), np.sqrt(0.5)]], atol=1e-12)
    for tau in np.linspace(0.0, 1.0, 7):
        assert np.linalg.norm(slerp_embeddings(a, b, tau)) == pytest.approx(1.0)


def test_slerp_degenerate_pairs_fall_back_to_lerp():
    a = np.array([[2.0, 0.0], [0.0, 0.0]])
    b = np.array([[4.0, 0.0], [1.0, 1.0]])
    np.testing.assert_allclose(slerp_embeddings(a, b, 0.25), 0.75 * a + 0.25 * b)


def test_slerp_rejects_bad_input():
    with pytest.raises(ShapeError):
        slerp_embeddings(np.zeros((2, 4)), np.zeros((3, 4)), 0.5)
    with pytest.raises(ValueError):
        slerp_embeddings(np.ones((2, 4)), np.ones((2, 4)), 1.5)


def _layer(value, mask):
    return np.full((4, 4, 3), value, dtype=np.float32), mask


def test_compose_edit_without_layers_is_the_base():
    base = np.random.default_rng(1).uniform(size=(4, 4, 3)).astype(np.float32)
    mask = np.eye(4, dtype=bool)
    texture, out_mask = compose_edit(base, mask, [])
    np.testing.assert_array_equal(texture, base)
    np.testing.assert_array_equal(out_mask, mask)
    assert texture is not base


def test_compose_edit_full_cover_replaces_everything():
    base = np.zeros((4, 4, 3), dtype=np.float32)
    texture, mask = compose_edit(base, np.zeros((4, 4), dtype=bool), [_layer(0.7, np.ones((4, 4), dtype=bool))])
    np.testing.assert_array_equal(texture, np.full((4, 4, 3), 0.7, dtype=np.float32))
    assert mask.all()


def test_compose_edit_disjoint_layers_commute():
    base = np.zeros((4, 4, 3), dtype=np.float32)
    top = np.zeros((4, 4), dtype=bool)
    top[:2] = True
    first, second = _layer(0.2, top), _layer(0.9, ~top)
    a = compose_edit(base, np.zeros((4, 4), dtype=bool), [first, second])
    b = compose_edit(base, np.zeros((4, 4), dtype=bool), [second, first])
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


def test_compose_edit_later_layers_win():
    base = np.zeros((4, 4, 3), dtype=np.float32)
    everywhere = np.ones((4, 4), dtype=bool)
    texture, _ = compose_edit(base, everywhere, [_layer(0.2, everywhere), _layer(0.4, np.eye(4, dtype=bool))])
    assert texture[0, 0, 0] == pytest.approx(0.4)
    assert texture[0, 1, 0] == pytest.approx(0.2)
    with pytest.raises(ShapeError):
        compose_edit(base, everywhere, [(np.zeros((2, 2, 3)), np.ones((2, 2), dtype=bool))])
