import math
from types import SimpleNamespace

import numpy as np
import pytest

from uvforge.autodiff import (
    AdamState,
    ChannelAttention,
    CrossAttention,
    GradTape,
    Linear,
    Rng,
    SpatialSelfAttention,
    Tensor,
    adam_step,
    avg_pool2d,
    backward,
    channel_attention,
    conv2d,
    gradcheck,
    load_checkpoint,
    save_checkpoint,
    silu,
    softmax,
    spatial_self_attention,
    upsample_nearest2d,
)
from uvforge.exceptions import CheckpointError, NonFiniteError, ShapeError, TapeError

GRADCHECK_SEEDS = list(range(20))
GRADCHECK_TOLERANCE = 1e-3


def naive_conv(x, w, stride, pad):
    n, c, h, wd = x.shape
    o, _, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (wd + 2 * pad - kw) // stride + 1
    out = np.zeros((n, o, ho, wo))
    for b in range(n):
        for oc in range(o):
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0
                    for ic in range(c):
                        for di in range(kh):
                            for dj in range(kw):
                                acc += xp[b, ic, i * stride + di, j * stride + dj] * w[oc, ic, di, dj]
                    out[b, oc, i, j] = acc
    return out


def test_conv2d_ones_is_nine():
    out = conv2d(Tensor(np.ones((1, 1, 3, 3))), Tensor(np.ones((1, 1, 3, 3))), stride=1, pad=0)
    assert out.shape == (1, 1, 1, 1)
    assert out.item() == 9.0


def test_conv2d_identity_kernel():
    x = Rng(3).normal(size=(2, 1, 5, 5))
    out = conv2d(Tensor(x), Tensor(np.ones((1, 1, 1, 1))))
    np.testing.assert_array_equal(out.data, x.astype(np.float32))


@pytest.mark.parametrize("stride, pad", [(1, 0), (1, 1), (2, 1)])
def test_conv2d_matches_nested_loops(stride, pad):
    rng = Rng(11)
    x = rng.normal(size=(2, 3, 8, 8)).astype(np.float32)
    w = rng.normal(size=(4, 3, 3, 3)).astype(np.float32)
    out = conv2d(Tensor(x), Tensor(w), stride=stride, pad=pad)
    np.testing.assert_allclose(out.data, naive_conv(x.astype(np.float64), w.astype(np.float64), stride, pad), atol=1e-5)


def test_conv2d_shape_mismatch_names_both_shapes():
    with pytest.raises(ShapeError) as einfo:
        conv2d(Tensor(np.zeros((1, 3, 4, 4))), Tensor(np.zeros((2, 2, 3, 3))))
    assert "(1, 3, 4, 4)" in str(einfo.value)
    assert "(2, 2, 3, 3)" in str(einfo.value)


def test_channel_attention_zero_params_halves_input():
    x = Rng(0).normal(size=(2, 6, 4, 4))
    params = SimpleNamespace(
        w1=Tensor(np.zeros((6, 2))), b1=Tensor(np.zeros(2)), w2=Tensor(np.zeros((2, 6))), b2=Tensor(np.zeros(6))
    )
    out = channel_attention(Tensor(x), params)
    np.testing.assert_allclose(out.data, 0.5 * x.astype(np.float32), rtol=0, atol=0)


def test_channel_attention_zero_channel_squeezes_to_zero():
    x = Rng(1).normal(size=(1, 3, 4, 4))
    x[:, 1] = 0.0
    assert Tensor(x).mean(axis=(2, 3)).data[0, 1] == 0.0
    layer = ChannelAttention(3, 1, Rng(2))
    out = layer(Tensor(x))
    assert np.all(out.data[:, 1] == 0.0)


def test_channel_attention_matches_straight_line_oracle():
    rng = Rng(4)
    x = rng.normal(size=(2, 8, 5, 5)).astype(np.float32)
    layer = ChannelAttention(8, 4, rng)
    out = layer(Tensor(x)).data
    squeeze = x.astype(np.float64).mean(axis=(2, 3))
    hidden = np.maximum(squeeze @ layer.w1.data + layer.b1.data, 0)
    gates = 1.0 / (1.0 + np.exp(-(hidden @ layer.w2.data + layer.b2.data)))
    assert np.all((gates > 0) & (gates < 1))
    np.testing.assert_allclose(out, x * gates[:, :, None, None], rtol=1e-6, atol=1e-6)


def test_channel_attention_rejects_empty_bottleneck():
    params = SimpleNamespace(
        w1=Tensor(np.zeros((4, 0))), b1=Tensor(np.zeros(0)), w2=Tensor(np.zeros((0, 4))), b2=Tensor(np.zeros(4))
    )
    with pytest.raises(ShapeError):
        channel_attention(Tensor(np.zeros((1, 4, 2, 2))), params)


def test_self_attention_single_position_returns_value_projection():
    rng = Rng(5)
    x = rng.normal(size=(1, 4, 1, 1)).astype(np.float32)
    layer = SpatialSelfAttention(4, 2, rng)
    out, weights = spatial_self_attention(Tensor(x), layer, return_weights=True)
    assert np.all(weights.data == 1.0)
    expected = x.reshape(1, 4) @ layer.wv.data + layer.bv.data
    np.testing.assert_allclose(out.data.reshape(1, 4), expected, atol=1e-6)


def test_self_attention_uniform_queries_average_values():
    rng = Rng(6)
    x = rng.normal(size=(1, 4, 3, 3)).astype(np.float32)
    layer = SpatialSelfAttention(4, 1, rng)
    layer.wq.data[:] = 0.0
    layer.wk.data[:] = 0.0
    out, weights = spatial_self_attention(Tensor(x), layer, return_weights=True)
    np.testing.assert_allclose(weights.data, np.full((1, 1, 9, 9), 1.0 / 9.0), atol=1e-7)
    values = x.reshape(4, 9).T @ layer.wv.data + layer.bv.data
    np.testing.assert_allclose(out.data.reshape(4, 9).T, np.repeat(values.mean(axis=0, keepdims=True), 9, 0), atol=1e-5)


def test_self_attention_matches_dense_oracle():
    rng = Rng(7)
    x = rng.normal(size=(1, 8, 4, 4)).astype(np.float32)
    layer = SpatialSelfAttention(8, 2, rng)
    out, weights = spatial_self_attention(Tensor(x), layer, return_weights=True)
    np.testing.assert_allclose(weights.data.sum(axis=-1), 1.0, atol=1e-6)

    tokens = x.reshape(8, 16).T.astype(np.float64)
    q = tokens @ layer.wq.data + layer.bq.data
    k = tokens @ layer.wk.data + layer.bk.data
    v = tokens @ layer.wv.data + layer.bv.data
    heads = []
    for hd in range(2):
        sl = slice(hd * 4, hd * 4 + 4)
        scores = q[:, sl] @ k[:, sl].T / math.sqrt(4)
        e = np.exp(scores - scores.max(axis=1, keepdims=True))
        heads.append((e / e.sum(axis=1, keepdims=True)) @ v[:, sl])
    expected = np.concatenate(heads, axis=1).T.reshape(1, 8, 4, 4)
    np.testing.assert_allclose(out.data, expected, atol=1e-5)


def test_self_attention_heads_must_divide_channels():
    with pytest.raises(ShapeError):
        SpatialSelfAttention(6, 4, Rng(0))


def test_backward_sum_gives_ones():
    x = Tensor(Rng(0).normal(size=(3, 4)), requires_grad=True)
    with GradTape() as tape:
        loss = x.sum()
    np.testing.assert_array_equal(backward(loss, tape)[x], np.ones((3, 4), dtype=np.float32))


def test_backward_square_norm_gives_two_x():
    x = Tensor(Rng(1).normal(size=(5,)), requires_grad=True)
    with GradTape() as tape:
        loss = x.square().sum()
    np.testing.assert_allclose(backward(loss, tape)[x], 2 * x.data, rtol=1e-6)


def test_backward_accumulates_and_zero_fills_unused():
    x = Tensor([1.0, 2.0], requires_grad=True)
    unused = Tensor([3.0], requires_grad=True)
    with GradTape() as tape:
        loss = (x * x + x).sum()
    grads = backward(loss, tape)
    np.testing.assert_allclose(grads[x], [3.0, 5.0])
    np.testing.assert_array_equal(grads[unused], [0.0])
    assert grads.named({"x": x, "unused": unused})["unused"].shape == (1,)


def test_backward_visits_ops_in_reverse_order(mocker):
    x = Tensor([1.0, -2.0], requires_grad=True)
    with GradTape() as tape:
        y = silu(x)
        loss = y.sum()
    order = []
    for fn, _ in tape.records:

        def wrapped(grad, _fn=fn, _original=fn.backward):
            order.append(type(_fn).__name__)
            return _original(grad)

        mocker.patch.object(fn, "backward", side_effect=wrapped)
    backward(loss, tape)
    assert order == ["Sum", "Silu"]


def test_backward_rejects_non_scalar_and_empty_tape():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    with GradTape() as tape:
        y = x * 2.0
    with pytest.raises(TapeError):
        backward(y, tape)
    with pytest.raises(TapeError):
        backward(Tensor(1.0), GradTape())


def test_non_finite_op_is_an_error():
    with pytest.raises(NonFiniteError) as einfo:
        Tensor([1.0]) * Tensor([np.inf])
    assert einfo.value.op == "Mul"


def test_forward_and_backward_are_bitwise_reproducible():
    def run():
        rng = Rng(9)
        layer = ChannelAttention(6, 2, rng)
        conv_w = Tensor(rng.normal(size=(6, 3, 3, 3)), requires_grad=True)
        x = Tensor(rng.normal(size=(2, 3, 8, 8)))
        with GradTape() as tape:
            loss = layer(conv2d(x, conv_w, pad=1)).square().mean()
        grads = backward(loss, tape)
        return loss.data.copy(), grads[conv_w].copy(), grads[layer.w1].copy()

    first, second = run(), run()
    for a, b in zip(first, second):
        assert a.tobytes() == b.tobytes()


@pytest.mark.parametrize("seed", GRADCHECK_SEEDS)
def test_gradcheck_conv2d(seed):
    rng = Rng(seed)
    x = rng.normal(size=(1, 2, 5, 5))
    w = rng.normal(size=(3, 2, 3, 3))
    b = rng.normal(size=(3,))
    err = gradcheck(lambda x, w, b: conv2d(x, w, stride=2, pad=1, bias=b).square().sum(), [x, w, b])
    assert err < GRADCHECK_TOLERANCE


@pytest.mark.parametrize("seed", GRADCHECK_SEEDS)
def test_gradcheck_channel_attention(seed):
    rng = Rng(seed)
    x = rng.normal(size=(1, 4, 3, 3))
    w1 = 0.1 * rng.normal(size=(4, 2))
    b1 = np.full(2, 0.5)
    w2 = rng.normal(size=(2, 4))
    b2 = rng.normal(size=(4,))

    def fn(x, w1, b1, w2, b2):
        out = channel_attention(x, SimpleNamespace(w1=w1, b1=b1, w2=w2, b2=b2))
        return out.square().sum()

    assert gradcheck(fn, [x, w1, b1, w2, b2]) < GRADCHECK_TOLERANCE


@pytest.mark.parametrize("seed", GRADCHECK_SEEDS)
def test_gradcheck_spatial_self_attention(seed):
    rng = Rng(seed)
    x = rng.normal(size=(1, 4, 2, 2))
    mats = [0.5 * rng.normal(size=(4, 4)) for _ in range(3)]
    biases = [0.1 * rng.normal(size=(4,)) for _ in range(3)]

    def fn(x, wq, wk, wv, bq, bk, bv):
        params = SimpleNamespace(wq=wq, wk=wk, wv=wv, bq=bq, bk=bk, bv=bv, heads=2)
        return spatial_self_attention(x, params).square().sum()

    assert gradcheck(fn, [x, *mats, *biases]) < GRADCHECK_TOLERANCE


@pytest.mark.parametrize("seed", GRADCHECK_SEEDS)
def test_gradcheck_cross_attention(seed):
    rng = Rng(seed)
    layer = CrossAttention(3, 4, 5, rng)
    h = rng.normal(size=(1, 3, 2, 2))
    tokens = rng.normal(size=(1, 6, 4))

    def fn(h, tokens, wq, wk, wv, gate):
        layer.wq, layer.wk, layer.wv, layer.gate = wq, wk, wv, gate
        return layer(h, tokens).square().sum()

    inputs = [h, tokens, layer.wq.data.copy(), layer.wk.data.copy(), layer.wv.data.copy(), layer.gate.data.copy()]
    assert gradcheck(fn, inputs) < GRADCHECK_TOLERANCE


@pytest.mark.parametrize("seed", GRADCHECK_SEEDS)
def test_gradcheck_linear_silu_softmax(seed):
    rng = Rng(seed)
    x = rng.normal(size=(3, 5))
    w = rng.normal(size=(5, 4))
    b = rng.normal(size=(4,))

    def fn(x, w, b):
        return (softmax(silu(x @ w + b), axis=-1) * Tensor(np.arange(4.0))).sum()

    assert gradcheck(fn, [x, w, b]) < GRADCHECK_TOLERANCE


@pytest.mark.parametrize("seed", GRADCHECK_SEEDS)
def test_gradcheck_pool_and_upsample(seed):
    rng = Rng(seed)
    x = rng.normal(size=(1, 2, 4, 4))
    weight = Tensor(rng.normal(size=(1, 2, 4, 4)))
    assert gradcheck(lambda x: (upsample_nearest2d(avg_pool2d(x, 2), 2) * weight).sum(), [x]) < GRADCHECK_TOLERANCE


def test_adam_zero_gradient_leaves_parameters():
    p = Tensor(Rng(0).normal(size=(3,)), requires_grad=True)
    before = p.data.copy()
    state = AdamState(lr=3e-5)
    adam_step({"p": p}, {"p": np.zeros(3, dtype=np.float32)}, state)
    np.testing.assert_array_equal(p.data, before)
    assert state.step == 1


def test_adam_first_step_matches_hand_formula():
    p = Tensor([0.5, -0.25, 0.125], requires_grad=True)
    g = np.array([0.3, -0.02, 4.0], dtype=np.float32)
    before = p.data.astype(np.float64)
    adam_step({"p": p}, {"p": g}, AdamState(lr=1e-3))
    expected = before - 1e-3 * g / (np.abs(g) + 1e-8)
    np.testing.assert_allclose(p.data, expected, atol=1e-7)


def test_adam_constant_gradient_decreases_monotonically():
    p = Tensor([1.0], requires_grad=True)
    state = AdamState(lr=1e-2)
    history = [p.data[0]]
    for _ in range(100):
        adam_step({"p": p}, {"p": np.array([0.7], dtype=np.float32)}, state)
        history.append(p.data[0])
    assert all(b < a for a, b in zip(history, history[1:]))
    assert state.step == 100


def test_adam_rejects_nan_gradient_and_bad_lr():
    p = Tensor([1.0], requires_grad=True)
    state = AdamState(lr=1e-3)
    with pytest.raises(NonFiniteError):
        adam_step({"p": p}, {"p": np.array([np.nan], dtype=np.float32)}, state)
    assert state.step == 0
    assert p.data[0] == 1.0
    with pytest.raises(ValueError):
        AdamState(lr=0.0)


def test_rng_streams_are_reproducible_and_independent():
    a = Rng(42).child(7).normal(size=5)
    b = Rng(42).child(7).normal(size=5)
    c = Rng(42).child(8).normal(size=5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert Rng(1, "train").uniform() == Rng(1, "train").uniform()


def test_checkpoint_round_trip(tmp_path):
    layer = Linear(3, 2, Rng(0))
    path = save_checkpoint(tmp_path / "m.ckpt", {f"net.{k}": v for k, v in layer.state().items()}, {"modules": ["net"]})
    with open(path, "rb") as f:
        assert f.read(14) == b"UVFORGE-CKPT-1"
    ckpt = load_checkpoint(path)
    assert ckpt.modules == ["net"]
    fresh = Linear(3, 2, Rng(1)).load_state(ckpt.section("net"))
    np.testing.assert_array_equal(fresh.w.data, layer.w.data)


def test_checkpoint_shape_mismatch_lists_tensors(tmp_path):
    arrays = {"net.w": np.zeros((4, 2), np.float32), "net.b": np.zeros(2, np.float32)}
    path = save_checkpoint(tmp_path / "m.ckpt", arrays)
    with pytest.raises(CheckpointError) as einfo:
        Linear(3, 2, Rng(0)).load_state(load_checkpoint(path).section("net"))
    assert "w" in einfo.value.offending[0]


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"NOT-A-CHECKPOINT\n")
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
