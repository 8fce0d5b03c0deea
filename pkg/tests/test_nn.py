import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from phasefuse.nn import (AdaptiveAvgPool2d, AdamState, BatchNorm2d, Conv2d, GlobalAvgPool, Linear,
                          Parameter, ReLU, Res2NetBlock, SEBlock, Sequential, Sigmoid, adam_step,
                          grad_check, load_checkpoint, param_count, save_checkpoint, softmax_xent)

from oracles import conv2d_loops

F64 = np.float64


def conv64(cin, cout, k, stride=1, pad=0, seed=0):
    return Conv2d(cin, cout, k, stride, pad, rng=np.random.default_rng(seed), dtype=F64)


# --- conv --------------------------------------------------------------------

def test_conv_1x1_identity():
    c = conv64(1, 1, 1)
    c.weight.data[...] = 1.0
    c.bias.data[...] = 0.0
    x = np.random.default_rng(0).standard_normal((2, 1, 4, 5))
    np.testing.assert_array_equal(c(x), x)


def test_conv_3x3_ones_interior_is_nine():
    c = conv64(1, 1, 3, 1, 1)
    c.weight.data[...] = 1.0
    c.bias.data[...] = 0.0
    out = c(np.ones((1, 1, 5, 5)))
    assert out[0, 0, 2, 2] == 9.0 and out[0, 0, 0, 0] == 4.0


@given(st.integers(1, 3), st.integers(1, 12), st.integers(1, 4), st.sampled_from([1, 3]),
       st.sampled_from([(1, 1), (1, 2), (2, 2)]), st.integers(3, 9), st.integers(3, 9), st.integers(0, 99))
def test_conv_matches_loops(b, cin, cout, k, stride, h, w, seed):
    # covers both the direct kernels (few channels, stride 1) and im2col
    rng = np.random.default_rng(seed)
    c = conv64(cin, cout, k, stride, k // 2, seed)
    x = rng.standard_normal((b, cin, h, w))
    want = conv2d_loops(x, c.weight.data, c.bias.data, stride, (k // 2, k // 2))
    assert np.max(np.abs(c(x) - want)) < 1e-12


def test_conv_output_shape_formula():
    c = conv64(2, 3, 3, (1, 2), 1)
    assert c(np.zeros((1, 2, 7, 9))).shape == (1, 3, 7, 5)


def test_conv_channel_mismatch():
    with pytest.raises(ValueError):
        conv64(2, 3, 3)(np.zeros((1, 3, 5, 5)))


@pytest.mark.parametrize("cin, stride", [(3, 1), (3, (1, 2)), (12, 1)])
def test_conv_zero_upstream(cin, stride):
    c = conv64(cin, 4, 3, stride, 1)
    x = np.random.default_rng(1).standard_normal((2, cin, 5, 6))
    out = c(x)
    gx = c.backward(np.zeros_like(out))
    assert not gx.any() and not c.weight.grad.any() and not c.bias.grad.any()


@pytest.mark.parametrize("cin, stride, shape", [(3, 1, (2, 3, 5, 5)), (3, (1, 2), (2, 3, 5, 5)),
                                                (10, 1, (2, 10, 5, 5)), (3, 1, (2, 3, 9, 4))])
def test_conv_finite_differences(cin, stride, shape):
    c = conv64(cin, 4, 3, stride, 1)
    x = np.random.default_rng(2).standard_normal(shape)
    assert grad_check(c, [x], eps=1e-5, skip_kinks=False) < 1e-6


def test_conv_bias_grad_is_channel_sum():
    c = conv64(2, 3, 3, 1, 1)
    out = c(np.random.default_rng(3).standard_normal((2, 2, 4, 4)))
    g = np.random.default_rng(4).standard_normal(out.shape)
    c.backward(g)
    np.testing.assert_allclose(c.bias.grad, g.sum(axis=(0, 2, 3)), atol=1e-12)


# --- batch norm --------------------------------------------------------------

def test_bn_training_normalises():
    bn = BatchNorm2d(3, dtype=F64)
    y = bn(np.random.default_rng(0).normal(5, 3, (4, 3, 6, 6)))
    assert np.all(np.abs(y.mean(axis=(0, 2, 3))) < 1e-6)
    assert np.all(np.abs(y.var(axis=(0, 2, 3)) - 1) < 1e-3)  # eps 1e-5 in the denominator


def test_bn_affine():
    bn = BatchNorm2d(2, dtype=F64)
    bn.gamma.data[...] = 2.0
    bn.beta.data[...] = 3.0
    y = bn(np.random.default_rng(1).standard_normal((8, 2, 5, 5)))
    np.testing.assert_allclose(y.mean(axis=(0, 2, 3)), 3.0, atol=1e-9)
    np.testing.assert_allclose(y.std(axis=(0, 2, 3)), 2.0, atol=1e-4)


def test_bn_finite_differences():
    bn = BatchNorm2d(3, dtype=F64)
    bn.gamma.data[...] = [0.5, 1.5, -1.0]
    bn.beta.data[...] = [0.1, -0.2, 0.3]
    assert grad_check(bn, [np.random.default_rng(2).standard_normal((2, 3, 4, 5))], eps=1e-5) < 1e-5


def test_bn_eval_uses_running_stats():
    bn = BatchNorm2d(1, dtype=F64)
    for _ in range(200):
        bn(np.random.default_rng(3).normal(2.0, 0.5, (4, 1, 8, 8)))
    bn.eval()
    y = bn(np.full((1, 1, 2, 2), 2.0))
    assert np.all(np.abs(y) < 0.05)


def test_bn_needs_two_values():
    with pytest.raises(ValueError):
        BatchNorm2d(2, dtype=F64)(np.zeros((1, 2, 1, 1)))


# --- pooling / elementwise / linear ------------------------------------------

def test_adaptive_pool_identity():
    x = np.random.default_rng(0).standard_normal((1, 2, 6, 7))
    np.testing.assert_array_equal(AdaptiveAvgPool2d((6, 7))(x), x)


def test_adaptive_pool_513_to_60():
    out = AdaptiveAvgPool2d((400, 60))(np.ones((1, 1, 400, 513)))
    assert out.shape == (1, 1, 400, 60)
    np.testing.assert_allclose(out, 1.0)


@given(st.integers(1, 20), st.integers(1, 20), st.integers(0, 99))
def test_adaptive_pool_bins(n_in, n_out, seed):
    if n_out > n_in:
        n_in, n_out = n_out, n_in
    x = np.random.default_rng(seed).standard_normal((1, 1, 1, n_in))
    out = AdaptiveAvgPool2d((1, n_out))(x)[0, 0, 0]
    for i in range(n_out):
        lo, hi = (i * n_in) // n_out, -(-((i + 1) * n_in) // n_out)
        assert out[i] == pytest.approx(x[0, 0, 0, lo:hi].mean(), abs=1e-12)


def test_adaptive_pool_rejects_zero_and_growth():
    with pytest.raises(ValueError):
        AdaptiveAvgPool2d((0, 3))
    with pytest.raises(ValueError):
        AdaptiveAvgPool2d((2, 9))(np.zeros((1, 1, 2, 4)))


def test_relu_sigmoid_examples():
    assert ReLU()(np.array([-1.0, 0.0, 2.0])).tolist() == [0.0, 0.0, 2.0]
    r = ReLU()
    r(np.array([0.0, 1.0]))
    assert r.backward(np.array([1.0, 1.0])).tolist() == [0.0, 1.0]
    assert Sigmoid()(np.array([0.0]))[0] == 0.5


def test_sigmoid_extremes_finite():
    y = Sigmoid()(np.array([-1000.0, 1000.0]))
    assert y.tolist() == [0.0, 1.0]


def test_linear_identity():
    lin = Linear(4, 4, dtype=F64)
    lin.weight.data[...] = np.eye(4)
    lin.bias.data[...] = 0
    x = np.random.default_rng(0).standard_normal((3, 4))
    np.testing.assert_array_equal(lin(x), x)


@pytest.mark.parametrize("name, module, shape", [
    ("relu", ReLU(), (3, 4)),
    ("sigmoid", Sigmoid(), (3, 4)),
    ("gap", GlobalAvgPool(), (2, 3, 4, 5)),
    ("pool", AdaptiveAvgPool2d((3, 2)), (2, 2, 7, 5)),
])
def test_elementwise_and_pool_gradients(name, module, shape):
    assert grad_check(module, [np.random.default_rng(5).standard_normal(shape)], eps=1e-6) < 1e-5


def test_linear_only_model_is_exact():
    model = Sequential(Linear(5, 4, dtype=F64), Linear(4, 2, dtype=F64))
    assert grad_check(model, [np.random.default_rng(0).standard_normal((3, 5))]) < 1e-9


# --- blocks ------------------------------------------------------------------

def test_se_open_gate_is_identity():
    se = SEBlock(4, 2, dtype=F64)
    se.fc2.weight.data[...] = 0
    se.fc2.bias.data[...] = 800.0
    x = np.random.default_rng(0).standard_normal((2, 4, 3, 3))
    np.testing.assert_array_equal(se(x), x)


def test_se_gate_depends_on_channel_means():
    se = SEBlock(4, 2, dtype=F64)
    rng = np.random.default_rng(1)
    a = rng.standard_normal((1, 4, 5, 5))
    b = a - a.mean(axis=(2, 3), keepdims=True) + a.mean(axis=(2, 3), keepdims=True)[:, :, ::-1, ::-1]
    b = np.ascontiguousarray(b[:, :, ::-1, :])  # same per-channel means, different layout
    se(a)
    ga = se._gate.copy()
    se(b)
    np.testing.assert_allclose(se._gate, ga, atol=1e-12)


def test_se_finite_differences():
    se = SEBlock(8, 4, rng=np.random.default_rng(2), dtype=F64)
    assert grad_check(se, [np.random.default_rng(3).standard_normal((2, 8, 6, 6))], eps=1e-6) < 1e-5


def _zero_convs(block):
    for conv in [block.conv1, block.conv3, *block.convs]:
        conv.weight.data[...] = 0
        conv.bias.data[...] = 0


def test_res2net_zero_branch_passes_residual():
    blk = Res2NetBlock(8, 4, 2, 4, dtype=F64)
    _zero_convs(blk)
    blk.se.fc2.weight.data[...] = 0
    blk.se.fc2.bias.data[...] = 0  # gate sigmoid(0) = 0.5
    x = np.abs(np.random.default_rng(0).standard_normal((2, 8, 5, 5)))
    np.testing.assert_array_equal(blk(x), x)


def _bn_train(x, bn):
    mean = x.mean(axis=(0, 2, 3), keepdims=True)
    var = x.var(axis=(0, 2, 3), keepdims=True)
    return (x - mean) / np.sqrt(var + bn.eps) * bn.gamma.data[None, :, None, None] + bn.beta.data[None, :, None, None]


def _conv(x, c):
    k = c.weight.shape[2]
    return conv2d_loops(x, c.weight.data, c.bias.data, (1, 1), (k // 2, k // 2))


def test_res2net_scale2_equals_bottleneck():
    blk = Res2NetBlock(8, 4, 2, 4, rng=np.random.default_rng(1), dtype=F64)
    x = np.random.default_rng(2).standard_normal((2, 8, 5, 5))
    relu = lambda v: np.maximum(v, 0)
    mid = relu(_bn_train(_conv(x, blk.conv1), blk.bn1))
    y1 = relu(_bn_train(_conv(mid[:, 2:], blk.convs[0]), blk.bns[0]))
    out = _bn_train(_conv(np.concatenate([mid[:, :2], y1], axis=1), blk.conv3), blk.bn3)
    pooled = out.mean(axis=(2, 3))
    h = relu(pooled @ blk.se.fc1.weight.data.T + blk.se.fc1.bias.data)
    gate = 1 / (1 + np.exp(-(h @ blk.se.fc2.weight.data.T + blk.se.fc2.bias.data)))
    want = relu(out * gate[:, :, None, None] + x)
    assert np.max(np.abs(blk(x) - want)) < 1e-12


def test_res2net_finite_differences():
    blk = Res2NetBlock(8, 8, 4, 4, rng=np.random.default_rng(3), dtype=F64)
    assert grad_check(blk, [np.random.default_rng(4).standard_normal((2, 8, 6, 6))], eps=1e-6) < 1e-5


@given(st.sampled_from([2, 3, 4]), st.integers(1, 4), st.integers(2, 6), st.integers(2, 6))
def test_res2net_shape_invariant(scale, groups, h, w):
    blk = Res2NetBlock(6, scale * groups, scale, 2, dtype=F64)
    x = np.random.default_rng(0).standard_normal((2, 6, h, w))
    assert blk(x).shape == x.shape


def test_res2net_indivisible():
    with pytest.raises(ValueError):
        Res2NetBlock(8, 6, 4)
    with pytest.raises(ValueError):
        Res2NetBlock(8, 8, 1)


# --- loss --------------------------------------------------------------------

def test_xent_uniform_logits():
    for label in (0, 1):
        loss, _ = softmax_xent(np.zeros((1, 2)), [label])
        assert loss == pytest.approx(np.log(2), abs=1e-15)


def test_xent_saturated():
    loss, grad = softmax_xent(np.array([[-30.0, 30.0]]), [1])
    assert loss < 1e-20 and np.all(np.abs(grad) < 1e-20)


def test_xent_gradient_finite_differences():
    rng = np.random.default_rng(0)
    z, y = rng.standard_normal((5, 2)), rng.integers(0, 2, 5)
    _, g = softmax_xent(z, y)
    num = np.zeros_like(z)
    for idx in np.ndindex(z.shape):
        zp, zm = z.copy(), z.copy()
        zp[idx] += 1e-6
        zm[idx] -= 1e-6
        num[idx] = (softmax_xent(zp, y)[0] - softmax_xent(zm, y)[0]) / 2e-6
    assert np.linalg.norm(g - num) / np.linalg.norm(g + num) < 1e-8


# --- adam --------------------------------------------------------------------

def test_adam_first_step():
    p = Parameter(np.array([1.0]))
    p.grad[...] = 1.0
    adam_step([p], AdamState(lr=1e-3))
    assert p.data[0] == pytest.approx(0.999, abs=1e-9)


def test_adam_zero_grad_no_decay_is_noop():
    p = Parameter(np.array([0.7, -2.0]))
    adam_step([p], AdamState(weight_decay=0.0))
    assert p.data.tolist() == [0.7, -2.0]


@given(st.floats(-10, 10), st.floats(-10, 10), st.integers(1, 5))
def test_adam_elementwise(theta, g, steps):
    a, b = Parameter(np.array([theta])), Parameter(np.array([theta, theta]))
    sa, sb = AdamState(), AdamState()
    for _ in range(steps):
        a.grad[...] = g
        b.grad[...] = g
        adam_step([a], sa)
        adam_step([b], sb)
    assert b.data[0] == b.data[1] == a.data[0]


def test_adam_validation():
    with pytest.raises(ValueError):
        AdamState(beta2=1.0)
    with pytest.raises(ValueError):
        AdamState(lr=0.0)
    p = Parameter(np.zeros(2))
    st_ = AdamState()
    adam_step([p], st_)
    with pytest.raises(ValueError):
        adam_step([p, Parameter(np.zeros(1))], st_)


# --- counting / checkpoint / grad check --------------------------------------

def test_param_count_examples():
    assert param_count(Conv2d(1, 4, 3)) == 40
    assert param_count(None) == 0
    assert param_count(Sequential()) == 0


def test_checkpoint_roundtrip(tmp_path):
    t = {"a": np.arange(6, dtype=np.float32).reshape(2, 3), "b": np.array([1.5], np.float32)}
    save_checkpoint(tmp_path / "c.pfck", t, {"k": 1}, {"seed": 3}, {"step": 2})
    tensors, cfg, meta, adam = load_checkpoint(tmp_path / "c.pfck")
    assert cfg == {"k": 1} and meta == {"seed": 3} and adam == {"step": 2}
    for k in t:
        np.testing.assert_array_equal(tensors[k], t[k])
    assert (tmp_path / "c.pfck").read_bytes()[:4] == b"PFCK"


def test_checkpoint_bad_magic(tmp_path):
    (tmp_path / "x").write_bytes(b"NOPE" + bytes(16))
    with pytest.raises(ValueError):
        load_checkpoint(tmp_path / "x")


def test_grad_check_catches_wrong_backward():
    lin = Linear(4, 3, dtype=F64)
    orig = lin.backward
    lin.backward = lambda g: 1.5 * orig(g)
    assert grad_check(lin, [np.random.default_rng(0).standard_normal((2, 4))]) > 1e-2
