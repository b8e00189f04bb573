"""Each primitive's backward pass against central differences."""
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lculab.nn import ops


def numeric_grad(f, x, eps=1e-6):
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + eps
        up = f()
        x[i] = old - eps
        down = f()
        x[i] = old
        g[i] = (up - down) / (2 * eps)
    return g


@pytest.fixture
def r():
    return np.random.default_rng(0)


def test_linear(r):
    x, w, b = r.normal(size=(2, 3, 4)), r.normal(size=(4, 5)), r.normal(size=5)
    dy = r.normal(size=(2, 3, 5))
    f = lambda: float((ops.linear_fwd(x, w, b)[0] * dy).sum())
    dx, dw, db = ops.linear_bwd(dy, x, w)
    np.testing.assert_allclose(dx, numeric_grad(f, x), atol=1e-7)
    np.testing.assert_allclose(dw, numeric_grad(f, w), atol=1e-7)
    np.testing.assert_allclose(db, numeric_grad(f, b), atol=1e-7)


def test_gelu(r):
    x = r.normal(size=(3, 7)) * 3
    dy = r.normal(size=x.shape)
    f = lambda: float((ops.gelu(x) * dy).sum())
    np.testing.assert_allclose(ops.gelu_bwd(dy, x), numeric_grad(f, x), atol=1e-7)
    assert ops.gelu(np.array([0.0]))[0] == 0.0


def test_layernorm(r):
    x, g, b = r.normal(size=(2, 3, 8)), r.normal(size=8), r.normal(size=8)
    dy = r.normal(size=x.shape)
    f = lambda: float((ops.layernorm_fwd(x, g, b)[0] * dy).sum())
    _, cache = ops.layernorm_fwd(x, g, b)
    dx, dg, db = ops.layernorm_bwd(dy, cache)
    np.testing.assert_allclose(dx, numeric_grad(f, x), atol=1e-6)
    np.testing.assert_allclose(dg, numeric_grad(f, g), atol=1e-6)
    np.testing.assert_allclose(db, numeric_grad(f, b), atol=1e-6)


@pytest.mark.parametrize("causal", [True, False])
def test_attention(r, causal):
    d, heads = 8, 2
    p = {f"a.{n}.w": r.normal(size=(d, d)) * 0.5 for n in "qkvo"}
    p.update({f"a.{n}.b": r.normal(size=d) * 0.1 for n in "qkvo"})
    xq = r.normal(size=(2, 5, d))
    xkv = xq if causal else r.normal(size=(2, 6, d))
    dy = r.normal(size=(2, 5, d))

    def loss():
        return float((ops.mha_fwd(xq, xkv, p, "a", heads, causal)[0] * dy).sum())

    _, cache = ops.mha_fwd(xq, xkv, p, "a", heads, causal)
    grads = {}
    dq, dkv = ops.mha_bwd(dy, cache, p, "a", grads)
    if causal:
        np.testing.assert_allclose(dq + dkv, numeric_grad(loss, xq), atol=1e-6)
    else:
        np.testing.assert_allclose(dq, numeric_grad(loss, xq), atol=1e-6)
        np.testing.assert_allclose(dkv, numeric_grad(loss, xkv), atol=1e-6)
    for name in ("a.q.w", "a.k.b", "a.v.w", "a.o.w"):
        np.testing.assert_allclose(grads[name], numeric_grad(loss, p[name]), atol=1e-6)


@pytest.mark.parametrize("stride,pad", [(1, 0), (2, 1), (1, 1)])
def test_conv(r, stride, pad):
    x = r.normal(size=(2, 3, 7, 7))
    w = r.normal(size=(4, 3, 3, 3))
    b = r.normal(size=4)
    y, cache = ops.conv2d_fwd(x, w, b, stride, pad)
    dy = r.normal(size=y.shape)
    f = lambda: float((ops.conv2d_fwd(x, w, b, stride, pad)[0] * dy).sum())
    dx, dw, db = ops.conv2d_bwd(dy, cache, w)
    np.testing.assert_allclose(dx, numeric_grad(f, x), atol=1e-6)
    np.testing.assert_allclose(dw, numeric_grad(f, w), atol=1e-6)
    np.testing.assert_allclose(db, numeric_grad(f, b), atol=1e-6)


def test_conv_matches_direct_loop(r):
    x = r.normal(size=(1, 2, 5, 5))
    w = r.normal(size=(3, 2, 3, 3))
    y, _ = ops.conv2d_fwd(x, w, np.zeros(3))
    direct = np.zeros((1, 3, 3, 3))
    for o in range(3):
        for i in range(3):
            for j in range(3):
                direct[0, o, i, j] = (x[0, :, i:i + 3, j:j + 3] * w[o]).sum()
    np.testing.assert_allclose(y, direct, atol=1e-12)


@given(st.lists(st.floats(-50, 50), min_size=2, max_size=10))
def test_softmax_rows(z):
    p = ops.softmax(np.array([z]))
    assert abs(p.sum() - 1) < 1e-12
    np.testing.assert_allclose(np.log(p + 1e-300), ops.log_softmax(np.array([z])), atol=1e-9)


@given(st.lists(st.floats(-800, 800), min_size=1, max_size=10))
def test_sigmoid_is_finite(z):
    s = ops.sigmoid(np.array(z))
    assert np.isfinite(s).all() and (s >= 0).all() and (s <= 1).all()


def test_sinusoidal():
    pe = ops.sinusoidal(30, 16)
    assert pe.shape == (30, 16) and pe.dtype == np.float32
    assert pe[0, 0] == 0 and pe[0, 1] == 1
    assert len({tuple(r) for r in pe.round(6)}) == 30
