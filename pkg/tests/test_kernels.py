import numpy as np
import pytest

from dfmnet import kernels
from dfmnet.nn import (BnParams, ConvParams, batchnorm, batchnorm_fold, bilinear_resize, conv2d,
                       maxpool2, relu, sigmoid, adaptive_avg_pool)
from dfmnet.reference import (adaptive_avg_pool_naive, bilinear_naive, conv2d_naive, maxpool2_naive,
                              relative_error)
from dfmnet.tensor import ShapeError


def random_conv_case(rng):
    stride = int(rng.choice([1, 2]))
    dilation = int(rng.choice([1, 2]))
    k = int(rng.choice([1, 3]))
    c_in = int(rng.integers(1, 5))
    depthwise = rng.random() < 0.5
    groups = c_in if depthwise else 1
    c_out = c_in * int(rng.integers(1, 3)) if depthwise else int(rng.integers(1, 5))
    padding = int(rng.integers(0, dilation * (k - 1) // 2 + 2))
    h, w = (int(v) for v in rng.integers(dilation * (k - 1) + 1, 10, size=2))
    x = rng.standard_normal((int(rng.integers(1, 3)), c_in, h, w)).astype(np.float32)
    weight = rng.standard_normal((c_out, c_in // groups, k, k)).astype(np.float32)
    bias = rng.standard_normal(c_out).astype(np.float32)
    return x, ConvParams.create(weight, bias, stride, padding, dilation, groups)


def test_conv_scalar_scaling(backend):
    p = ConvParams.create(np.full((1, 1, 1, 1), 2.0))
    x = np.array([1, 2, 3, 4], np.float32).reshape(1, 1, 2, 2)
    assert conv2d(x, p).ravel().tolist() == [2, 4, 6, 8]


def test_dilated_conv_constant_interior(backend):
    rng = np.random.default_rng(0)
    w = rng.uniform(-1, 1, (1, 1, 3, 3)).astype(np.float32)
    x = np.full((1, 1, 12, 12), 1.5, np.float32)
    out = conv2d(x, ConvParams.create(w, None, 1, 2, 2))
    assert out.shape == (1, 1, 12, 12)
    # interior pixels see the full window
    np.testing.assert_allclose(out[0, 0, 4:8, 4:8], 1.5 * w.astype(np.float64).sum(), rtol=1e-6)


@pytest.mark.parametrize("seed", range(200))
def test_conv_matches_loop_oracle(seed, backend):
    rng = np.random.default_rng(seed)
    x, p = random_conv_case(rng)
    ref = conv2d_naive(x, p.weight, p.bias, p.stride, p.padding, p.dilation, p.groups)
    assert relative_error(conv2d(x, p), ref) < 1e-5


def test_conv_output_extent_formula():
    x = np.zeros((1, 2, 11, 7), np.float32)
    p = ConvParams.create(np.zeros((3, 2, 3, 3)), None, stride=2, padding=1, dilation=2)
    assert conv2d(x, p).shape == (1, 3, (11 + 2 - 4 - 1) // 2 + 1, (7 + 2 - 4 - 1) // 2 + 1)


def test_conv_errors():
    p = ConvParams.create(np.zeros((1, 2, 3, 3)))
    with pytest.raises(ShapeError):
        conv2d(np.zeros((1, 3, 5, 5), np.float32), p)
    with pytest.raises(ShapeError):
        conv2d(np.zeros((1, 2, 2, 2), np.float32), p)


def test_conv_is_linear(backend):
    rng = np.random.default_rng(11)
    for _ in range(20):
        x, p = random_conv_case(rng)
        p = ConvParams.create(p.weight, None, p.stride, p.padding, p.dilation, p.groups)
        y = rng.standard_normal(x.shape).astype(np.float32)
        a = np.float32(rng.uniform(-2, 2))
        lhs = conv2d(a * x + y, p)
        rhs = a * conv2d(x, p) + conv2d(y, p)
        assert relative_error(lhs, rhs) < 1e-5


def test_bn_fold_identity():
    rng = np.random.default_rng(0)
    p = ConvParams.create(rng.standard_normal((4, 3, 3, 3)), rng.standard_normal(4))
    bn = BnParams(np.ones(4, np.float32), np.zeros(4, np.float32), np.zeros(4, np.float32),
                  np.ones(4, np.float32), 0.0)
    q = batchnorm_fold(p, bn)
    np.testing.assert_allclose(q.weight, p.weight, atol=1e-7)
    np.testing.assert_allclose(q.bias, p.bias, atol=1e-7)


def test_bn_fold_pure_scale():
    rng = np.random.default_rng(1)
    p = ConvParams.create(rng.standard_normal((2, 2, 1, 1)), rng.standard_normal(2))
    bn = BnParams(np.full(2, 2.0, np.float32), np.zeros(2, np.float32), np.zeros(2, np.float32),
                  np.ones(2, np.float32), 0.0)
    q = batchnorm_fold(p, bn)
    assert np.array_equal(q.weight, 2 * p.weight) and np.array_equal(q.bias, 2 * p.bias)


@pytest.mark.parametrize("seed", range(30))
def test_bn_fold_two_paths(seed, backend):
    rng = np.random.default_rng(1000 + seed)
    x, p = random_conv_case(rng)
    c = p.out_channels
    bn = BnParams(rng.uniform(0.5, 2, c).astype(np.float32), rng.standard_normal(c).astype(np.float32),
                  rng.standard_normal(c).astype(np.float32), rng.uniform(0.1, 3, c).astype(np.float32))
    assert relative_error(conv2d(x, batchnorm_fold(p, bn)), batchnorm(conv2d(x, p), bn)) < 1e-5


def test_bn_fold_length_mismatch():
    p = ConvParams.create(np.zeros((3, 1, 1, 1)))
    with pytest.raises(ShapeError):
        batchnorm_fold(p, BnParams.identity(2))


def test_relu_and_sigmoid():
    x = np.array([-1, 0, 2], np.float32).reshape(1, 1, 1, 3)
    assert relu(x).ravel().tolist() == [0, 0, 2]
    assert np.array_equal(relu(relu(x)), relu(x))
    assert sigmoid(np.zeros((1, 1, 1, 1), np.float32)).item() == 0.5
    hi = sigmoid(np.float32([20.0])).item()
    lo = sigmoid(np.float32([-20.0])).item()
    assert 0 < lo < 1e-6 and 1 - 1e-6 < hi < 1
    extreme = sigmoid(np.float32([-1e4, -100, 100, 1e4]))
    assert (extreme > 0).all() and (extreme < 1).all()


def test_maxpool_small_cases(backend):
    assert maxpool2(np.array([1, 2, 3, 4], np.float32).reshape(1, 1, 2, 2)).item() == 4
    out = maxpool2(np.full((1, 2, 6, 6), 3.0, np.float32))
    assert out.shape == (1, 2, 3, 3) and np.all(out == 3)
    with pytest.raises(ShapeError):
        maxpool2(np.zeros((1, 1, 1, 4), np.float32))


@pytest.mark.parametrize("seed", range(200))
def test_maxpool_matches_oracle(seed, backend):
    rng = np.random.default_rng(seed)
    shape = (int(rng.integers(1, 3)), int(rng.integers(1, 4)), int(rng.integers(2, 10)), int(rng.integers(2, 10)))
    x = rng.standard_normal(shape).astype(np.float32)
    if seed == 0:
        x = rng.standard_normal((1, 3, 9, 9)).astype(np.float32)
    out = maxpool2(x)
    assert out.shape == maxpool2_naive(x).shape
    assert np.array_equal(out, maxpool2_naive(x).astype(np.float32))


def test_bilinear_closed_form(backend):
    x = np.array([0, 1], np.float32).reshape(1, 1, 1, 2)
    assert bilinear_resize(x, 1, 4).ravel().tolist() == [0, 0.25, 0.75, 1]


def test_bilinear_constant_and_identity(backend):
    c = np.full((1, 2, 5, 7), 0.3, np.float32)
    assert np.all(bilinear_resize(c, 13, 3) == np.float32(0.3))
    x = np.random.default_rng(2).standard_normal((2, 3, 9, 6)).astype(np.float32)
    assert np.array_equal(bilinear_resize(x, 9, 6), x)
    with pytest.raises(ShapeError):
        bilinear_resize(x, 0, 4)


def test_bilinear_down_up_preserves_mean(backend):
    x = np.random.default_rng(3).uniform(0, 1, (1, 1, 16, 16)).astype(np.float32)
    y = bilinear_resize(bilinear_resize(x, 8, 8), 16, 16)
    assert abs(y.mean() - x.mean()) / x.mean() < 0.02


@pytest.mark.parametrize("seed", range(200))
def test_bilinear_matches_oracle(seed, backend):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((1, int(rng.integers(1, 3)), int(rng.integers(1, 9)), int(rng.integers(1, 9)))).astype(np.float32)
    oh, ow = (int(v) for v in rng.integers(1, 17, size=2))
    assert relative_error(bilinear_resize(x, oh, ow), bilinear_naive(x, oh, ow)) < 1e-5


@pytest.mark.parametrize("seed", range(10))
def test_bilinear_stays_in_input_range(seed, backend):
    x = np.random.default_rng(seed).uniform(0.2, 0.9, (1, 1, 37, 29)).astype(np.float32)
    for oh, ow in ((5, 7), (64, 64), (37, 29), (3, 80)):
        y = bilinear_resize(x, oh, ow)
        assert y.min() >= x.min() and y.max() <= x.max()


@pytest.mark.parametrize("bins", [1, 2, 3, 6])
def test_adaptive_pool_matches_oracle(bins):
    x = np.random.default_rng(bins).standard_normal((1, 3, 16, 16)).astype(np.float32)
    assert relative_error(adaptive_avg_pool(x, bins), adaptive_avg_pool_naive(x, bins)) < 1e-6


@pytest.mark.skipif(len(kernels.available_backends()) < 2, reason="compiled backend not built")
def test_backends_agree():
    rng = np.random.default_rng(9)
    x = rng.standard_normal((2, 5, 17, 12)).astype(np.float32)
    w = rng.standard_normal((5, 1, 3, 3)).astype(np.float32)
    dense = rng.standard_normal((4, 5, 3, 3)).astype(np.float32)
    results = {}
    for name in kernels.available_backends():
        kernels.set_backend(name)
        results[name] = (
            conv2d(x, ConvParams.create(w, None, 2, 1, 1, 5)),
            conv2d(x, ConvParams.create(dense, None, 1, 2, 2)),
            maxpool2(x),
            bilinear_resize(x, 31, 7),
        )
    kernels.set_backend("auto")
    a, b = results.values()
    for u, v in zip(a, b):
        assert np.array_equal(u, v)


def _import_kernels(code, **env):
    import os
    import subprocess
    import sys
    return subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True,
                          env={**os.environ, **env}).stdout.split()


def test_fallback_selected_without_extension():
    code = ("import sys; sys.modules['dfmnet.kernels._ckernels'] = None\n"
            "import dfmnet.kernels as k; print(k.backend_name(), *k.available_backends())")
    assert _import_kernels(code) == ["python", "python"]


def test_env_forces_python_backend():
    assert _import_kernels("import dfmnet.kernels as k; print(k.backend_name())", DFMNET_BACKEND="python") == ["python"]


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        kernels.set_backend("gpu")
