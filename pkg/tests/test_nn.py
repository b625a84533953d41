"""Dense nets, the relational encoder, and their hand-written backward
passes, checked against central finite differences."""

import numpy as np
import pytest

from featgraph.errors import (
    ArchitectureMismatch,
    DimMismatch,
    ShapeMismatch,
    UnknownRelation,
)
from featgraph.nn import (
    SGD,
    DenseNet,
    RGCNEncoder,
    copy_parameters,
    dense_backward,
    dense_forward,
    parameter_count,
    rgcn_backward,
    rgcn_forward,
)

EPS_FD = 1e-6


def rel_err(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-8)


def central_diff(loss, arr, i):
    flat = arr.reshape(-1)
    keep = flat[i]
    flat[i] = keep + EPS_FD
    up = loss()
    flat[i] = keep - EPS_FD
    down = loss()
    flat[i] = keep
    return (up - down) / (2.0 * EPS_FD)


def test_init_bounds_and_shapes():
    net = DenseNet([6, 10, 3], seed=0)
    assert [w.shape for w in net.weights] == [(6, 10), (10, 3)]
    assert [b.shape for b in net.biases] == [(10,), (3,)]
    assert np.all(np.abs(net.weights[0]) <= 1.0 / np.sqrt(6))
    assert np.all(np.abs(net.weights[1]) <= 1.0 / np.sqrt(10))
    assert parameter_count(net) == 6 * 10 + 10 + 10 * 3 + 3


def test_forward_is_relu_then_linear():
    net = DenseNet([2, 2, 1], seed=0)
    net.weights[0][:] = np.array([[1.0, -1.0], [0.0, 1.0]])
    net.biases[0][:] = 0.0
    net.weights[1][:] = np.array([[1.0], [-1.0]])
    net.biases[1][:] = 0.5
    out, _ = dense_forward(net, np.array([2.0, 1.0]))
    # Hidden pre-acts (2, -1) clamp to (2, 0); output 2 + 0.5.
    assert out[0] == pytest.approx(2.5)
    # The output layer itself is linear: negatives pass through.
    out2, _ = dense_forward(net, np.array([-3.0, 0.0]))
    assert out2[0] == pytest.approx(-2.5)


def test_forward_rejects_wrong_width():
    net = DenseNet([4, 3, 1])
    with pytest.raises(DimMismatch):
        dense_forward(net, np.zeros(5))


@pytest.mark.parametrize("seed", range(10))
def test_dense_gradients_match_finite_difference(seed):
    rng = np.random.default_rng(seed)
    dims = [int(rng.integers(2, 7)) for _ in range(3)]
    net = DenseNet(dims, seed=seed)
    x = rng.normal(size=dims[0])
    upstream = rng.normal(size=dims[-1])

    def loss():
        out, _ = dense_forward(net, x)
        return float(out @ upstream)

    out, cache = dense_forward(net, x)
    grads, d_input = dense_backward(net, cache, upstream)
    worst = 0.0
    for p, g in zip(net.parameters(), grads):
        for i in range(p.size):
            worst = max(worst, rel_err(central_diff(loss, p, i), g.reshape(-1)[i]))
    assert worst <= 1e-4

    # Input gradient too: perturb x coordinates.
    for i in range(x.size):
        fd = central_diff(loss, x, i)
        assert rel_err(fd, d_input[i]) <= 1e-4


@pytest.mark.parametrize(
    "shape",
    [(128, 100, 1), (128, 100, 15), (256, 100, 1)],
    ids=["head", "operation", "operand"],
)
def test_agent_shape_gradients_sampled(shape):
    # Full finite differences over 13k+ parameters would be slow; a random
    # sample of coordinates per tensor still pins every layer's math.
    rng = np.random.default_rng(hash(shape) % 2**32)
    net = DenseNet(list(shape), seed=3)
    x = rng.normal(size=shape[0])
    upstream = rng.normal(size=shape[-1])

    def loss():
        out, _ = dense_forward(net, x)
        return float(out @ upstream)

    _, cache = dense_forward(net, x)
    grads, _ = dense_backward(net, cache, upstream)
    for p, g in zip(net.parameters(), grads):
        idx = rng.choice(p.size, size=min(25, p.size), replace=False)
        for i in idx:
            fd = central_diff(loss, p, i)
            assert rel_err(fd, g.reshape(-1)[i]) <= 1e-4


def _random_neighbors(rng, n, relations):
    out = []
    for _ in range(n):
        deg = int(rng.integers(0, 4))
        out.append(
            [
                (int(rng.integers(0, relations)), int(rng.integers(0, n)))
                for _ in range(deg)
            ]
        )
    return out


@pytest.mark.parametrize("seed", range(10))
def test_rgcn_gradients_match_finite_difference(seed):
    rng = np.random.default_rng(100 + seed)
    n, relations = 5, 3
    enc = RGCNEncoder(relations, dims=(4, 6, 5), seed=seed)
    feats = rng.normal(size=(n, 4))
    nbrs = _random_neighbors(rng, n, relations)
    upstream = rng.normal(size=(n, 5))

    def loss():
        out, _ = rgcn_forward(enc, feats, nbrs)
        return float((out * upstream).sum())

    _, cache = rgcn_forward(enc, feats, nbrs)
    grads = rgcn_backward(enc, cache, upstream)
    worst = 0.0
    for p, g in zip(enc.parameters(), grads):
        for i in range(p.size):
            worst = max(worst, rel_err(central_diff(loss, p, i), g.reshape(-1)[i]))
    assert worst <= 1e-4


def test_rgcn_output_shape_and_relu():
    enc = RGCNEncoder(2, dims=(3, 4, 6), seed=0)
    feats = np.random.default_rng(0).normal(size=(4, 3))
    out, _ = rgcn_forward(enc, feats, [[] for _ in range(4)])
    assert out.shape == (4, 6)
    assert np.all(out >= 0.0)


def test_rgcn_isolated_node_equals_self_path():
    # With no neighbors at all, the encoder reduces to two dense layers
    # through the self-loop slices.
    enc = RGCNEncoder(3, dims=(3, 4, 2), seed=1)
    feats = np.random.default_rng(1).normal(size=(2, 3))
    out, _ = rgcn_forward(enc, feats, [[], []])
    h = np.maximum(feats @ enc.layers[0][-1], 0.0)
    expect = np.maximum(h @ enc.layers[1][-1], 0.0)
    assert np.allclose(out, expect)


def test_rgcn_input_validation():
    enc = RGCNEncoder(2, dims=(3, 4, 2))
    feats = np.zeros((2, 3))
    with pytest.raises(UnknownRelation):
        rgcn_forward(enc, feats, [[(7, 1)], []])
    with pytest.raises(ShapeMismatch):
        rgcn_forward(enc, feats, [[(0, 5)], []])
    with pytest.raises(ShapeMismatch):
        rgcn_forward(enc, feats, [[]])
    with pytest.raises(DimMismatch):
        rgcn_forward(enc, np.zeros((2, 4)), [[], []])


def test_default_geometry_parameter_count():
    # 16 relation slices (15 edge types + self) of 7x32, then 16 of 32x64.
    enc = RGCNEncoder(15, dims=(7, 32, 64), seed=0)
    assert parameter_count(enc) == 16 * 7 * 32 + 16 * 32 * 64 == 36352
    head = DenseNet([128, 100, 1], seed=0)
    assert parameter_count(head) == 128 * 100 + 100 + 100 + 1 == 13001


def test_sgd_step_math():
    net = DenseNet([2, 2], seed=0)
    w0 = net.weights[0].copy()
    grads = [np.ones_like(net.weights[0]), np.ones_like(net.biases[0])]
    SGD(0.5).step(net.parameters(), grads)
    assert np.allclose(net.weights[0], w0 - 0.5)
    with pytest.raises(ShapeMismatch):
        SGD(0.1).step(net.parameters(), grads[:1])


def test_copy_parameters_and_mismatch():
    a = DenseNet([3, 4, 2], seed=0)
    b = DenseNet([3, 4, 2], seed=9)
    assert not np.allclose(a.weights[0], b.weights[0])
    copy_parameters(a, b)
    for pa, pb in zip(a.parameters(), b.parameters()):
        assert np.array_equal(pa, pb)
        assert pa is not pb
    c = DenseNet([3, 5, 2], seed=0)
    with pytest.raises(ArchitectureMismatch):
        copy_parameters(a, c)
