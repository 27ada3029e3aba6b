"""Reverse-mode autodiff, dense layers, and the Adam optimizer."""

import numpy as np
import pytest

from gnnfec import nn
from gnnfec.codes import hamming_7_4, tanner_graph
from gnnfec.errors import InvalidParameter, ShapeMismatch, TapeMismatch
from gnnfec.nn import (
    Adam,
    DenseLayer,
    GradientTape,
    Mlp,
    Tensor,
    adam_step,
    as_tensor,
    glorot_uniform_init,
    mlp_forward,
)


def _finite_difference(fn, arr, step=1e-6):
    grad = np.zeros_like(arr)
    flat = arr.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + step
        up = fn()
        flat[i] = keep - step
        down = fn()
        flat[i] = keep
        gflat[i] = (up - down) / (2 * step)
    return grad


def test_tensor_wraps_float64():
    t = Tensor([[1, 2], [3, 4]])
    assert t.data.dtype == np.float64
    assert t.shape == (2, 2)
    assert t.size == 4
    assert not t.requires_grad
    assert as_tensor(t) is t


def test_ops_outside_tape_are_plain():
    a = Tensor([1.0, 2.0], requires_grad=True)
    out = nn.tanh(nn.add(a, a))
    assert not out.requires_grad
    assert not nn.is_recording()
    assert np.allclose(out.data, np.tanh([2.0, 4.0]))


def test_add_mul_broadcast_gradients():
    a = Tensor(np.arange(3.0).reshape(3, 1), requires_grad=True)
    b = Tensor(np.arange(4.0).reshape(1, 4), requires_grad=True)
    with GradientTape() as tape:
        out = nn.reduce_sum(nn.mul(nn.add(a, b), b))
    ga, gb = tape.gradient(out, [a, b])
    assert ga.shape == (3, 1)
    assert gb.shape == (1, 4)
    # d/da sum((a+b)*b) = sum_j b_j per row; d/db = sum_i (a_i + 2b_j)
    assert np.allclose(ga, np.full((3, 1), np.arange(4.0).sum()))
    assert np.allclose(gb, (np.arange(3.0).sum() + 3 * 2 * np.arange(4.0))[None, :])


@pytest.mark.parametrize("name", ["tanh", "sigmoid", "relu", "identity"])
def test_activation_gradients_match_finite_differences(name):
    rng = np.random.default_rng(3)
    x = Tensor(rng.standard_normal(17), requires_grad=True)
    op = getattr(nn, name)
    with GradientTape() as tape:
        loss = nn.reduce_sum(op(x))
    (grad,) = tape.gradient(loss, [x])
    fd = _finite_difference(lambda: float(op(Tensor(x.data)).data.sum()), x.data)
    assert np.allclose(grad, fd, rtol=1e-6, atol=1e-8)


def test_reduce_mean_gradient():
    x = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
    with GradientTape() as tape:
        loss = nn.reduce_mean(x)
    (grad,) = tape.gradient(loss, [x])
    assert np.allclose(grad, np.full((2, 3), 1 / 6))


def test_concat_gradient_splits_by_source():
    a = Tensor(np.ones((2, 3)), requires_grad=True)
    b = Tensor(np.ones((2, 2)), requires_grad=True)
    weights = np.array([[1.0, 2, 3, 4, 5], [6, 7, 8, 9, 10]])
    with GradientTape() as tape:
        loss = nn.reduce_sum(nn.mul(nn.concat([a, b]), Tensor(weights)))
    ga, gb = tape.gradient(loss, [a, b])
    assert np.array_equal(ga, weights[:, :3])
    assert np.array_equal(gb, weights[:, 3:])


def test_linear_forward_and_gradients():
    rng = np.random.default_rng(4)
    x = Tensor(rng.standard_normal((5, 3)), requires_grad=True)
    w = Tensor(rng.standard_normal((2, 3)), requires_grad=True)
    b = Tensor(rng.standard_normal(2), requires_grad=True)
    cotangent = rng.standard_normal((5, 2))
    with GradientTape() as tape:
        out = nn.linear(x, w, b)
        loss = nn.reduce_sum(nn.mul(out, Tensor(cotangent)))
    assert np.allclose(out.data, x.data @ w.data.T + b.data)
    gx, gw, gb = tape.gradient(loss, [x, w, b])
    assert np.allclose(gx, cotangent @ w.data)
    assert np.allclose(gw, cotangent.T @ x.data)
    assert np.allclose(gb, cotangent.sum(axis=0))
    with pytest.raises(ShapeMismatch):
        nn.linear(Tensor(np.zeros((2, 4))), w)


def test_gather_backward_is_segment_sum_adjoint():
    # <gather(x), y> == <x, scatter(y)>, so d/dx sum(gather(x) * y)
    # must equal the per-source-row sums of y
    graph = tanner_graph(hamming_7_4())
    rng = np.random.default_rng(5)
    x = Tensor(rng.standard_normal((2, graph.n_vn, 3)), requires_grad=True)
    y = rng.standard_normal((2, graph.n_edges, 3))
    with GradientTape() as tape:
        gathered = nn.gather(x, graph.edge_vn, graph.vn_plan)
        loss = nn.reduce_sum(nn.mul(gathered, Tensor(y)))
    (grad,) = tape.gradient(loss, [x])
    want = np.zeros_like(x.data)
    for e in range(graph.n_edges):
        want[:, graph.edge_vn[e], :] += y[:, e, :]
    assert np.allclose(grad, want, rtol=1e-12, atol=1e-13)


@pytest.mark.parametrize("mean", [False, True])
def test_segment_aggregate_gradient(mean):
    graph = tanner_graph(hamming_7_4())
    rng = np.random.default_rng(6)
    x = Tensor(rng.standard_normal((2, graph.n_edges, 3)), requires_grad=True)
    y = rng.standard_normal((2, graph.n_fn, 3))
    with GradientTape() as tape:
        agg = nn.segment_aggregate(x, graph.fn_plan, mean=mean)
        loss = nn.reduce_sum(nn.mul(agg, Tensor(y)))
    (grad,) = tape.gradient(loss, [x])
    scale = 1.0 / graph.fn_degree if mean else np.ones(graph.n_fn)
    want = (y * scale[None, :, None])[:, graph.edge_fn, :]
    assert np.allclose(grad, want, rtol=1e-12, atol=1e-13)


def test_readout_gradients_match_finite_differences():
    rng = np.random.default_rng(7)
    h = Tensor(rng.standard_normal((2, 4, 3)), requires_grad=True)
    q = Tensor(rng.standard_normal(3), requires_grad=True)
    cot = rng.standard_normal((2, 4))

    def value():
        return float((nn.readout(Tensor(h.data), Tensor(q.data)).data * cot).sum())

    with GradientTape() as tape:
        loss = nn.reduce_sum(nn.mul(nn.readout(h, q), Tensor(cot)))
    gh, gq = tape.gradient(loss, [h, q])
    assert np.allclose(gh, _finite_difference(value, h.data), rtol=1e-6, atol=1e-9)
    assert np.allclose(gq, _finite_difference(value, q.data), rtol=1e-6, atol=1e-9)


def test_composed_network_gradient_matches_finite_differences():
    rng = np.random.default_rng(8)
    mlp = Mlp.create(4, 6, 2, n_layers=2, activation="tanh", use_bias=True, rng=rng)
    x = rng.standard_normal((5, 4))

    def value():
        return float(np.sum(mlp(Tensor(x)).data ** 2))

    with GradientTape() as tape:
        out = mlp(Tensor(x))
        loss = nn.reduce_sum(nn.mul(out, out))
    grads = tape.gradient(loss, mlp.parameters())
    for param, grad in zip(mlp.parameters(), grads):
        fd = _finite_difference(value, param.data)
        assert np.allclose(grad, fd, rtol=1e-5, atol=1e-8)


def test_untouched_parameter_gets_zero_gradient():
    a = Tensor(np.ones(3), requires_grad=True)
    unused = Tensor(np.ones((2, 2)), requires_grad=True)
    with GradientTape() as tape:
        loss = nn.reduce_sum(a)
    ga, gu = tape.gradient(loss, [a, unused])
    assert np.allclose(ga, 1.0)
    assert np.array_equal(gu, np.zeros((2, 2)))


def test_glorot_bounds_and_determinism():
    rng = np.random.default_rng(11)
    w = glorot_uniform_init(30, 10, rng)
    assert w.shape == (10, 30)
    limit = np.sqrt(6.0 / 40)
    assert np.all(np.abs(w) <= limit)
    again = glorot_uniform_init(30, 10, np.random.default_rng(11))
    assert np.array_equal(w, again)
    with pytest.raises(InvalidParameter):
        glorot_uniform_init(0, 5, rng)


def test_dense_layer_without_bias_fixes_zero():
    rng = np.random.default_rng(12)
    layer = DenseLayer.create(4, 3, activation="tanh", use_bias=False, rng=rng)
    out = layer(Tensor(np.zeros((2, 4))))
    assert np.array_equal(out.data, np.zeros((2, 3)))
    assert len(layer.parameters()) == 1


def test_dense_layer_rejects_unknown_activation():
    with pytest.raises(InvalidParameter):
        DenseLayer(np.zeros((2, 2)), activation="softsign")


def test_mlp_width_chaining():
    rng = np.random.default_rng(13)
    mlp = Mlp.create(5, 7, 3, n_layers=3, activation="relu", use_bias=True, rng=rng)
    assert [layer.in_dim for layer in mlp.layers] == [5, 7, 7]
    assert [layer.out_dim for layer in mlp.layers] == [7, 7, 3]
    assert len(mlp.parameters()) == 6
    bad = DenseLayer.create(3, 4, "identity", False, rng)
    with pytest.raises(ShapeMismatch):
        Mlp([bad, DenseLayer.create(5, 2, "identity", False, rng)])
    with pytest.raises(InvalidParameter):
        Mlp.create(5, 7, 3, n_layers=0, activation="relu", use_bias=True, rng=rng)


def test_mlp_forward_accepts_single_vector():
    rng = np.random.default_rng(14)
    mlp = Mlp.create(3, 4, 2, n_layers=2, activation="tanh", use_bias=False, rng=rng)
    vec = rng.standard_normal(3)
    single = mlp_forward(mlp, vec)
    batch = mlp(Tensor(vec[None, :]))
    assert single.data.shape == (2,)
    assert np.array_equal(single.data, batch.data[0])


def test_adam_first_step_matches_closed_form():
    g = np.array([0.5, -2.0, 1e-12])
    p = Tensor(np.zeros(3), requires_grad=True)
    opt = Adam([p], learning_rate=1e-3)
    opt.step([g])
    # after one bias-corrected step: delta = -lr * g / (|g| + eps)
    want = -1e-3 * g / (np.abs(g) + 1e-8)
    assert np.allclose(p.data, want, rtol=1e-12)


def test_adam_converges_on_quadratic():
    p = Tensor(np.array([5.0, -3.0]), requires_grad=True)
    opt = Adam([p], learning_rate=0.1)
    for _ in range(500):
        opt.step([2.0 * p.data])
    assert np.all(np.abs(p.data) < 1e-3)


def test_adam_validates_gradients():
    p = Tensor(np.zeros(3), requires_grad=True)
    opt = Adam([p])
    with pytest.raises(ShapeMismatch):
        opt.step([np.zeros(3), np.zeros(3)])
    with pytest.raises(ShapeMismatch):
        opt.step([np.zeros(4)])


def test_adam_step_guards_parameter_identity():
    p = Tensor(np.zeros(2), requires_grad=True)
    opt = Adam([p], learning_rate=1e-2)
    out = adam_step(opt, [p], [np.ones(2)])
    assert out[0] is p
    with pytest.raises(ShapeMismatch):
        adam_step(opt, [Tensor(np.zeros(2), requires_grad=True)], [np.ones(2)])


def test_tape_usage_errors():
    a = Tensor(np.ones(2), requires_grad=True)
    with GradientTape() as tape:
        loss = nn.reduce_sum(a)
        with pytest.raises(TapeMismatch):
            with GradientTape():
                pass
    tape.gradient(loss, [a])
    with pytest.raises(TapeMismatch):
        tape.gradient(loss, [a])
    with GradientTape() as other:
        fresh = nn.reduce_sum(a)
    with pytest.raises(TapeMismatch):
        tape2 = GradientTape()
        with tape2:
            _ = nn.reduce_sum(a)
        tape2.gradient(fresh, [a])
    with GradientTape() as tape3:
        non_scalar = nn.add(a, a)
    with pytest.raises(ShapeMismatch):
        tape3.gradient(non_scalar, [a])
    with GradientTape() as tape4:
        plain = Tensor(np.array(1.0))
    with pytest.raises(TapeMismatch):
        tape4.gradient(plain, [a])
