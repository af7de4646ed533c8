import numpy as np
import pytest

from gestaltbind.gestaltbind.diffcore import (
    OP_MAPPING,
    Adam,
    AdamState,
    Constant,
    Dense,
    Variable,
    adam_step,
    backward,
    bce_with_logits,
    forward,
    gaussian_density,
    load_arrays,
    mean,
    momentum_step,
    norm,
    reduce_sum,
    reshape,
    save_arrays,
    sigmoid,
    softplus,
    squared_error,
    tanh,
)
from gestaltbind.gestaltbind.errors import (
    GestaltError,
    GraphStateError,
    NonFiniteError,
    ShapeMismatchError,
)


def numeric_grad(root, leaf, eps=1e-6):
    base = leaf.value.copy()
    grad = np.zeros_like(base)
    for idx in np.ndindex(base.shape):
        for sign in (1.0, -1.0):
            shifted = base.copy()
            shifted[idx] += sign * eps
            leaf.assign(shifted)
            grad[idx] += sign * float(forward(root))
        grad[idx] /= 2.0 * eps
    leaf.assign(base)
    forward(root)
    return grad


def assert_grads_match(root, leaves, rtol=1e-5, atol=1e-7):
    forward(root)
    analytic = {leaf: g.copy() for leaf, g in backward(root, wrt=leaves).items()}
    for leaf in leaves:
        np.testing.assert_allclose(analytic[leaf], numeric_grad(root, leaf), rtol=rtol, atol=atol)


def test_square_example():
    x = Variable(3.0, name="x")
    y = x * x
    assert forward(y) == 9.0
    assert backward(y)[x] == 6.0


def test_ops_are_registered():
    for name in ("add", "matmul", "affine", "gaussian_density", "bce_with_logits", "norm"):
        assert name in OP_MAPPING


def test_dense_tanh_gradients(rng):
    x = Constant(rng.normal(size=(4, 3)))
    layer = Dense(3, 5, "tanh", rng)
    loss = reduce_sum(layer(x) * layer(x))
    assert_grads_match(loss, layer.parameters())


def test_broadcast_and_division_gradients(rng):
    a = Variable(rng.normal(size=(3, 4)))
    b = Variable(rng.uniform(1.0, 2.0, size=(4,)))
    c = Variable(rng.normal(size=(3, 1)))
    loss = reduce_sum((a / b - c) ** 2.0)
    assert_grads_match(loss, [a, b, c])


def test_loss_op_gradients(rng):
    logits = Variable(rng.normal(size=(6,)))
    target = Constant(rng.uniform(size=(6,)))
    assert_grads_match(bce_with_logits(logits, target), [logits])
    pred = Variable(rng.normal(size=(2, 3)))
    assert_grads_match(squared_error(softplus(pred), Constant(np.ones((2, 3)))), [pred])


@pytest.mark.parametrize("axis", [None, 1, -1, (0, 2)])
def test_mean_gradients(rng, axis):
    a = Variable(rng.normal(size=(2, 3, 4)))
    m = mean(a, axis=axis)
    loss = reduce_sum(m * m)
    assert_grads_match(loss, [a])
    np.testing.assert_allclose(forward(m), np.mean(a.value, axis=axis))


def test_gaussian_density_and_norm_gradients(rng):
    x = Variable(rng.normal(size=(3, 2)))
    centers = rng.normal(size=(5, 2))
    loss = reduce_sum(gaussian_density(x, centers, 0.7)) + reduce_sum(norm(x))
    assert_grads_match(loss, [x])


def test_reshape_and_sigmoid_gradients(rng):
    w = Variable(rng.normal(size=(2, 3)))
    act = Constant(rng.normal(size=(2, 4)))
    g = reshape(sigmoid(w).T @ act, (12,))
    loss = reduce_sum(tanh(g))
    assert_grads_match(loss, [w])


def test_norm_gradient_at_zero_is_zero():
    x = Variable(np.zeros((1, 3)))
    y = reduce_sum(norm(x))
    forward(y)
    np.testing.assert_array_equal(backward(y)[x], np.zeros((1, 3)))


def test_backward_before_forward_raises():
    x = Variable(1.0)
    with pytest.raises(GraphStateError):
        backward(x * 2.0)


def test_backward_after_leaf_change_raises():
    x = Variable(1.0)
    y = x * 2.0
    forward(y)
    x.assign(2.0)
    with pytest.raises(GraphStateError):
        backward(y)


def test_shape_mismatch_names_both_nodes():
    a = Variable(np.zeros(3), name="left")
    b = Variable(np.zeros(4), name="right")
    with pytest.raises(ShapeMismatchError) as info:
        forward(a + b)
    assert "left" in str(info.value) and "right" in str(info.value)


def test_non_finite_gradient_raises():
    x = Variable(0.0, name="x")
    y = x ** 0.5
    forward(y)
    with pytest.raises(NonFiniteError):
        backward(y)


def test_unrequested_leaves_keep_their_grad():
    a, b = Variable(2.0), Variable(3.0)
    y = a * b
    forward(y)
    grads = backward(y, wrt=[a])
    assert list(grads) == [a]
    assert b.grad == 0.0


def test_graph_reuse_after_assign():
    x = Variable(1.0)
    y = x * x * x
    forward(y)
    assert backward(y)[x] == 3.0
    x.assign(2.0)
    forward(y)
    assert backward(y)[x] == 12.0


def test_adam_first_step_moves_by_lr():
    state = AdamState.zeros_like(np.zeros(3), lr=0.1)
    new, state = adam_step(np.zeros(3), np.array([1.0, -2.0, 0.5]), state)
    np.testing.assert_allclose(new, [-0.1, 0.1, -0.1], rtol=1e-6)
    assert state.step == 1


def test_adam_rejects_nan_without_mutating():
    w = Variable(np.ones(2), name="w")
    opt = Adam([w], lr=0.1)
    with pytest.raises(NonFiniteError):
        opt.step({w: np.array([np.nan, 1.0])})
    np.testing.assert_array_equal(w.value, np.ones(2))
    assert opt.states[0].step == 0


def test_adam_minimizes_quadratic():
    w = Variable(np.array([3.0, -2.0]))
    loss = reduce_sum(w * w)
    opt = Adam([w], lr=0.1)
    for _ in range(300):
        forward(loss)
        opt.step(backward(loss, wrt=[w]))
    assert float(forward(loss)) < 1e-3


def test_momentum_step_uses_last_two_values():
    value, history = np.array(0.0), ()
    value, history = momentum_step(value, 1.0, 0.5, 0.9, history)
    assert value == -0.5
    value, history = momentum_step(value, 1.0, 0.5, 0.9, history)
    assert value == -1.0
    value, history = momentum_step(value, 1.0, 0.5, 0.9, history)
    # -0.5 from the gradient plus 0.9 * (-1.0 - -0.5)
    assert value == pytest.approx(-1.95)
    assert len(history) == 2


def test_momentum_step_nan():
    with pytest.raises(NonFiniteError):
        momentum_step(np.zeros(2), np.array([np.inf, 0.0]), 0.1, 0.9, ())


def test_save_and_load_arrays(tmp_path, rng):
    arrays = {"a": rng.normal(size=(2, 3)), "b": np.arange(4.0)}
    save_arrays(str(tmp_path / "snap"), arrays, extra=dict(note="x"))
    loaded, extra = load_arrays(str(tmp_path / "snap"))
    assert extra == dict(note="x")
    for name, value in arrays.items():
        np.testing.assert_array_equal(loaded[name], value)


def test_load_arrays_rejects_tampered_payload(tmp_path, rng):
    prefix = str(tmp_path / "snap")
    save_arrays(prefix, {"a": rng.normal(size=(3, 2))})
    payload = np.fromfile(prefix + ".bin", dtype="<f8")
    payload[4] += 1e-3
    payload.tofile(prefix + ".bin")
    with pytest.raises(GestaltError, match="digest"):
        load_arrays(prefix)
