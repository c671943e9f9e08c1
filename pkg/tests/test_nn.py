import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from raecodec.errors import InvalidArgumentError, NumericError
from raecodec.nn import (
    AdamState,
    DenseLayer,
    activate,
    affine,
    affine_backward,
    glorot_uniform,
    grad_check,
    mse_loss,
    optimizer_step,
)

finite = st.floats(-50, 50, allow_nan=False)


def test_affine_identity():
    layer = DenseLayer(np.eye(2), np.zeros(2), "identity")
    np.testing.assert_array_equal(affine(layer, [3.0, -1.0]), [3.0, -1.0])


def test_affine_zero_sigmoid():
    layer = DenseLayer(np.zeros((2, 2)), np.zeros(2), "sigmoid")
    np.testing.assert_array_equal(affine(layer, [7.0, -3.0]), [0.5, 0.5])


def test_affine_hand_product():
    layer = DenseLayer(np.array([[1.0, 2.0], [0.0, 1.0]]), np.array([1.0, 0.0]))
    np.testing.assert_array_equal(affine(layer, [1.0, 1.0]), [4.0, 1.0])


def test_affine_rejects_bad_width():
    layer = DenseLayer(np.eye(2), np.zeros(2))
    with pytest.raises(InvalidArgumentError):
        affine(layer, [1.0, 2.0, 3.0])


def test_layer_rejects_bias_mismatch():
    with pytest.raises(InvalidArgumentError):
        DenseLayer(np.eye(2), np.zeros(3))


@pytest.mark.parametrize(
    "value, kind, expected",
    [(0.0, "sigmoid", 0.5), (np.log(3.0), "sigmoid", 0.75), (0.0, "tanh", 0.0)],
)
def test_activation_values(value, kind, expected):
    assert activate(np.array([value]), kind)[0] == pytest.approx(expected, abs=1e-15)


@given(arrays(np.float64, 5, elements=finite))
def test_identity_layer_is_identity(x):
    layer = DenseLayer(np.eye(5), np.zeros(5))
    np.testing.assert_array_equal(affine(layer, x), x)


@given(arrays(np.float64, 20, elements=st.floats(-30, 30)))
def test_activation_ranges_and_monotone(x):
    xs = np.sort(x)
    s = activate(xs, "sigmoid")
    t = activate(xs, "tanh")
    assert np.all((s >= 0) & (s <= 1)) and np.all((t >= -1) & (t <= 1))
    assert np.all(np.diff(s) >= 0) and np.all(np.diff(t) >= 0)
    # strict inside the non-saturated range
    mid = np.abs(xs) < 15
    assert np.all((s[mid] > 0) & (s[mid] < 1)) and np.all(np.abs(t[mid]) < 1)


def test_mse_examples():
    loss, grad = mse_loss([0.3, -0.2], [0.3, -0.2])
    assert loss == 0 and not grad.any()
    loss, grad = mse_loss([1.0, 1.0], [0.0, 0.0])
    assert loss == 1.0
    np.testing.assert_array_equal(grad, [1.0, 1.0])
    loss, grad = mse_loss([2.0], [0.0])
    assert loss == 4.0
    np.testing.assert_array_equal(grad, [4.0])
    with pytest.raises(InvalidArgumentError):
        mse_loss([1.0], [1.0, 2.0])


# dyadic grid: squares never underflow
grid = st.integers(-4000, 4000).map(lambda k: k / 64)


@given(arrays(np.float64, 4, elements=grid), arrays(np.float64, 4, elements=grid))
def test_mse_nonnegative(y, x):
    loss, _ = mse_loss(y, x)
    assert loss >= 0
    assert (loss == 0) == np.array_equal(y, x)


def test_adam_zero_grad_keeps_params():
    params = [np.array([1.0, -2.0]), np.ones((2, 2))]
    state = AdamState.fresh(params)
    new, state2 = optimizer_step(params, [np.zeros(2), np.zeros((2, 2))], state)
    for a, b in zip(params, new):
        np.testing.assert_array_equal(a, b)
    assert state2.step == 1


def test_adam_first_step_moves_by_lr():
    # t=1: m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps)
    alpha = 0.01
    state = AdamState.fresh([np.zeros(1)], lr=alpha)
    new, _ = optimizer_step([np.zeros(1)], [np.ones(1)], state)
    assert new[0][0] == pytest.approx(-alpha / (1 + 1e-8), rel=1e-12)


def test_adam_two_steps_monotone():
    state = AdamState.fresh([np.zeros(1)])
    p = [np.zeros(1)]
    p1, state = optimizer_step(p, [np.array([0.5])], state)
    p2, state = optimizer_step(p1, [np.array([0.5])], state)
    assert p2[0][0] < p1[0][0] < 0


def test_adam_shape_mismatch():
    state = AdamState.fresh([np.zeros(2)])
    with pytest.raises(InvalidArgumentError):
        optimizer_step([np.zeros(2)], [np.zeros(3)], state)


def test_adam_is_pure():
    params = [np.array([1.0])]
    state = AdamState.fresh(params)
    optimizer_step(params, [np.array([1.0])], state)
    assert params[0][0] == 1.0 and state.step == 0 and state.first[0][0] == 0


def test_grad_check_quadratic():
    err = grad_check(lambda p: float(p[0] ** 2), [3.0], [6.0], 1e-5)
    assert err < 1e-7


def test_grad_check_doubled_gradient():
    err = grad_check(lambda p: float(p[0] ** 2), [3.0], [12.0], 1e-5)
    assert err == pytest.approx(1 / 3, rel=1e-6)


def test_grad_check_constant():
    assert grad_check(lambda p: 4.0, [1.0, 2.0], [0.0, 0.0]) == 0.0


def test_grad_check_errors():
    with pytest.raises(NumericError):
        grad_check(lambda p: float("nan"), [1.0], [0.0])
    with pytest.raises(InvalidArgumentError):
        grad_check(lambda p: 0.0, [1.0], [0.0], step=0)


def test_affine_backward_matches_finite_differences():
    rng = np.random.default_rng(3)
    for act in ("sigmoid", "tanh", "identity"):
        W, b, x = rng.normal(size=(3, 4)), rng.normal(size=3), rng.normal(size=4)
        dy = rng.normal(size=3)

        def f(vec):
            layer = DenseLayer(vec[:12].reshape(3, 4), vec[12:15], act)
            return float(dy @ affine(layer, vec[15:]))

        layer = DenseLayer(W, b, act)
        dW, db, dx = affine_backward(layer, x, affine(layer, x), dy)
        vec = np.concatenate([W.ravel(), b, x])
        assert grad_check(f, vec, np.concatenate([dW.ravel(), db, dx])) < 1e-7


def test_glorot_bounds_and_determinism():
    a = glorot_uniform(np.random.default_rng(5), 10, 6)
    b = glorot_uniform(np.random.default_rng(5), 10, 6)
    np.testing.assert_array_equal(a, b)
    assert np.all(np.abs(a) <= np.sqrt(6 / 16))
