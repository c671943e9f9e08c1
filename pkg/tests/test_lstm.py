import numpy as np
import pytest

from raecodec.errors import InvalidArgumentError
from raecodec.lstm import LstmParams, LstmState, lstm_step, lstm_step_backward
from raecodec.nn import grad_check, sigmoid


def random_cell(rng, d_z, d_m, scale=1.0):
    return LstmParams(
        scale * rng.normal(size=(4 * d_m, d_z)),
        scale * rng.normal(size=(4 * d_m, d_m)),
        scale * rng.normal(size=4 * d_m),
    )


def test_zero_params_zero_state():
    s, _ = lstm_step(LstmParams.zeros(3, 2), np.array([1.0, -2.0, 5.0]), LstmState.zeros(2))
    np.testing.assert_array_equal(s.c, 0)
    np.testing.assert_array_equal(s.m, 0)


def test_zero_params_halves_cell():
    v = np.array([0.8, -1.5])
    s, _ = lstm_step(LstmParams.zeros(1, 2), np.array([3.0]), LstmState(v, np.array([0.3, 0.9])))
    np.testing.assert_allclose(s.c, 0.5 * v, rtol=0, atol=1e-15)
    np.testing.assert_allclose(s.m, 0.5 * np.tanh(0.5 * v), rtol=0, atol=1e-15)


def test_forget_gate_saturation():
    params = LstmParams.from_gates(W_i=np.zeros((1, 1)), b_f=np.array([20.0]))
    s, _ = lstm_step(params, np.array([0.7]), LstmState(np.array([1.0]), np.array([0.0])))
    assert abs(s.c[0] - 1.0) < 1e-6


def test_gate_views():
    rng = np.random.default_rng(0)
    p = random_cell(rng, 2, 3)
    np.testing.assert_array_equal(p.W_f, p.W[6:9])
    np.testing.assert_array_equal(p.U_c, p.U[9:12])
    np.testing.assert_array_equal(p.b_o, p.b[3:6])


def test_dimension_errors():
    with pytest.raises(InvalidArgumentError):
        lstm_step(LstmParams.zeros(2, 2), np.zeros(3), LstmState.zeros(2))
    with pytest.raises(InvalidArgumentError):
        lstm_step(LstmParams.zeros(2, 2), np.zeros(2), LstmState.zeros(3))
    with pytest.raises(InvalidArgumentError):
        LstmParams(np.zeros((8, 2)), np.zeros((8, 3)), np.zeros(8))


def test_forward_is_pure_and_deterministic():
    rng = np.random.default_rng(1)
    p = random_cell(rng, 3, 4)
    s = LstmState(rng.normal(size=4), rng.normal(size=4))
    c0, m0 = s.c.copy(), s.m.copy()
    x = rng.normal(size=3)
    a, _ = lstm_step(p, x, s)
    b, _ = lstm_step(p, x, s)
    np.testing.assert_array_equal(a.c, b.c)
    np.testing.assert_array_equal(a.m, b.m)
    np.testing.assert_array_equal(s.c, c0)
    np.testing.assert_array_equal(s.m, m0)


def test_output_ranges():
    rng = np.random.default_rng(2)
    for _ in range(200):
        p = random_cell(rng, 3, 4)
        s = LstmState(rng.normal(size=4) * 3, rng.uniform(-1, 1, 4))
        s2, cache = lstm_step(p, rng.normal(size=3), s)
        assert np.all(np.abs(s2.m) < 1)
        for gate in (cache.i, cache.o, cache.f):
            assert np.all((gate > 0) & (gate < 1))


def test_backward_zero_upstream():
    rng = np.random.default_rng(3)
    p = random_cell(rng, 2, 2)
    _, cache = lstm_step(p, rng.normal(size=2), LstmState(rng.normal(size=2), rng.normal(size=2)))
    grads, dx, dprev = lstm_step_backward(p, cache, np.zeros(2), np.zeros(2))
    for arr in (grads.W, grads.U, grads.b, dx, dprev.c, dprev.m):
        assert not arr.any()


def test_backward_forget_path_without_candidate():
    rng = np.random.default_rng(4)
    p = random_cell(rng, 2, 3)
    W, U, b = p.W.copy(), p.U.copy(), p.b.copy()
    W[9:] = U[9:] = b[9:] = 0  # candidate path off
    p = LstmParams(W, U, b)
    _, cache = lstm_step(p, rng.normal(size=2), LstmState(rng.normal(size=3), rng.normal(size=3)))
    dc = rng.normal(size=3)
    _, _, dprev = lstm_step_backward(p, cache, dc, np.zeros(3))
    np.testing.assert_allclose(dprev.c, cache.f * dc, rtol=0, atol=1e-15)


def _flat_check(rng, d_z, d_m):
    # init-scale weights; saturated gates give ~1e-8 gradients where the
    # relative metric only measures finite-difference rounding
    p = random_cell(rng, d_z, d_m, scale=0.5)
    x = rng.normal(size=d_z)
    c, m = rng.normal(size=d_m), rng.uniform(-1, 1, d_m)
    wc, wm = rng.normal(size=d_m), rng.normal(size=d_m)
    nW, nU = p.W.size, p.U.size

    def unpack(v):
        k = nW + nU + p.b.size
        return (
            LstmParams(v[:nW].reshape(p.W.shape), v[nW : nW + nU].reshape(p.U.shape), v[nW + nU : k]),
            v[k : k + d_z],
            LstmState(v[k + d_z : k + d_z + d_m], v[k + d_z + d_m :]),
        )

    def f(v):
        pp, xx, ss = unpack(v)
        s2, _ = lstm_step(pp, xx, ss)
        return float(wc @ s2.c + wm @ s2.m)

    _, cache = lstm_step(p, x, LstmState(c, m))
    grads, dx, dprev = lstm_step_backward(p, cache, wc, wm)
    vec = np.concatenate([p.W.ravel(), p.U.ravel(), p.b, x, c, m])
    an = np.concatenate([grads.W.ravel(), grads.U.ravel(), grads.b, dx, dprev.c, dprev.m])
    return grad_check(f, vec, an, 1e-5)


def test_backward_scalar_cell():
    assert _flat_check(np.random.default_rng(10), 1, 1) < 1e-6


def test_backward_randomized_cells():
    rng = np.random.default_rng(11)
    for _ in range(50):
        d_z, d_m = rng.integers(1, 5, size=2)
        assert _flat_check(rng, int(d_z), int(d_m)) < 1e-4


def test_sigmoid_of_twenty():
    assert sigmoid(20.0) == pytest.approx(1.0, abs=1e-8)
