"""Small dense-network toolkit: layers, activations, loss, Adam and gradient checks.

Everything here works on 1-D/2-D float64 numpy arrays and is pure: inputs are
never modified in place.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, NumericError

ACTIVATIONS = ("sigmoid", "tanh", "identity")


def sigmoid(v):
    v = np.asarray(v, dtype=np.float64)
    # exp of a non-positive argument only: no overflow for large |v|
    e = np.exp(-np.abs(v))
    return np.where(v >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def tanh(v):
    return np.tanh(np.asarray(v, dtype=np.float64))


def activate(v, kind):
    if kind == "sigmoid":
        return sigmoid(v)
    if kind == "tanh":
        return tanh(v)
    if kind == "identity":
        return np.asarray(v, dtype=np.float64)
    raise InvalidArgumentError(f"unknown activation {kind!r}")


def activation_grad(y, kind):
    """Derivative of the activation expressed through its output ``y``."""
    if kind == "sigmoid":
        return y * (1.0 - y)
    if kind == "tanh":
        return 1.0 - y * y
    if kind == "identity":
        return np.ones_like(y)
    raise InvalidArgumentError(f"unknown activation {kind!r}")


@dataclass(frozen=True)
class DenseLayer:
    weights: np.ndarray
    bias: np.ndarray
    activation: str = "identity"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if w.ndim != 2 or b.ndim != 1:
            raise InvalidArgumentError("weights must be 2-D and bias 1-D")
        if b.shape[0] != w.shape[0]:
            raise InvalidArgumentError(
                f"bias length {b.shape[0]} != weight rows {w.shape[0]}"
            )
        if self.activation not in ACTIVATIONS:
            raise InvalidArgumentError(f"unknown activation {self.activation!r}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def n_in(self):
        return self.weights.shape[1]

    @property
    def n_out(self):
        return self.weights.shape[0]

    def replace(self, weights=None, bias=None):
        return DenseLayer(
            self.weights if weights is None else weights,
            self.bias if bias is None else bias,
            self.activation,
        )


def affine(layer, x):
    """Return ``activation(W @ x + b)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != layer.n_in:
        raise InvalidArgumentError(
            f"input of shape {x.shape} does not match layer width {layer.n_in}"
        )
    return activate(layer.weights @ x + layer.bias, layer.activation)


def affine_backward(layer, x, y, dy):
    """Gradients of an ``affine`` call given its input, output and upstream grad.

    Returns ``(dW, db, dx)``.
    """
    dpre = dy * activation_grad(y, layer.activation)
    return np.outer(dpre, x), dpre, layer.weights.T @ dpre


def mse_loss(y, x):
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if y.shape != x.shape:
        raise InvalidArgumentError(f"shape mismatch {y.shape} vs {x.shape}")
    diff = y - x
    n = diff.size
    return float(np.dot(diff.ravel(), diff.ravel()) / n), 2.0 * diff / n


def glorot_uniform(rng, n_out, n_in):
    limit = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-limit, limit, size=(n_out, n_in))


@dataclass(frozen=True)
class AdamState:
    """Moment accumulators for a list of parameter arrays."""

    first: tuple
    second: tuple
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, params, **hyper):
        zeros = tuple(np.zeros_like(p, dtype=np.float64) for p in params)
        return cls(zeros, tuple(z.copy() for z in zeros), 0, **hyper)


def optimizer_step(params, grads, state):
    """One bias-corrected Adam update.

    ``params`` and ``grads`` are sequences of arrays in matching order.
    Returns ``(new_params, new_state)``; nothing is modified in place.
    """
    if not (len(params) == len(grads) == len(state.first)):
        raise InvalidArgumentError("params, grads and optimizer state differ in length")
    t = state.step + 1
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    new_params, first, second = [], [], []
    for p, g, m, v in zip(params, grads, state.first, state.second):
        if not (p.shape == g.shape == m.shape):
            raise InvalidArgumentError(f"shape mismatch {p.shape}/{g.shape}/{m.shape}")
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        new_params.append(p - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps))
        first.append(m)
        second.append(v)
    new_state = AdamState(
        tuple(first), tuple(second), t, state.lr, state.beta1, state.beta2, state.eps
    )
    return new_params, new_state


def grad_check(f, params, analytic, step=1e-5):
    """Max relative error between ``analytic`` and central finite differences.

    ``f`` maps a flat float64 parameter vector to a scalar. The relative error
    per coordinate is ``|fd - an| / max(1e-8, |fd| + |an|)``.
    """
    if step <= 0:
        raise InvalidArgumentError("step must be positive")
    p = np.array(params, dtype=np.float64).ravel()
    an = np.asarray(analytic, dtype=np.float64).ravel()
    if an.shape != p.shape:
        raise InvalidArgumentError("analytic gradient shape does not match params")
    worst = 0.0
    for k in range(p.size):
        orig = p[k]
        p[k] = orig + step
        fp = f(p.copy())
        p[k] = orig - step
        fm = f(p.copy())
        p[k] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError(f"non-finite objective at coordinate {k}")
        fd = (fp - fm) / (2.0 * step)
        err = abs(fd - an[k]) / max(1e-8, abs(fd) + abs(an[k]))
        worst = max(worst, err)
    return worst
