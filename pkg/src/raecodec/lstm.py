"""LSTM memory cell without peepholes, forward and backward.

Gate weights are stored stacked in the order (input, output, forget,
candidate): ``W`` is ``4*d_m x d_z``, ``U`` is ``4*d_m x d_m`` and ``b`` has
length ``4*d_m``.  The per-gate blocks are exposed as views.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvalidArgumentError
from .nn import sigmoid

GATES = ("i", "o", "f", "c")


@dataclass(frozen=True)
class LstmParams:
    W: np.ndarray
    U: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        W = np.asarray(self.W, dtype=np.float64)
        U = np.asarray(self.U, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        if W.ndim != 2 or U.ndim != 2 or b.ndim != 1 or W.shape[0] % 4:
            raise InvalidArgumentError("malformed LSTM parameter shapes")
        d_m = W.shape[0] // 4
        if U.shape != (4 * d_m, d_m) or b.shape != (4 * d_m,):
            raise InvalidArgumentError(
                f"U {U.shape} / b {b.shape} inconsistent with hidden width {d_m}"
            )
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "b", b)

    @classmethod
    def zeros(cls, d_z, d_m):
        return cls(np.zeros((4 * d_m, d_z)), np.zeros((4 * d_m, d_m)), np.zeros(4 * d_m))

    @classmethod
    def from_gates(cls, **blocks):
        """Build from per-gate blocks, e.g. ``W_i=..., U_f=..., b_c=...``.

        Missing blocks default to zero; at least one ``W_*`` must be given to
        fix the widths.
        """
        d_m, d_z = np.shape(next(v for k, v in blocks.items() if k.startswith("W_")))
        W = np.concatenate([blocks.get(f"W_{g}", np.zeros((d_m, d_z))) for g in GATES])
        U = np.concatenate([blocks.get(f"U_{g}", np.zeros((d_m, d_m))) for g in GATES])
        b = np.concatenate([blocks.get(f"b_{g}", np.zeros(d_m)) for g in GATES])
        return cls(W, U, b)

    @property
    def d_m(self):
        return self.U.shape[1]

    @property
    def d_z(self):
        return self.W.shape[1]

    def gate(self, name):
        k = GATES.index(name)
        s = slice(k * self.d_m, (k + 1) * self.d_m)
        return self.W[s], self.U[s], self.b[s]

    def __getattr__(self, attr):
        # W_i, U_f, b_c, ... as views into the stacked arrays
        if len(attr) == 3 and attr[1] == "_" and attr[0] in "WUb" and attr[2] in GATES:
            return self.gate(attr[2])["WUb".index(attr[0])]
        raise AttributeError(attr)


class LstmState(NamedTuple):
    c: np.ndarray
    m: np.ndarray

    @classmethod
    def zeros(cls, d_m):
        return cls(np.zeros(d_m), np.zeros(d_m))


class LstmCache(NamedTuple):
    x: np.ndarray
    c_prev: np.ndarray
    m_prev: np.ndarray
    i: np.ndarray
    o: np.ndarray
    f: np.ndarray
    g: np.ndarray
    tanh_c: np.ndarray


def lstm_step(params, x, s):
    """Advance the cell by one input; returns ``(new_state, cache)``."""
    d_m = params.d_m
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.d_z,):
        raise InvalidArgumentError(f"input shape {x.shape}, expected ({params.d_z},)")
    if s.c.shape != (d_m,) or s.m.shape != (d_m,):
        raise InvalidArgumentError("state width does not match the cell")
    pre = params.W @ x + params.U @ s.m + params.b
    gates = sigmoid(pre[: 3 * d_m])
    i, o, f = gates[:d_m], gates[d_m : 2 * d_m], gates[2 * d_m :]
    g = np.tanh(pre[3 * d_m :])
    c = f * s.c + i * g
    tanh_c = np.tanh(c)
    m = o * tanh_c
    return LstmState(c, m), LstmCache(x, s.c, s.m, i, o, f, g, tanh_c)


def lstm_step_backward(params, cache, dc, dm):
    """Backpropagate upstream gradients of ``(c', m')`` through one step.

    Returns ``(dparams, dx, dstate)`` where ``dparams`` is an ``LstmParams``
    holding gradients and ``dstate`` an ``LstmState`` of gradients w.r.t. the
    previous ``(c, m)``.
    """
    d_m = params.d_m
    if cache.x.shape != (params.d_z,) or cache.c_prev.shape != (d_m,):
        raise InvalidArgumentError("cache does not match these parameters")
    dc_total = dc + dm * cache.o * (1.0 - cache.tanh_c**2)
    do = dm * cache.tanh_c
    di = dc_total * cache.g
    df = dc_total * cache.c_prev
    dg = dc_total * cache.i
    dpre = np.concatenate(
        [
            di * cache.i * (1.0 - cache.i),
            do * cache.o * (1.0 - cache.o),
            df * cache.f * (1.0 - cache.f),
            dg * (1.0 - cache.g**2),
        ]
    )
    grads = LstmParams(np.outer(dpre, cache.x), np.outer(dpre, cache.m_prev), dpre)
    dx = params.W.T @ dpre
    dprev = LstmState(dc_total * cache.f, params.U.T @ dpre)
    return grads, dx, dprev
