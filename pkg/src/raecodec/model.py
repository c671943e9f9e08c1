"""Recurrent autoencoder: LSTM encoder and decoder joined by a small code vector.

Per window ``x`` (length ``d_in``) the encoder computes

    z = tanh(phi_x(x))
    h = g_enc([z, m_enc])              # hidden state *before* consuming z
    (c_enc, m_enc) <- lstm(f_enc, z, (c_enc, m_enc))

and the decoder, seeing only ``h``,

    z_hat = g_dec(h)
    x_hat = o([tanh(phi_z(z_hat)), c_dec, m_dec])   # pre-update decoder state
    (c_dec, m_dec) <- lstm(f_dec, z_hat, (c_dec, m_dec))

``g_enc``, ``g_dec`` and ``o`` are two-layer maps (tanh hidden layer of width
``max(d_in, 2*d_h)``, identity output).

Model file layout (little-endian)::

    b"RAEM" | version u16 | d_in d_z d_h d_m n_channels (u32 each)
    | float64 arrays in PARAM_ORDER, row-major | crc32 u32 of all prior bytes
"""

import struct
import zlib
from dataclasses import dataclass, fields
from typing import NamedTuple

import numpy as np

from .errors import ChecksumError, FormatError, InvalidArgumentError
from .lstm import LstmParams, LstmState, lstm_step, lstm_step_backward
from .nn import DenseLayer, affine_backward, glorot_uniform, mse_loss

MODEL_MAGIC = b"RAEM"
MODEL_VERSION = 1
_HEADER = struct.Struct("<4sH5I")

LAYERS = ("phi_x", "g_enc1", "g_enc2", "g_dec1", "g_dec2", "phi_z", "o1", "o2")
CELLS = ("f_enc", "f_dec")
# serialization / flattening order
PARAM_ORDER = (
    "phi_x.W", "phi_x.b",
    "g_enc1.W", "g_enc1.b", "g_enc2.W", "g_enc2.b",
    "f_enc.W", "f_enc.U", "f_enc.b",
    "g_dec1.W", "g_dec1.b", "g_dec2.W", "g_dec2.b",
    "f_dec.W", "f_dec.U", "f_dec.b",
    "phi_z.W", "phi_z.b",
    "o1.W", "o1.b", "o2.W", "o2.b",
)  # fmt: skip


@dataclass(frozen=True)
class RaeDims:
    d_in: int
    d_z: int
    d_h: int
    d_m: int
    n_channels: int = 1

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, np.integer)) or v <= 0:
                raise InvalidArgumentError(f"{f.name} must be a positive integer, got {v!r}")
        if self.d_h >= self.d_in:
            raise InvalidArgumentError(f"d_h={self.d_h} must be < d_in={self.d_in}")
        if self.d_in % self.n_channels:
            raise InvalidArgumentError("d_in must be a multiple of n_channels")

    @classmethod
    def for_windows(cls, rae_len, n_channels=1, d_z=16, d_h=4, d_m=16):
        return cls(rae_len * n_channels, d_z, d_h, d_m, n_channels)

    @property
    def hidden(self):
        return max(self.d_in, 2 * self.d_h)

    @property
    def rae_len(self):
        return self.d_in // self.n_channels

    def shapes(self):
        """Expected array shape for every entry of ``PARAM_ORDER``."""
        d_in, d_z, d_h, d_m, hid = self.d_in, self.d_z, self.d_h, self.d_m, self.hidden
        dense = {
            "phi_x": (d_z, d_in),
            "g_enc1": (hid, d_z + d_m),
            "g_enc2": (d_h, hid),
            "g_dec1": (hid, d_h),
            "g_dec2": (d_z, hid),
            "phi_z": (d_in, d_z),
            "o1": (hid, d_in + 2 * d_m),
            "o2": (d_in, hid),
        }
        out = {}
        for name in PARAM_ORDER:
            owner, part = name.split(".")
            if owner in CELLS:
                out[name] = {"W": (4 * d_m, d_z), "U": (4 * d_m, d_m), "b": (4 * d_m,)}[part]
            else:
                out[name] = dense[owner] if part == "W" else (dense[owner][0],)
        return out


_ACT = {
    "phi_x": "tanh", "g_enc1": "tanh", "g_enc2": "identity",
    "g_dec1": "tanh", "g_dec2": "identity", "phi_z": "tanh",
    "o1": "tanh", "o2": "identity",
}  # fmt: skip


@dataclass(frozen=True)
class RaeParams:
    dims: RaeDims
    phi_x: DenseLayer
    g_enc1: DenseLayer
    g_enc2: DenseLayer
    f_enc: LstmParams
    g_dec1: DenseLayer
    g_dec2: DenseLayer
    f_dec: LstmParams
    phi_z: DenseLayer
    o1: DenseLayer
    o2: DenseLayer

    def arrays(self):
        """Parameter arrays in ``PARAM_ORDER``."""
        out = []
        for name in PARAM_ORDER:
            owner, part = name.split(".")
            obj = getattr(self, owner)
            if owner in CELLS:
                out.append(getattr(obj, part))
            else:
                out.append(obj.weights if part == "W" else obj.bias)
        return out

    @classmethod
    def from_arrays(cls, dims, arrays):
        shapes = dims.shapes()
        if len(arrays) != len(PARAM_ORDER):
            raise InvalidArgumentError("wrong number of parameter arrays")
        named = {}
        for name, arr in zip(PARAM_ORDER, arrays):
            arr = np.asarray(arr, dtype=np.float64)
            if arr.shape != shapes[name]:
                raise InvalidArgumentError(f"{name}: shape {arr.shape}, expected {shapes[name]}")
            named[name] = arr
        kw = {}
        for layer in LAYERS:
            kw[layer] = DenseLayer(named[f"{layer}.W"], named[f"{layer}.b"], _ACT[layer])
        for cell in CELLS:
            kw[cell] = LstmParams(named[f"{cell}.W"], named[f"{cell}.U"], named[f"{cell}.b"])
        return cls(dims=dims, **kw)

    def flat(self):
        return np.concatenate([a.ravel() for a in self.arrays()])

    @classmethod
    def from_flat(cls, dims, vec):
        arrays, pos = [], 0
        for name in PARAM_ORDER:
            shape = dims.shapes()[name]
            size = int(np.prod(shape))
            arrays.append(np.asarray(vec[pos : pos + size]).reshape(shape))
            pos += size
        if pos != len(vec):
            raise InvalidArgumentError("flat parameter vector has the wrong length")
        return cls.from_arrays(dims, arrays)

    def zeros_like(self):
        return RaeParams.from_arrays(self.dims, [np.zeros_like(a) for a in self.arrays()])


class RaeState(NamedTuple):
    enc: LstmState
    dec: LstmState

    @classmethod
    def zeros(cls, d_m):
        return cls(LstmState.zeros(d_m), LstmState.zeros(d_m))


def init_params(dims, seed=0):
    """Glorot-uniform weights, zero biases, forget-gate biases at +1."""
    if not isinstance(dims, RaeDims):
        raise InvalidArgumentError("dims must be a RaeDims")
    rng = np.random.default_rng(seed)
    arrays = []
    for name, shape in dims.shapes().items():
        owner, part = name.split(".")
        if part == "b":
            b = np.zeros(shape)
            if owner in CELLS:
                b[2 * dims.d_m : 3 * dims.d_m] = 1.0
            arrays.append(b)
        elif owner in CELLS:
            # each gate block gets its own fan-in/fan-out
            arrays.append(np.concatenate([glorot_uniform(rng, dims.d_m, shape[1]) for _ in range(4)]))
        else:
            arrays.append(glorot_uniform(rng, *shape))
    return RaeParams.from_arrays(dims, arrays)


class _EncCache(NamedTuple):
    x: np.ndarray
    z: np.ndarray
    a: np.ndarray
    u: np.ndarray
    h: np.ndarray
    lstm: object


class _DecCache(NamedTuple):
    h: np.ndarray
    u: np.ndarray
    z_hat: np.ndarray
    p: np.ndarray
    a: np.ndarray
    q: np.ndarray
    x_hat: np.ndarray
    lstm: object


def _dense(layer, x):
    pre = layer.weights @ x + layer.bias
    return np.tanh(pre) if layer.activation == "tanh" else pre


def _encode(params, s, x):
    dims = params.dims
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (dims.d_in,):
        raise InvalidArgumentError(f"window shape {x.shape}, expected ({dims.d_in},)")
    z = _dense(params.phi_x, x)
    a = np.concatenate([z, s.enc.m])
    u = _dense(params.g_enc1, a)
    h = _dense(params.g_enc2, u)
    enc, lc = lstm_step(params.f_enc, z, s.enc)
    return h, RaeState(enc, s.dec), _EncCache(x, z, a, u, h, lc)


def _decode(params, s, h):
    dims = params.dims
    h = np.asarray(h, dtype=np.float64)
    if h.shape != (dims.d_h,):
        raise InvalidArgumentError(f"code shape {h.shape}, expected ({dims.d_h},)")
    u = _dense(params.g_dec1, h)
    z_hat = _dense(params.g_dec2, u)
    p = _dense(params.phi_z, z_hat)
    a = np.concatenate([p, s.dec.c, s.dec.m])
    q = _dense(params.o1, a)
    x_hat = _dense(params.o2, q)
    dec, lc = lstm_step(params.f_dec, z_hat, s.dec)
    return x_hat, RaeState(s.enc, dec), _DecCache(h, u, z_hat, p, a, q, x_hat, lc)


def encode_step(params, s, x):
    """Encode one window; returns ``(code, new_state)``. Decoder state is untouched."""
    h, s2, _ = _encode(params, s, x)
    return h, s2


def decode_step(params, s, h):
    """Decode one code; returns ``(window, new_state)``. Encoder state is untouched."""
    x_hat, s2, _ = _decode(params, s, h)
    return x_hat, s2


def forward_sequence(params, xs):
    """Unroll encoder+decoder over ``xs`` from a zero state.

    Returns ``(x_hats, codes, caches)``.
    """
    if len(xs) == 0:
        raise InvalidArgumentError("empty sequence")
    s = RaeState.zeros(params.dims.d_m)
    x_hats, hs, caches = [], [], []
    for x in xs:
        h, s, ec = _encode(params, s, x)
        x_hat, s, dc = _decode(params, s, h)
        x_hats.append(x_hat)
        hs.append(h)
        caches.append((ec, dc))
    return x_hats, hs, caches


def sequence_loss(params, xs):
    x_hats, _, _ = forward_sequence(params, xs)
    return sum(mse_loss(xh, x)[0] for xh, x in zip(x_hats, xs))


def backward_sequence(params, caches, xs, x_hats):
    """Gradients of ``sum_t mse(x_hat_t, x_t)`` w.r.t. every parameter (BPTT).

    Returns a ``RaeParams`` holding the gradients.
    """
    if not (len(caches) == len(xs) == len(x_hats)):
        raise InvalidArgumentError("caches, inputs and outputs differ in length")
    P = params
    d_m, d_z = P.dims.d_m, P.dims.d_z
    g = {name: np.zeros(shape) for name, shape in P.dims.shapes().items()}

    def acc(prefix, dW, db):
        g[prefix + ".W"] += dW
        g[prefix + ".b"] += db

    def acc_cell(prefix, grads):
        g[prefix + ".W"] += grads.W
        g[prefix + ".U"] += grads.U
        g[prefix + ".b"] += grads.b

    dc_enc = np.zeros(d_m)
    dm_enc = np.zeros(d_m)
    dc_dec = np.zeros(d_m)
    dm_dec = np.zeros(d_m)
    for t in range(len(xs) - 1, -1, -1):
        ec, dc = caches[t]
        if ec.x.shape != (P.dims.d_in,):
            raise InvalidArgumentError(f"cache at step {t} does not match params")
        _, dx_hat = mse_loss(x_hats[t], xs[t])

        # decoder output map o
        dW, db, dq = affine_backward(P.o2, dc.q, dc.x_hat, dx_hat)
        acc("o2", dW, db)
        dW, db, da = affine_backward(P.o1, dc.a, dc.q, dq)
        acc("o1", dW, db)
        dp = da[: P.dims.d_in]
        dc_dec_prev = da[P.dims.d_in : P.dims.d_in + d_m]
        dm_dec_prev = da[P.dims.d_in + d_m :]

        # decoder LSTM
        grads, dz_hat, dprev = lstm_step_backward(P.f_dec, dc.lstm, dc_dec, dm_dec)
        acc_cell("f_dec", grads)
        dc_dec = dc_dec_prev + dprev.c
        dm_dec = dm_dec_prev + dprev.m

        dW, db, dz = affine_backward(P.phi_z, dc.z_hat, dc.p, dp)
        acc("phi_z", dW, db)
        dz_hat = dz_hat + dz
        dW, db, du = affine_backward(P.g_dec2, dc.u, dc.z_hat, dz_hat)
        acc("g_dec2", dW, db)
        dW, db, dh = affine_backward(P.g_dec1, dc.h, dc.u, du)
        acc("g_dec1", dW, db)

        # encoder output map g_enc
        dW, db, du = affine_backward(P.g_enc2, ec.u, ec.h, dh)
        acc("g_enc2", dW, db)
        dW, db, da = affine_backward(P.g_enc1, ec.a, ec.u, du)
        acc("g_enc1", dW, db)
        dz = da[:d_z]
        dm_enc_from_code = da[d_z:]

        grads, dz_lstm, dprev = lstm_step_backward(P.f_enc, ec.lstm, dc_enc, dm_enc)
        acc_cell("f_enc", grads)
        dc_enc = dprev.c
        dm_enc = dprev.m + dm_enc_from_code

        dW, db, _ = affine_backward(P.phi_x, ec.x, ec.z, dz + dz_lstm)
        acc("phi_x", dW, db)

    return RaeParams.from_arrays(P.dims, [g[name] for name in PARAM_ORDER])


def save_model(params):
    d = params.dims
    buf = bytearray(_HEADER.pack(MODEL_MAGIC, MODEL_VERSION, d.d_in, d.d_z, d.d_h, d.d_m, d.n_channels))
    for arr in params.arrays():
        buf += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    buf += struct.pack("<I", zlib.crc32(buf))
    return bytes(buf)


def model_fingerprint(blob):
    """The crc32 stored at the end of a serialized model."""
    if len(blob) < 4:
        raise FormatError("model too short", "byte 0")
    return struct.unpack_from("<I", blob, len(blob) - 4)[0]


def load_model(blob):
    blob = bytes(blob)
    if len(blob) < _HEADER.size + 4:
        raise FormatError(f"model truncated: {len(blob)} bytes", "byte 0")
    magic, version, *dims = _HEADER.unpack_from(blob, 0)
    if magic != MODEL_MAGIC:
        raise FormatError(f"bad magic {magic!r}", "byte 0")
    if version != MODEL_VERSION:
        raise FormatError(f"unsupported model version {version}", "byte 4")
    try:
        dims = RaeDims(*dims)
    except InvalidArgumentError as exc:
        raise FormatError(f"invalid dims: {exc}", "byte 6") from exc
    shapes = dims.shapes()
    expected = _HEADER.size + 8 * sum(int(np.prod(shapes[n])) for n in PARAM_ORDER) + 4
    if len(blob) != expected:
        raise FormatError(f"model has {len(blob)} bytes, dims imply {expected}", f"byte {len(blob)}")
    stored = model_fingerprint(blob)
    if zlib.crc32(blob[:-4]) != stored:
        raise ChecksumError("model checksum mismatch", f"byte {len(blob) - 4}")
    arrays, pos = [], _HEADER.size
    for name in PARAM_ORDER:
        shape = shapes[name]
        count = int(np.prod(shape))
        arrays.append(np.frombuffer(blob, dtype="<f8", count=count, offset=pos).astype(np.float64).reshape(shape))
        pos += 8 * count
    return RaeParams.from_arrays(dims, arrays)
