"""Adaptive-window compression with a hard maximum-deviation bound.

At each cursor position a stride-halving search picks the longest window
whose reconstruction stays within ``epsilon`` of the original (compared at
the original resolution).  The window is resampled to ``rae_len`` samples per
channel, encoded, and its code rounded to float32 before being decoded, so the
compressor tracks exactly what the decompressor will produce.  When no window
passes, ``min_window`` samples are stored verbatim and the recurrent state is
left untouched.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, FormatError, InvalidArgumentError
from .model import RaeState, decode_step, encode_step, model_fingerprint, save_model
from .preprocess import TimeSeries, normalize, resample
from .stream import CODED, MAX_WINDOW, RAW, Block, CompressedStream, decode_stream, encode_stream
from .trainer import window_vector


@dataclass(frozen=True)
class CodecConfig:
    epsilon: float
    rae_len: int = 32
    min_window: int = None
    max_window: int = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be > 0, got {self.epsilon}")
        if self.rae_len < 2:
            raise ConfigError("rae_len must be >= 2")
        if self.min_window is None:
            object.__setattr__(self, "min_window", max(2, self.rae_len // 4))
        if self.max_window is None:
            object.__setattr__(self, "max_window", 8 * self.rae_len)
        if self.min_window < 2:
            raise ConfigError("min_window must be >= 2")
        if self.min_window > self.max_window:
            raise ConfigError(f"min_window {self.min_window} > max_window {self.max_window}")
        if self.max_window > MAX_WINDOW:
            raise ConfigError(f"max_window {self.max_window} does not fit in u16")


class Probe(NamedTuple):
    code: np.ndarray  # float32
    reconstruction: np.ndarray  # window_len x C
    state: RaeState
    linf: float


class WindowChoice(NamedTuple):
    length: int
    probe: Probe
    probes: int


def stride_search(initial, lo, hi, passes):
    """Stride-halving search for the largest passing window length.

    Starts at ``initial`` with stride ``initial // 2``; a pass records the
    length and grows it by the stride, a failure shrinks it; lengths are
    clamped to ``[lo, hi]`` and the stride halves every iteration until it
    reaches zero.  Repeated lengths are answered from a memo, so ``passes``
    is called at most once per distinct length.

    Returns ``(best_length_or_None, results)`` where ``results`` maps every
    probed length to whatever ``passes`` returned.
    """
    length = initial
    stride = initial // 2
    results = {}
    best = None
    while stride >= 1:
        if length not in results:
            results[length] = passes(length)
        if results[length]:
            best = length if best is None else max(best, length)
            length += stride
        else:
            length -= stride
        length = min(max(length, lo), hi)
        stride //= 2
    return best, results


def _unpack(x_hat, length, n_channels, rae_len):
    return resample(x_hat.reshape(n_channels, rae_len).T, length)


def probe_window(params, state, window, rae_len):
    """Encode/decode one window from ``state`` exactly as the decoder will see it."""
    h, s1 = encode_step(params, state, window_vector(window, rae_len))
    code = h.astype(np.float32)
    x_hat, s2 = decode_step(params, s1, code.astype(np.float64))
    recon = _unpack(x_hat, window.shape[0], window.shape[1], rae_len)
    return Probe(code, recon, s2, float(np.max(np.abs(recon - window))))


def search_window(params, state, series, st, cfg, stats=None, exact=None):
    """Pick the window length starting at ``st``; ``None`` if nothing fits ``epsilon``.

    Every probe starts from ``state`` itself, which is never modified.  If
    ``stats`` is a dict, its ``"probes"`` entry is incremented per model
    evaluation.  When ``exact`` (same shape as ``series``) is given, a window
    must also be within ``epsilon`` of it.
    """
    x = series.samples if isinstance(series, TimeSeries) else np.asarray(series)
    remaining = x.shape[0] - st
    if remaining < 1:
        raise InvalidArgumentError(f"cursor {st} is past the end of the series")
    hi = min(remaining, cfg.max_window)
    lo = min(cfg.min_window, hi)
    if hi < 2:
        return None
    found = {}

    def passes(length):
        p = probe_window(params, state, x[st : st + length], cfg.rae_len)
        found[length] = p
        if exact is not None:
            dev = np.max(np.abs(p.reconstruction - exact[st : st + length]))
            if not dev <= cfg.epsilon:
                return False
        return p.linf <= cfg.epsilon

    best, _ = stride_search(hi, lo, hi, passes)
    if stats is not None:
        stats["probes"] = stats.get("probes", 0) + len(found)
    if best is None:
        return None
    return WindowChoice(best, found[best], len(found))


def prepare_series(values):
    """Normalize raw values with float32-representable scale/offset.

    The samples themselves stay float64; ``compress`` rounds them onto the
    float32 grid the bitstream stores and checks the deviation bound against
    both the rounded and the unrounded values.
    """
    ts = values if isinstance(values, TimeSeries) else TimeSeries(values)
    norm = normalize(ts)
    scale = norm.scale.astype(np.float32).astype(np.float64)
    offset = norm.offset.astype(np.float32).astype(np.float64)
    raw = ts.samples * ts.scale + ts.offset
    return TimeSeries((raw - offset) / scale, scale, offset, ts.name, norm.constant_channels)


def _as_codec_input(series):
    s32 = series.samples.astype(np.float32).astype(np.float64)
    return TimeSeries(
        s32,
        series.scale.astype(np.float32).astype(np.float64),
        series.offset.astype(np.float32).astype(np.float64),
        series.name,
        series.constant_channels,
    )


class CompressResult(NamedTuple):
    stream: CompressedStream
    reconstruction: TimeSeries  # normalized units, what decompress() returns
    reference: TimeSeries  # the float32-rounded input, stored verbatim by raw blocks
    probes: int
    exact: np.ndarray = None  # normalized input before rounding


def params_fingerprint(params):
    return model_fingerprint(save_model(params))


def _check_dims(params, n_channels, rae_len):
    if params.dims.n_channels != n_channels:
        raise InvalidArgumentError(
            f"model expects {params.dims.n_channels} channels, series has {n_channels}"
        )
    if params.dims.rae_len != rae_len:
        raise InvalidArgumentError(f"model rae_len {params.dims.rae_len} != codec rae_len {rae_len}")


def compress(params, series, cfg, fingerprint=None):
    """Compress a normalized series; returns a ``CompressResult``."""
    given = series if isinstance(series, TimeSeries) else TimeSeries(series)
    series = _as_codec_input(given)
    x = series.samples
    exact = given.samples
    n, c = x.shape
    _check_dims(params, c, cfg.rae_len)
    state = RaeState.zeros(params.dims.d_m)
    blocks, pieces = [], []
    stats = {"probes": 0}
    st = 0
    while st < n:
        remaining = n - st
        choice = None
        if remaining >= cfg.min_window:
            choice = search_window(params, state, x, st, cfg, stats, exact)
        if choice is None:
            length = min(cfg.min_window, remaining)
            window = x[st : st + length]
            blocks.append(Block(RAW, length, window.ravel()))
            pieces.append(window.copy())
        else:
            length = choice.length
            blocks.append(Block(CODED, length, choice.probe.code))
            pieces.append(choice.probe.reconstruction)
            state = choice.probe.state
        st += length
    if fingerprint is None:
        fingerprint = params_fingerprint(params)
    stream = CompressedStream(
        n, c, cfg.rae_len, params.dims.d_h, cfg.epsilon, series.scale, series.offset,
        fingerprint, blocks,
    )
    recon = TimeSeries(np.concatenate(pieces), series.scale, series.offset, series.name)
    return CompressResult(stream, recon, series, stats["probes"], exact)


def decompress(params, stream, fingerprint=None):
    """Rebuild a series from a stream (or its bytes).

    Returns ``(normalized TimeSeries, raw-unit array)``.
    """
    if isinstance(stream, (bytes, bytearray, memoryview)):
        stream = decode_stream(stream)
    expected = params_fingerprint(params) if fingerprint is None else fingerprint
    if stream.fingerprint != expected:
        raise FormatError(
            f"model fingerprint mismatch: stream {stream.fingerprint:08x}, model {expected:08x}",
            "header",
        )
    if params.dims.d_h != stream.d_h:
        raise FormatError(f"stream d_h {stream.d_h} != model d_h {params.dims.d_h}", "header")
    try:
        _check_dims(params, stream.n_channels, stream.rae_len)
    except InvalidArgumentError as exc:
        raise FormatError(str(exc), "header") from exc
    c = stream.n_channels
    state = RaeState.zeros(params.dims.d_m)
    pieces = []
    total = 0
    for k, b in enumerate(stream.blocks):
        total += b.window_len
        if total > stream.n_samples:
            raise FormatError(f"block {k} overruns n_samples", f"block {k}")
        if b.kind == RAW:
            pieces.append(b.payload.astype(np.float64).reshape(b.window_len, c))
            continue
        if b.window_len < 2:
            raise FormatError("coded block shorter than 2 samples", f"block {k}")
        x_hat, state = decode_step(params, state, b.payload.astype(np.float64))
        pieces.append(_unpack(x_hat, b.window_len, c, stream.rae_len))
    if total != stream.n_samples:
        raise FormatError(f"blocks cover {total} of {stream.n_samples} samples", "trailer")
    scale = stream.scale.astype(np.float64)
    offset = stream.offset.astype(np.float64)
    norm = TimeSeries(np.concatenate(pieces), scale, offset)
    return norm, norm.samples * scale + offset


def metrics(x, x_hat):
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise InvalidArgumentError(f"shape mismatch {x.shape} vs {x_hat.shape}")
    err = x - x_hat
    return {"linf": float(np.max(np.abs(err))), "rmse": float(np.sqrt(np.mean(err**2)))}


def stream_ratio(stream, n_samples, n_channels):
    """Serialized size over a 4-bytes-per-value original."""
    nbytes = len(stream) if isinstance(stream, (bytes, bytearray)) else stream.nbytes
    return nbytes / (4.0 * n_samples * n_channels)


def summarize(result):
    """Metrics dict for one ``CompressResult`` (normalized units)."""
    stream = result.stream
    m = metrics(result.reference.samples, result.reconstruction.samples)
    return {
        "ratio": stream_ratio(stream, stream.n_samples, stream.n_channels),
        "rmse": m["rmse"],
        "linf": m["linf"],
        "n_blocks": len(stream.blocks),
        "n_raw_blocks": sum(b.kind == RAW for b in stream.blocks),
    }


__all__ = [
    "CodecConfig", "CompressResult", "Probe", "WindowChoice", "compress", "decompress",
    "decode_stream", "encode_stream", "metrics", "prepare_series", "probe_window",
    "search_window", "stream_ratio", "stride_search", "summarize",
]  # fmt: skip
