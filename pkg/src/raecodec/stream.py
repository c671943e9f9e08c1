"""Compressed bitstream container.

All fields little-endian::

    b"RAEC" | version u16 | flags u16 | n_samples u64 | n_channels u16
    | rae_len u16 | d_h u16 | epsilon f32
    | n_channels x (scale f32, offset f32)
    | model fingerprint u32 | block count u32
    | blocks: kind u8 (0 coded, 1 raw) | window_len u16
    |         | coded: d_h x f32 code  /  raw: window_len x n_channels x f32 (row-major)
    | crc32 u32 over all preceding bytes
"""

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ChecksumError, FormatError, InvalidArgumentError

STREAM_MAGIC = b"RAEC"
STREAM_VERSION = 1
CODED = 0
RAW = 1
MAX_WINDOW = 0xFFFF

_HEAD = struct.Struct("<4sHHQHHHf")
_TAIL = struct.Struct("<II")
_BLOCK = struct.Struct("<BH")


@dataclass(frozen=True)
class Block:
    kind: int
    window_len: int
    payload: np.ndarray

    def __post_init__(self):
        if self.kind not in (CODED, RAW):
            raise InvalidArgumentError(f"unknown block kind {self.kind}")
        if not 1 <= self.window_len <= MAX_WINDOW:
            raise InvalidArgumentError(f"window_len {self.window_len} outside [1, {MAX_WINDOW}]")
        object.__setattr__(self, "payload", np.asarray(self.payload, dtype=np.float32))

    @property
    def nbytes(self):
        return _BLOCK.size + 4 * self.payload.size


@dataclass(frozen=True)
class CompressedStream:
    n_samples: int
    n_channels: int
    rae_len: int
    d_h: int
    epsilon: float
    scale: np.ndarray
    offset: np.ndarray
    fingerprint: int
    blocks: list = field(default_factory=list)
    flags: int = 0

    def __post_init__(self):
        object.__setattr__(self, "scale", np.asarray(self.scale, dtype=np.float32))
        object.__setattr__(self, "offset", np.asarray(self.offset, dtype=np.float32))
        object.__setattr__(self, "blocks", list(self.blocks))

    @property
    def header_nbytes(self):
        return _HEAD.size + 8 * self.n_channels + _TAIL.size

    @property
    def nbytes(self):
        return self.header_nbytes + sum(b.nbytes for b in self.blocks) + 4

    def check(self):
        if len(self.scale) != self.n_channels or len(self.offset) != self.n_channels:
            raise InvalidArgumentError("scale/offset length differs from n_channels")
        total = 0
        for k, b in enumerate(self.blocks):
            want = self.d_h if b.kind == CODED else b.window_len * self.n_channels
            if b.payload.size != want:
                raise InvalidArgumentError(f"block {k}: payload has {b.payload.size} values, expected {want}")
            total += b.window_len
        if total != self.n_samples:
            raise InvalidArgumentError(f"blocks cover {total} samples, header says {self.n_samples}")


def encode_stream(stream):
    stream.check()
    buf = bytearray(
        _HEAD.pack(
            STREAM_MAGIC, STREAM_VERSION, stream.flags, stream.n_samples, stream.n_channels,
            stream.rae_len, stream.d_h, stream.epsilon,
        )
    )
    buf += np.column_stack([stream.scale, stream.offset]).astype("<f4").tobytes()
    buf += _TAIL.pack(stream.fingerprint, len(stream.blocks))
    for b in stream.blocks:
        buf += _BLOCK.pack(b.kind, b.window_len)
        buf += b.payload.astype("<f4").tobytes()
    buf += struct.pack("<I", zlib.crc32(buf))
    return bytes(buf)


def decode_stream(blob):
    blob = bytes(blob)
    if len(blob) < _HEAD.size + _TAIL.size + 4:
        raise FormatError(f"stream truncated: {len(blob)} bytes", "byte 0")
    magic, version, flags, n, c, rae_len, d_h, eps = _HEAD.unpack_from(blob, 0)
    if magic != STREAM_MAGIC:
        raise FormatError(f"bad magic {magic!r}", "byte 0")
    if version != STREAM_VERSION:
        raise FormatError(f"unsupported stream version {version}", "byte 4")
    stored = struct.unpack_from("<I", blob, len(blob) - 4)[0]
    if zlib.crc32(blob[:-4]) != stored:
        raise ChecksumError("stream checksum mismatch", f"byte {len(blob) - 4}")
    if c < 1:
        raise FormatError("stream declares zero channels", "byte 16")
    pos = _HEAD.size
    end = len(blob) - 4

    def need(k, what):
        if pos + k > end:
            raise FormatError(f"{what} overruns the stream", f"byte {pos}")

    need(8 * c + _TAIL.size, "channel table")
    table = np.frombuffer(blob, dtype="<f4", count=2 * c, offset=pos).reshape(c, 2)
    pos += 8 * c
    fingerprint, count = _TAIL.unpack_from(blob, pos)
    pos += _TAIL.size
    blocks = []
    covered = 0
    for k in range(count):
        need(_BLOCK.size, f"block {k} header")
        kind, wlen = _BLOCK.unpack_from(blob, pos)
        if kind not in (CODED, RAW):
            raise FormatError(f"block {k} has unknown kind {kind}", f"byte {pos}")
        if wlen < 1:
            raise FormatError(f"block {k} has zero length", f"byte {pos + 1}")
        covered += wlen
        if covered > n:
            raise FormatError(f"block {k} runs past n_samples={n}", f"byte {pos + 1}")
        pos += _BLOCK.size
        size = d_h if kind == CODED else wlen * c
        need(4 * size, f"block {k} payload")
        payload = np.frombuffer(blob, dtype="<f4", count=size, offset=pos).astype(np.float32)
        pos += 4 * size
        blocks.append(Block(kind, wlen, payload))
    if pos != end:
        raise FormatError(f"{end - pos} trailing bytes after last block", f"byte {pos}")
    if covered != n:
        raise FormatError(f"blocks cover {covered} of {n} samples", f"byte {pos}")
    return CompressedStream(
        n, c, rae_len, d_h, float(eps), table[:, 0].copy(), table[:, 1].copy(),
        fingerprint, blocks, flags,
    )
