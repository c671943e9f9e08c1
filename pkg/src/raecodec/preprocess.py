"""Loading, normalization, total-variation segmentation and resampling."""

import csv
import io
import os
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvalidArgumentError, ParseError


@dataclass(frozen=True)
class TimeSeries:
    """``n x C`` samples plus the per-channel affine map back to raw units.

    Raw values are ``samples * scale + offset``; a freshly loaded series has
    ``scale = 1`` and ``offset = 0``.
    """

    samples: np.ndarray
    scale: np.ndarray = None
    offset: np.ndarray = None
    name: str = ""
    constant_channels: tuple = ()

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim == 1:
            s = s[:, None]
        if s.ndim != 2 or s.shape[0] < 2 or s.shape[1] < 1:
            raise InvalidArgumentError(f"need at least 2 samples and 1 channel, got shape {s.shape}")
        c = s.shape[1]
        scale = np.ones(c) if self.scale is None else np.asarray(self.scale, dtype=np.float64)
        offset = np.zeros(c) if self.offset is None else np.asarray(self.offset, dtype=np.float64)
        if scale.shape != (c,) or offset.shape != (c,):
            raise InvalidArgumentError("scale/offset must have one entry per channel")
        if np.any(scale <= 0):
            raise InvalidArgumentError("scale must be positive")
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "offset", offset)

    @property
    def n_samples(self):
        return self.samples.shape[0]

    @property
    def n_channels(self):
        return self.samples.shape[1]

    def __len__(self):
        return self.n_samples


@dataclass(frozen=True)
class SegmenterConfig:
    tau: float
    max_segment_len: int = 256

    def __post_init__(self):
        if not self.tau > 0:
            raise InvalidArgumentError(f"tau must be > 0, got {self.tau}")
        if self.max_segment_len < 1:
            raise InvalidArgumentError("max_segment_len must be >= 1")


class Segment(NamedTuple):
    start: int
    end: int

    def __len__(self):
        return self.end - self.start


def _samples(series):
    if isinstance(series, TimeSeries):
        return series.samples
    a = np.asarray(series, dtype=np.float64)
    return a[:, None] if a.ndim == 1 else a


def step_variation(series):
    """l1 norm across channels of each consecutive difference (length n-1)."""
    x = _samples(series)
    return np.abs(np.diff(x, axis=0)).sum(axis=1)


def total_variation(series, start=0, end=None):
    """Sum of ``|x_t - x_{t-1}|`` over the half-open range ``[start, end)``."""
    x = _samples(series)
    n = x.shape[0]
    end = n if end is None else end
    if not (0 <= start < end <= n):
        raise InvalidArgumentError(f"range [{start}, {end}) outside [0, {n})")
    return float(np.abs(np.diff(x[start:end], axis=0)).sum())


def segment_by_tv(series, cfg):
    """Greedy left-to-right cut into segments whose variation first reaches ``tau``.

    A segment also closes when it hits ``cfg.max_segment_len`` samples. The
    last segment may fall short of ``tau``.
    """
    steps = step_variation(series)
    n = steps.size + 1
    segments = []
    start = 0
    while start < n:
        end = start + 1
        acc = 0.0
        limit = min(n, start + cfg.max_segment_len)
        while end < limit and acc < cfg.tau:
            acc += steps[end - 1]
            end += 1
        segments.append(Segment(start, end))
        start = end
    return segments


def resample(v, m):
    """Linearly resample ``v`` (length n, optional channel axis) to length ``m``.

    Sample ``k`` of the output sits at index ``k*(n-1)/(m-1)`` of the input, so
    both endpoints are kept exactly and ``m == n`` is the identity.
    """
    v = np.asarray(v, dtype=np.float64)
    n = v.shape[0]
    if n < 2 or m < 2:
        raise InvalidArgumentError(f"resample needs n >= 2 and m >= 2, got n={n}, m={m}")
    if m == n:
        return v.copy()
    pos = np.arange(m) * (n - 1) / (m - 1)
    left = np.minimum(pos.astype(np.intp), n - 2)
    frac = pos - left
    if v.ndim > 1:
        frac = frac.reshape((-1,) + (1,) * (v.ndim - 1))
    out = v[left] + frac * (v[left + 1] - v[left])
    out[-1] = v[-1]
    return out


def normalize(series):
    """Map each channel affinely onto [-1, 1].

    A constant channel gets ``scale = 1`` and ``offset`` equal to its value,
    and its index is recorded in ``constant_channels``.
    """
    if not isinstance(series, TimeSeries):
        series = TimeSeries(series)
    raw = denormalize(series)
    lo, hi = raw.min(axis=0), raw.max(axis=0)
    flat = hi <= lo
    scale = np.where(flat, 1.0, (hi - lo) / 2.0)
    offset = np.where(flat, lo, (hi + lo) / 2.0)
    return TimeSeries(
        np.clip((raw - offset) / scale, -1.0, 1.0),
        scale,
        offset,
        series.name,
        tuple(int(k) for k in np.flatnonzero(flat)),
    )


def denormalize(series):
    return series.samples * series.scale + series.offset


def load_csv(source, name=None):
    """Parse a numeric CSV (rows = timesteps, columns = channels).

    ``source`` is a path, a file object or the CSV text itself. A first row in
    which no cell parses as a number is taken as a header.
    """
    if hasattr(source, "read"):
        text = source.read()
        name = name or getattr(source, "name", "")
    elif isinstance(source, (str, os.PathLike)) and os.path.exists(source):
        with open(source, newline="") as fh:
            text = fh.read()
        name = name or os.path.basename(os.fspath(source))
    else:
        text = str(source)
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise ParseError("empty CSV", 1)

    def is_number(cell):
        try:
            float(cell)
        except ValueError:
            return False
        return True

    first = 0
    if not any(is_number(c) for c in rows[0]):
        first = 1
    width = len(rows[first]) if first < len(rows) else 0
    values = []
    for r, row in enumerate(rows[first:], start=first + 1):
        if len(row) != width:
            raise ParseError(f"expected {width} columns, found {len(row)}", r)
        parsed = []
        for c, cell in enumerate(row, start=1):
            try:
                parsed.append(float(cell))
            except ValueError:
                raise ParseError(f"non-numeric value {cell!r}", r, c) from None
        values.append(parsed)
    if len(values) < 2:
        raise ParseError(f"need at least 2 data rows, found {len(values)}", len(rows))
    return TimeSeries(np.array(values), name=name or "")


def write_csv(path_or_file, values, fmt="%.9g"):
    values = np.asarray(values)
    if values.ndim == 1:
        values = values[:, None]
    np.savetxt(path_or_file, values, delimiter=",", fmt=fmt)
