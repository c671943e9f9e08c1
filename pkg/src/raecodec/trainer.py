"""Training-set construction and BPTT training of the recurrent autoencoder."""

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InvalidArgumentError, NumericError
from .model import (
    RaeDims,
    RaeParams,
    backward_sequence,
    forward_sequence,
    init_params,
)
from .nn import AdamState, mse_loss, optimizer_step
from .preprocess import SegmenterConfig, TimeSeries, resample, segment_by_tv, step_variation

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    dims: RaeDims = field(default_factory=lambda: RaeDims.for_windows(32))
    tau: float = 0.4
    epochs: int = 30
    sequence_len: int = 8
    learning_rate: float = 1e-3
    seed: int = 0
    validation_fraction: float = 0.1
    max_segment_len: int = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.sequence_len < 1:
            raise ConfigError(f"sequence_len must be >= 1, got {self.sequence_len}")
        if not 0 <= self.validation_fraction < 1:
            raise ConfigError("validation_fraction must be in [0, 1)")
        if not self.tau > 0:
            raise ConfigError("tau must be > 0")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")

    @property
    def segmenter(self):
        cap = self.max_segment_len or 8 * self.dims.rae_len
        return SegmenterConfig(self.tau, cap)


@dataclass
class TrainingLog:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    wall_time: list = field(default_factory=list)
    best_epoch: int = -1

    def rows(self):
        for k, (tr, va, wt) in enumerate(zip(self.train_loss, self.val_loss, self.wall_time)):
            yield k + 1, tr, va, wt


def window_vector(window, rae_len):
    """Resample an ``L x C`` window to ``rae_len`` and concatenate channels."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim == 1:
        window = window[:, None]
    if window.shape[0] == 1:
        window = np.repeat(window, 2, axis=0)
    return resample(window, rae_len).T.ravel()


def evict_outliers(traces, percentile=99.0):
    """Drop traces whose mean per-step variation exceeds the corpus percentile."""
    if len(traces) < 2:
        return list(traces)
    activity = np.array([step_variation(t).mean() for t in traces])
    cut = np.percentile(activity, percentile)
    kept = [t for t, a in zip(traces, activity) if a <= cut]
    if len(kept) < len(traces):
        log.info("evicted %d high-variation traces", len(traces) - len(kept))
    return kept


def build_dataset(traces, cfg):
    """Segment each trace by total variation and group windows into sequences."""
    rae_len = cfg.dims.rae_len
    sequences = []
    for trace in traces:
        if not isinstance(trace, TimeSeries):
            try:
                trace = TimeSeries(trace)
            except InvalidArgumentError:
                log.warning("skipping trace shorter than 2 samples")
                continue
        if trace.n_channels != cfg.dims.n_channels:
            raise InvalidArgumentError(
                f"trace has {trace.n_channels} channels, model expects {cfg.dims.n_channels}"
            )
        vectors = [
            window_vector(trace.samples[seg.start : seg.end], rae_len)
            for seg in segment_by_tv(trace, cfg.segmenter)
        ]
        for k in range(0, len(vectors), cfg.sequence_len):
            sequences.append(vectors[k : k + cfg.sequence_len])
    return sequences


def _sequence_loss(params, seq):
    x_hats, _, _ = forward_sequence(params, seq)
    return float(np.mean([mse_loss(xh, x)[0] for xh, x in zip(x_hats, seq)]))


def evaluate(params, dataset):
    """Forward-only reconstruction metrics; state resets for every sequence."""
    if len(dataset) == 0:
        raise InvalidArgumentError("empty dataset")
    losses, linf = [], []
    for seq in dataset:
        for x in seq:
            if np.shape(x) != (params.dims.d_in,):
                raise InvalidArgumentError(
                    f"window of shape {np.shape(x)} does not match d_in={params.dims.d_in}"
                )
        x_hats, _, _ = forward_sequence(params, seq)
        for xh, x in zip(x_hats, seq):
            losses.append(mse_loss(xh, x)[0])
            linf.append(float(np.max(np.abs(xh - x))))
    return {"mse": float(np.mean(losses)), "linf": linf, "max_linf": float(max(linf))}


def train(cfg, dataset, initial=None):
    """Adam + BPTT, one sequence per update; returns the best-validation params."""
    if len(dataset) == 0:
        raise InvalidArgumentError("empty dataset")
    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(len(dataset))
    n_val = int(round(cfg.validation_fraction * len(dataset)))
    if n_val >= len(dataset):
        n_val = len(dataset) - 1
    val = [dataset[k] for k in order[:n_val]]
    fit = [dataset[k] for k in order[n_val:]]

    params = initial if initial is not None else init_params(cfg.dims, cfg.seed)
    if params.dims != cfg.dims:
        raise InvalidArgumentError("initial params do not match cfg.dims")
    arrays = params.arrays()
    opt = AdamState.fresh(arrays, lr=cfg.learning_rate)
    history = TrainingLog()
    best, best_loss = params, np.inf
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        total = 0.0
        for k in rng.permutation(len(fit)):
            seq = fit[k]
            x_hats, _, caches = forward_sequence(params, seq)
            loss = np.mean([mse_loss(xh, x)[0] for xh, x in zip(x_hats, seq)])
            if not np.isfinite(loss):
                raise NumericError(
                    f"non-finite loss at epoch {epoch + 1}; learning rate {cfg.learning_rate} is likely too high"
                )
            total += loss
            grads = backward_sequence(params, caches, seq, x_hats)
            arrays, opt = optimizer_step(arrays, grads.arrays(), opt)
            params = RaeParams.from_arrays(cfg.dims, arrays)
        train_loss = total / len(fit)
        val_loss = float(np.mean([_sequence_loss(params, s) for s in val])) if val else train_loss
        history.train_loss.append(float(train_loss))
        history.val_loss.append(val_loss)
        history.wall_time.append(time.perf_counter() - t0)
        log.info("epoch %d train %.3e val %.3e", epoch + 1, train_loss, val_loss)
        if val_loss < best_loss:
            best, best_loss, history.best_epoch = params, val_loss, epoch + 1
    return best, history


def write_log_csv(fh, history):
    fh.write("epoch,train_loss,val_loss,wall_time_s\n")
    for epoch, tr, va, wt in history.rows():
        fh.write(f"{epoch},{tr:.9g},{va:.9g},{wt:.6f}\n")
