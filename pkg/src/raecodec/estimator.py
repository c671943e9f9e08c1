"""scikit-learn style front end for training and using the codec."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .codec import CodecConfig, compress, decompress, prepare_series, summarize
from .errors import InvalidArgumentError
from .model import RaeDims, load_model, model_fingerprint, save_model
from .preprocess import TimeSeries, normalize
from .stream import encode_stream
from .trainer import TrainConfig, build_dataset, evict_outliers, train


def _is_many(X):
    """A list/tuple of arrays (or TimeSeries) is many traces; anything else is one."""
    return isinstance(X, (list, tuple)) and bool(X) and all(
        isinstance(x, (np.ndarray, TimeSeries)) for x in X
    )


def _as_traces(X):
    return [_check_trace(x) for x in X] if _is_many(X) else [_check_trace(X)]


def _check_trace(x):
    if isinstance(x, TimeSeries):
        return x.samples * x.scale + x.offset
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    return check_array(x, ensure_min_samples=2)


class RaeCompressor(TransformerMixin, BaseEstimator):
    """Recurrent-autoencoder compressor with a maximum-deviation guarantee.

    ``fit`` trains on one or more traces; ``compress``/``decompress`` produce
    and consume the binary stream; ``transform`` returns the lossy
    reconstruction (raw units) of a trace.  ``epsilon`` is measured in
    per-trace normalized units ([-1, 1]).
    """

    def __init__(
        self,
        rae_len=32,
        d_z=16,
        d_h=4,
        d_m=16,
        tau=0.4,
        epochs=30,
        sequence_len=8,
        learning_rate=1e-3,
        validation_fraction=0.1,
        evict=True,
        epsilon=0.1,
        min_window=None,
        max_window=None,
        random_state=0,
    ):
        self.rae_len = rae_len
        self.d_z = d_z
        self.d_h = d_h
        self.d_m = d_m
        self.tau = tau
        self.epochs = epochs
        self.sequence_len = sequence_len
        self.learning_rate = learning_rate
        self.validation_fraction = validation_fraction
        self.evict = evict
        self.epsilon = epsilon
        self.min_window = min_window
        self.max_window = max_window
        self.random_state = random_state

    def _train_config(self, n_channels):
        dims = RaeDims.for_windows(self.rae_len, n_channels, self.d_z, self.d_h, self.d_m)
        return TrainConfig(
            dims=dims,
            tau=self.tau,
            epochs=self.epochs,
            sequence_len=self.sequence_len,
            learning_rate=self.learning_rate,
            seed=self.random_state,
            validation_fraction=self.validation_fraction,
        )

    def _codec_config(self):
        return CodecConfig(self.epsilon, self.rae_len, self.min_window, self.max_window)

    def fit(self, X, y=None):
        traces = _as_traces(X)
        channels = {t.shape[1] for t in traces}
        if len(channels) != 1:
            raise InvalidArgumentError(f"traces disagree on channel count: {sorted(channels)}")
        normed = [normalize(TimeSeries(t)) for t in traces]
        if self.evict:
            normed = evict_outliers(normed)
        cfg = self._train_config(channels.pop())
        self.params_, self.training_log_ = train(cfg, build_dataset(normed, cfg))
        self._set_fitted()
        return self

    def _set_fitted(self):
        self.n_channels_ = self.params_.dims.n_channels
        self.model_bytes_ = save_model(self.params_)
        self.fingerprint_ = model_fingerprint(self.model_bytes_)

    @classmethod
    def from_model(cls, blob, **kwargs):
        params = load_model(blob)
        est = cls(rae_len=params.dims.rae_len, d_z=params.dims.d_z, d_h=params.dims.d_h,
                  d_m=params.dims.d_m, **kwargs)
        est.params_ = params
        est._set_fitted()
        return est

    def compress_result(self, X):
        check_is_fitted(self, "params_")
        series = prepare_series(_check_trace(X))
        return compress(self.params_, series, self._codec_config(), self.fingerprint_)

    def compress(self, X):
        """Serialized stream for a single trace."""
        return encode_stream(self.compress_result(X).stream)

    def decompress(self, blob):
        check_is_fitted(self, "params_")
        _, raw = decompress(self.params_, blob, self.fingerprint_)
        return raw

    def transform(self, X):
        traces = _as_traces(X)
        out = [self.decompress(self.compress(t)) for t in traces]
        return out if _is_many(X) else out[0]

    def score(self, X, y=None):
        """Negative normalized RMSE of the round trip, averaged over traces."""
        return -float(np.mean([summarize(self.compress_result(t))["rmse"] for t in _as_traces(X)]))
