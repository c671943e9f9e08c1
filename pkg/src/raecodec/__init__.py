"""Lossy time-series compression with a recurrent autoencoder and a hard L-inf bound."""

from .codec import CodecConfig, compress, decompress, metrics, prepare_series, stream_ratio
from .estimator import RaeCompressor
from .model import RaeDims, RaeParams, RaeState, init_params, load_model, save_model
from .preprocess import SegmenterConfig, TimeSeries, load_csv, normalize, resample, segment_by_tv
from .stream import CompressedStream, decode_stream, encode_stream
from .trainer import TrainConfig, build_dataset, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "CodecConfig", "CompressedStream", "RaeCompressor", "RaeDims", "RaeParams", "RaeState",
    "SegmenterConfig", "TimeSeries", "TrainConfig", "build_dataset", "compress", "decode_stream",
    "decompress", "encode_stream", "evaluate", "init_params", "load_csv", "load_model", "metrics",
    "normalize", "prepare_series", "resample", "save_model", "segment_by_tv", "stream_ratio", "train",
]  # fmt: skip
