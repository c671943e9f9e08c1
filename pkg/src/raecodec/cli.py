"""Command-line entry point: ``raecodec {train,compress,decompress,eval,inspect,synth}``.

Exit codes: 0 success, 2 usage or input error, 3 numeric failure.
"""

import argparse
import glob
import json
import logging
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor

from .codec import CodecConfig, compress, decompress, prepare_series, summarize
from .errors import ConfigError, FormatError, InvalidArgumentError, NumericError
from .model import MODEL_MAGIC, RaeDims, load_model, model_fingerprint, save_model
from .preprocess import load_csv, normalize, write_csv
from .stream import STREAM_MAGIC, decode_stream, encode_stream
from .synthetic import sinusoid_corpus
from .trainer import TrainConfig, build_dataset, evict_outliers, train, write_log_csv

log = logging.getLogger("raecodec")

EXIT_USAGE = 2
EXIT_NUMERIC = 3

# config-file keys (same as the flag names with underscores) and their types
CONFIG_KEYS = {
    "tau": float,
    "rae_len": int,
    "d_h": int,
    "d_z": int,
    "d_m": int,
    "epochs": int,
    "sequence_len": int,
    "learning_rate": float,
    "validation_fraction": float,
    "seed": int,
    "epsilon": float,
    "min_window": int,
    "max_window": int,
}

DEFAULTS = {
    "tau": 0.4,
    "rae_len": 32,
    "d_h": 4,
    "d_z": 16,
    "d_m": 16,
    "epochs": 30,
    "sequence_len": 8,
    "learning_rate": 1e-3,
    "validation_fraction": 0.1,
    "seed": 0,
}


class UsageError(Exception):
    pass


def read_config(path):
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in CONFIG_KEYS:
                raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                out[key] = CONFIG_KEYS[key](value)
            except ValueError:
                raise UsageError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return out


def resolve(args):
    """Merge defaults < config file < explicit flags."""
    merged = dict(DEFAULTS)
    if getattr(args, "config", None):
        merged.update(read_config(args.config))
    for key in CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def atomic_write(path, data, mode="wb"):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, mode) as fh:
            if callable(data):
                data(fh)
            else:
                fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _read_bytes(path):
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _load_series(path):
    if not os.path.isfile(path):
        raise UsageError(f"no such file: {path}")
    try:
        return load_csv(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _csv_paths(items):
    paths = []
    for item in items:
        if os.path.isdir(item):
            paths.extend(sorted(glob.glob(os.path.join(item, "*.csv"))))
        elif os.path.exists(item):
            paths.append(item)
        else:
            raise UsageError(f"no such file or directory: {item}")
    if not paths:
        raise UsageError("no CSV files found in --data")
    return paths


def _codec_config(opts, rae_len):
    eps = opts.get("epsilon")
    if eps is None:
        raise UsageError("--epsilon is required")
    if not eps > 0:
        raise UsageError(f"--epsilon must be > 0, got {eps}")
    return CodecConfig(eps, rae_len, opts.get("min_window"), opts.get("max_window"))


def _load_params(path):
    blob = _read_bytes(path)
    return load_model(blob), model_fingerprint(blob)


def _write_reconstruction(path, values):
    atomic_write(path, lambda fh: write_csv(fh, values), mode="w")


def cmd_train(args):
    opts = resolve(args)
    traces = [normalize(_load_series(p)) for p in _csv_paths(args.data)]
    channels = {t.n_channels for t in traces}
    if len(channels) != 1:
        raise UsageError(f"training files disagree on channel count: {sorted(channels)}")
    dims = RaeDims.for_windows(opts["rae_len"], channels.pop(), opts["d_z"], opts["d_h"], opts["d_m"])
    cfg = TrainConfig(
        dims=dims,
        tau=opts["tau"],
        epochs=opts["epochs"],
        sequence_len=opts["sequence_len"],
        learning_rate=opts["learning_rate"],
        seed=opts["seed"],
        validation_fraction=opts["validation_fraction"],
    )
    dataset = build_dataset(evict_outliers(traces), cfg)
    params, history = train(cfg, dataset)
    atomic_write(args.out, save_model(params))
    log_path = args.out + ".log.csv"
    atomic_write(log_path, lambda fh: write_log_csv(fh, history), mode="w")
    print(json.dumps({
        "model": args.out,
        "log": log_path,
        "windows": sum(len(s) for s in dataset),
        "best_epoch": history.best_epoch,
        "val_loss": history.val_loss[history.best_epoch - 1],
    }))
    return 0


def cmd_compress(args):
    opts = resolve(args)
    params, fingerprint = _load_params(args.model)
    cfg = _codec_config(opts, params.dims.rae_len)
    series = _load_series(args.data)
    if series.n_channels != params.dims.n_channels:
        raise UsageError(
            f"model expects {params.dims.n_channels} channels, {args.data} has {series.n_channels}"
        )
    result = compress(params, prepare_series(series), cfg, fingerprint)
    atomic_write(args.out, encode_stream(result.stream))
    if args.emit_reconstruction:
        rec = result.reconstruction
        _write_reconstruction(args.emit_reconstruction, rec.samples * rec.scale + rec.offset)
    print(json.dumps(summarize(result)))
    return 0


def cmd_decompress(args):
    params, fingerprint = _load_params(args.model)
    blob = _read_bytes(args.data)
    stream = decode_stream(blob)
    if stream.fingerprint != fingerprint:
        raise UsageError(
            f"model fingerprint mismatch: stream {stream.fingerprint:08x}, model {fingerprint:08x}"
        )
    _, raw = decompress(params, stream, fingerprint)
    _write_reconstruction(args.out, raw)
    return 0


def _parse_eps_list(text):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad --epsilon-list {text!r}") from None
    if not values or any(not v > 0 for v in values):
        raise UsageError("--epsilon-list needs positive values")
    return values


def cmd_eval(args):
    opts = resolve(args)
    params, fingerprint = _load_params(args.model)
    series = _load_series(args.data)
    if series.n_channels != params.dims.n_channels:
        raise UsageError(
            f"model expects {params.dims.n_channels} channels, {args.data} has {series.n_channels}"
        )
    prepared = prepare_series(series)
    eps_list = _parse_eps_list(args.epsilon_list)

    def run(eps):
        cfg = _codec_config({**opts, "epsilon": eps}, params.dims.rae_len)
        t0 = time.perf_counter()
        result = compress(params, prepared, cfg, fingerprint)
        elapsed = (time.perf_counter() - t0) * 1e3
        return eps, summarize(result), elapsed

    workers = max(1, int(os.environ.get("RAE_THREADS", "1") or 1))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(run, eps_list))

    def emit(fh):
        fh.write("epsilon,ratio,rmse,linf,runtime_ms\n")
        for eps, m, ms in rows:
            fh.write(f"{eps:.9g},{m['ratio']:.9g},{m['rmse']:.9g},{m['linf']:.9g},{ms:.3f}\n")

    if args.out:
        atomic_write(args.out, emit, mode="w")
    else:
        emit(sys.stdout)
    return 0


def cmd_inspect(args):
    blob = _read_bytes(args.data)
    if blob[:4] == MODEL_MAGIC:
        params = load_model(blob)
        d = params.dims
        info = {
            "type": "model",
            "d_in": d.d_in, "d_z": d.d_z, "d_h": d.d_h, "d_m": d.d_m,
            "n_channels": d.n_channels, "rae_len": d.rae_len,
            "fingerprint": f"{model_fingerprint(blob):08x}",
            "n_params": int(params.flat().size),
        }  # fmt: skip
    elif blob[:4] == STREAM_MAGIC:
        s = decode_stream(blob)
        info = {
            "type": "stream",
            "n_samples": s.n_samples, "n_channels": s.n_channels, "rae_len": s.rae_len,
            "d_h": s.d_h, "epsilon": s.epsilon,
            "scale": s.scale.tolist(), "offset": s.offset.tolist(),
            "fingerprint": f"{s.fingerprint:08x}",
            "n_blocks": len(s.blocks),
            "n_raw_blocks": sum(b.kind == 1 for b in s.blocks),
            "window_lengths": [b.window_len for b in s.blocks],
            "bytes": len(blob),
        }  # fmt: skip
    else:
        raise UsageError(f"{args.data}: not a model or stream file")
    print(json.dumps(info))
    return 0


def cmd_synth(args):
    os.makedirs(args.out, exist_ok=True)
    corpus = sinusoid_corpus(args.n_traces, args.length, args.channels, args.seed)
    for k, trace in enumerate(corpus):
        atomic_write(os.path.join(args.out, f"trace_{k:04d}.csv"), lambda fh, t=trace: write_csv(fh, t), "w")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="raecodec", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, model=True):
        p.add_argument("--config", help="key=value file with defaults")
        if model:
            p.add_argument("--model", required=True)

    p = sub.add_parser("train", help="train a model on CSV traces")
    common(p, model=False)
    p.add_argument("--data", nargs="+", required=True, help="CSV files or directories")
    p.add_argument("--out", required=True, help="model path")
    p.add_argument("--tau", type=float)
    p.add_argument("--rae-len", dest="rae_len", type=int)
    p.add_argument("--d-h", dest="d_h", type=int)
    p.add_argument("--d-z", dest="d_z", type=int)
    p.add_argument("--d-m", dest="d_m", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--sequence-len", dest="sequence_len", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--validation-fraction", dest="validation_fraction", type=float)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compress", help="compress one CSV trace")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--min-window", dest="min_window", type=int)
    p.add_argument("--max-window", dest="max_window", type=int)
    p.add_argument("--emit-reconstruction", metavar="CSV")
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("decompress", help="decompress a stream to CSV")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decompress)

    p = sub.add_parser("eval", help="rate/distortion sweep over epsilons")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--epsilon-list", dest="epsilon_list", required=True)
    p.add_argument("--min-window", dest="min_window", type=int)
    p.add_argument("--max-window", dest="max_window", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("inspect", help="print header information as JSON")
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("synth", help="write a synthetic sinusoid corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n-traces", dest="n_traces", type=int, default=50)
    p.add_argument("--length", type=int, default=1024)
    p.add_argument("--channels", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"raecodec: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, FormatError, InvalidArgumentError, ConfigError) as exc:
        print(f"raecodec: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
