import numpy as np
import pytest

from raecodec.errors import ConfigError, InvalidArgumentError, NumericError
from raecodec.model import RaeDims, forward_sequence, init_params
from raecodec.nn import mse_loss
from raecodec.trainer import (
    TrainConfig,
    build_dataset,
    evaluate,
    evict_outliers,
    train,
    window_vector,
)

TINY = RaeDims.for_windows(8, d_z=4, d_h=2, d_m=4)


def test_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(epochs=0)
    with pytest.raises(ConfigError):
        TrainConfig(sequence_len=0)
    with pytest.raises(ConfigError):
        TrainConfig(validation_fraction=1.0)
    assert TrainConfig().segmenter.max_segment_len == 256


def test_constant_trace_single_window():
    cfg = TrainConfig()
    ds = build_dataset([np.full(50, 0.3)], cfg)
    assert len(ds) == 1 and len(ds[0]) == 1
    np.testing.assert_array_equal(ds[0][0], np.full(32, 0.3))


def test_sequence_grouping():
    # steps of 1 with tau 0.5 -> every segment has 2 samples
    trace = np.arange(10.0)
    cfg = TrainConfig(dims=TINY, tau=0.5, sequence_len=2)
    ds = build_dataset([trace], cfg)
    assert [len(s) for s in ds] == [2, 2, 1]
    assert all(v.shape == (8,) for s in ds for v in s)


def test_window_vector_concatenates_channels():
    w = np.stack([np.linspace(0, 1, 5), np.linspace(1, 0, 5)], axis=1)
    v = window_vector(w, 3)
    np.testing.assert_allclose(v, [0, 0.5, 1, 1, 0.5, 0])
    np.testing.assert_array_equal(window_vector([[2.0]], 4), np.full(4, 2.0))


def test_channel_mismatch():
    with pytest.raises(InvalidArgumentError):
        build_dataset([np.zeros((20, 2))], TrainConfig(dims=TINY))


def test_evict_outliers():
    rng = np.random.default_rng(0)
    traces = [np.sin(np.arange(100) / 10.0) * rng.uniform(0.5, 1) for _ in range(99)]
    noisy = rng.normal(size=100) * 5
    kept = evict_outliers(traces + [noisy])
    assert len(kept) == 99
    assert all(k is not noisy for k in kept)
    assert evict_outliers(traces[:1]) == traces[:1]


def test_evaluate():
    params = init_params(TINY, 0)
    rng = np.random.default_rng(1)
    ds = [[rng.uniform(-1, 1, 8) for _ in range(3)] for _ in range(4)]
    m = evaluate(params, ds)
    assert len(m["linf"]) == 12
    assert m["max_linf"] == max(m["linf"])
    # state resets per sequence, so reordering sequences leaves metrics alone
    m2 = evaluate(params, ds[::-1])
    assert m2["mse"] == pytest.approx(m["mse"], rel=1e-12)
    assert sorted(m2["linf"]) == pytest.approx(sorted(m["linf"]))
    with pytest.raises(InvalidArgumentError):
        evaluate(params, [])
    with pytest.raises(InvalidArgumentError):
        evaluate(params, [[np.zeros(5)]])


def test_zero_vector_learned():
    cfg = TrainConfig(dims=TINY, epochs=50, learning_rate=1e-2, validation_fraction=0)
    params, _ = train(cfg, [[np.zeros(8)]])
    assert evaluate(params, [[np.zeros(8)]])["mse"] < 1e-4


def test_constant_vector_learned():
    cfg = TrainConfig(dims=TINY, epochs=200, learning_rate=1e-2, validation_fraction=0)
    x = [[np.full(8, 0.5)]]
    params, hist = train(cfg, x)
    assert hist.train_loss[-1] < hist.train_loss[0]
    assert evaluate(params, x)["mse"] < 1e-4


def test_deterministic():
    rng = np.random.default_rng(2)
    ds = [[rng.uniform(-1, 1, 8) for _ in range(2)] for _ in range(5)]
    cfg = TrainConfig(dims=TINY, epochs=3, seed=7)
    a, ha = train(cfg, ds)
    b, hb = train(cfg, ds)
    np.testing.assert_array_equal(a.flat(), b.flat())
    assert ha.train_loss == hb.train_loss


def test_tiny_overfit():
    rng = np.random.default_rng(3)
    ds = [[np.sin(np.linspace(0, 3, 8) * (k + 1)) * 0.5] for k in range(4)]
    dims = RaeDims(d_in=8, d_z=6, d_h=2, d_m=6)
    cfg = TrainConfig(dims=dims, epochs=500, learning_rate=1e-2, validation_fraction=0, seed=int(rng.integers(100)))
    params, hist = train(cfg, ds)
    assert min(hist.train_loss) < 1e-3


def test_loss_decreases():
    rng = np.random.default_rng(4)
    t = np.linspace(0, 2 * np.pi, 8)
    ds = [[np.sin(t * f + p) * 0.8 for f, p in rng.uniform([0.5, 0], [2, 6], (3, 2))] for _ in range(4)]
    # 4 sequences x 50 epochs = 200 updates
    cfg = TrainConfig(dims=TINY, epochs=50, learning_rate=3e-3, validation_fraction=0)
    _, hist = train(cfg, ds)
    assert np.mean(hist.train_loss[-5:]) < 0.5 * np.mean(hist.train_loss[:5])


def test_validation_split_untouched():
    # a validation sequence that the model never fits stays at its initial error
    ds = [[np.zeros(8)] for _ in range(9)] + [[np.full(8, 0.9)]]
    cfg = TrainConfig(dims=TINY, epochs=30, learning_rate=1e-2, validation_fraction=0.1, seed=0)
    order = np.random.default_rng(0).permutation(10)
    held = ds[order[0]]
    params, hist = train(cfg, ds)
    assert hist.val_loss[hist.best_epoch - 1] == pytest.approx(
        np.mean([mse_loss(xh, x)[0] for xh, x in zip(forward_sequence(params, held)[0], held)])
    )
    if order[0] == 9:
        assert hist.val_loss[-1] > 0.1


def test_nan_input_raises():
    cfg = TrainConfig(dims=TINY, epochs=1, validation_fraction=0)
    with pytest.raises(NumericError):
        train(cfg, [[np.full(8, np.nan)]])


def test_initial_dims_checked():
    cfg = TrainConfig(dims=TINY, epochs=1)
    other = init_params(RaeDims.for_windows(8, d_z=4, d_h=3, d_m=4), 0)
    with pytest.raises(InvalidArgumentError):
        train(cfg, [[np.zeros(8)]], initial=other)
