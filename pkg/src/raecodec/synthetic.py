"""Seeded synthetic corpus: sums of a few random sinusoids plus light noise."""

import numpy as np


def sinusoid_trace(rng, length, n_channels=1, noise=0.01, max_cycles=None):
    """One trace of ``length`` samples; each channel sums 2-5 sinusoids.

    Frequencies are log-uniform between half a cycle and ``max_cycles`` per
    trace (default: one cycle per 64 samples), so traces mix slow and fast
    stretches.
    """
    t = np.arange(length, dtype=np.float64)
    max_cycles = max_cycles or max(2.0, length / 64.0)
    out = np.empty((length, n_channels))
    for ch in range(n_channels):
        k = rng.integers(2, 6)
        cycles = np.exp(rng.uniform(np.log(0.5), np.log(max_cycles), size=k))
        amp = rng.uniform(0.2, 1.0, size=k)
        phase = rng.uniform(0, 2 * np.pi, size=k)
        wave = (amp[:, None] * np.sin(2 * np.pi * cycles[:, None] * t / length + phase[:, None])).sum(0)
        out[:, ch] = wave + noise * rng.standard_normal(length)
    return out


def sinusoid_corpus(n_traces, length=1024, n_channels=1, seed=0, noise=0.01):
    rng = np.random.default_rng(seed)
    return [sinusoid_trace(rng, length, n_channels, noise) for _ in range(n_traces)]
