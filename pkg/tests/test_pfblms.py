"""Partitioned-block frequency-domain LMS: exactness, convergence, divergence."""

import numpy as np
import pytest
from scipy.signal import fftconvolve

from unetaec import datagen
from unetaec.errors import InvalidArgumentError
from unetaec.pfblms import PfbLms

FS = 16000


def _stream(filt, far, mic, check=False):
    """Run whole blocks through the filter; returns the error signal."""
    num_blocks = far.size // filt.block
    err = np.zeros(num_blocks * filt.block)
    halvings = 0
    for b in range(num_blocks):
        sl = slice(b * filt.block, (b + 1) * filt.block)
        err[sl] = filt.process_block(far[sl], mic[sl])
        if check and filt.check_divergence(err[sl], mic[sl]):
            halvings += 1
    return (err, halvings) if check else err


def _erle_db(mic, err, sl):
    return 10.0 * np.log10(np.sum(mic[sl] ** 2) / np.sum(err[sl] ** 2))


# ----------------------------------------------------------- construction

def test_partition_counts():
    assert PfbLms(4000, 1024).partitions == 4
    assert PfbLms(1024, 1024).partitions == 1
    assert PfbLms(2500, 1024).partitions == 3


def test_constructor_validation():
    with pytest.raises(InvalidArgumentError):
        PfbLms(4000, 1000)  # block must be a power of two
    with pytest.raises(InvalidArgumentError):
        PfbLms(0, 1024)
    with pytest.raises(InvalidArgumentError):
        PfbLms(4000, 1024, mu=-1e-4)
    assert PfbLms(4000, 1024, mu=0.0).mu == 0.0  # frozen mode is legal


def test_process_block_validates_sizes():
    filt = PfbLms(2048, 1024)
    with pytest.raises(InvalidArgumentError):
        filt.process_block(np.zeros(512), np.zeros(1024))
    with pytest.raises(InvalidArgumentError):
        filt.process_block(np.zeros(1024), np.zeros((2, 512)))


# ------------------------------------------------------ exact filtering

def test_preload_taps_round_trip():
    fir = np.random.default_rng(0).standard_normal(512) * 0.1
    filt = PfbLms(4000, 1024)
    filt.preload(fir)
    taps = filt.taps()
    assert np.allclose(taps[:512], fir, atol=1e-12)
    assert np.max(np.abs(taps[512:])) < 1e-12
    with pytest.raises(InvalidArgumentError):
        filt.preload(np.zeros(4097))


def test_frozen_filter_reproduces_linear_convolution_across_partitions():
    # A 2500-tap FIR spans three partitions; the frozen filter's echo
    # estimate must equal the true linear convolution.
    rng = np.random.default_rng(5)
    fir = rng.standard_normal(2500) * np.exp(-np.arange(2500) / 400.0)
    fir /= np.sqrt(np.sum(fir ** 2))
    far = datagen.speech_shaped_noise(8 * 1024, seed=6)
    mic = fftconvolve(far, fir)[:far.size]
    filt = PfbLms(2500, 1024, mu=0.0)
    filt.preload(fir)
    err = _stream(filt, far, mic)
    assert np.max(np.abs(err)) < 1e-9 * np.max(np.abs(mic))


def test_frozen_at_true_path_leaves_negligible_residual():
    rir = datagen.gen_rir(32.0, 6.0, seed=3)
    far = datagen.speech_shaped_noise(10 * FS, seed=7)
    mic = fftconvolve(far, rir)[:far.size]
    filt = PfbLms(4000, 1024, mu=0.0)
    filt.preload(rir)
    err = _stream(filt, far, mic)
    n = err.size
    assert np.sqrt(np.mean(err ** 2)) < 1e-6 * np.sqrt(np.mean(mic[:n] ** 2))


def test_silent_far_end_changes_nothing():
    filt = PfbLms(2048, 1024, mu=1e-3)
    fir = np.random.default_rng(1).standard_normal(100)
    filt.preload(fir)
    before = filt._h.copy()
    mic = np.random.default_rng(2).standard_normal(1024)
    err = filt.process_block(np.zeros(1024), mic)
    assert np.array_equal(err, mic)
    assert np.array_equal(filt._h, before)


# ------------------------------------------------------------ adaptation

def test_updates_keep_the_gradient_constraint():
    # After adaptation the time image of every partition must stay causal:
    # the upper half of each 2B-point block is (numerically) zero.
    rir = datagen.gen_rir(16.0, 4.0, seed=11)
    far = datagen.speech_shaped_noise(16 * 1024, seed=12)
    mic = fftconvolve(far, rir)[:far.size]
    filt = PfbLms(4000, 1024, mu=2e-4)
    _stream(filt, far, mic)
    for p in range(filt.partitions):
        seg = np.fft.irfft(filt._h[p], n=2 * filt.block)
        assert np.max(np.abs(seg[filt.block:])) < 1e-9


def test_convergence_on_static_echo_path():
    # The published per-sample step (1e-4) adapts slowly but steadily; a
    # doubled step reaches deep cancellation within ten seconds.
    rir = datagen.gen_rir(32.0, 6.0, seed=3)
    far = datagen.speech_shaped_noise(10 * FS, seed=7)
    mic = fftconvolve(far, rir)[:far.size]

    erles = {}
    for mu in (1e-4, 2e-4):
        filt = PfbLms(4000, 1024, mu=mu)
        err = _stream(filt, far, mic)
        seconds = [_erle_db(mic, err, slice(t * FS, (t + 1) * FS))
                   for t in range(err.size // FS)]
        assert all(b - a > 0.5 for a, b in zip(seconds, seconds[1:])), seconds
        erles[mu] = _erle_db(mic, err, slice(8 * FS, err.size))
    assert erles[1e-4] > 15.0
    assert erles[2e-4] >= 20.0


# ------------------------------------------------------------ divergence

def test_eight_bad_blocks_halve_mu():
    filt = PfbLms(4000, 1024, mu=1e-4)
    mic = np.ones(1024) * 0.1
    for i in range(7):
        assert filt.check_divergence(2 * mic, mic) is False
    assert filt.check_divergence(2 * mic, mic) is True
    assert filt.mu == 5e-5


def test_alternating_blocks_never_halve():
    filt = PfbLms(4000, 1024, mu=1e-4)
    mic = np.ones(1024) * 0.1
    for i in range(40):
        bad = i % 2 == 0
        assert filt.check_divergence((2.0 if bad else 0.5) * mic, mic) is False
    assert filt.mu == 1e-4


def test_clean_blocks_never_halve():
    filt = PfbLms(4000, 1024, mu=1e-4)
    mic = np.ones(1024) * 0.1
    for _ in range(20):
        assert filt.check_divergence(np.zeros(1024), mic) is False
    assert filt.mu == 1e-4


def test_forced_divergence_triggers_halving_and_mu_never_increases():
    # A 100x step makes the normalized update unstable; the watchdog must
    # walk mu back down, and mu must never move upward.
    rir = datagen.gen_rir(32.0, 6.0, seed=3)
    far = datagen.speech_shaped_noise(10 * FS, seed=7)
    mic = fftconvolve(far, rir)[:far.size]
    filt = PfbLms(4000, 1024, mu=1e-2)
    mu_trace = [filt.mu]
    num_blocks = far.size // 1024
    for b in range(num_blocks):
        sl = slice(b * 1024, (b + 1) * 1024)
        err = filt.process_block(far[sl], mic[sl])
        filt.check_divergence(err, mic[sl])
        mu_trace.append(filt.mu)
    assert filt.mu < 1e-2, "expected at least one halving"
    assert all(b <= a for a, b in zip(mu_trace, mu_trace[1:]))
    assert np.all(np.isfinite(filt._h))
