"""Spectral front-end: window identities, frame geometry, round-trip accuracy."""

import numpy as np
import pytest

from unetaec import dsp
from unetaec.errors import InvalidArgumentError


def test_frame_geometry_constants():
    assert dsp.SAMPLE_RATE == 16000
    assert dsp.FRAME_SIZE == 2560
    assert dsp.STRIDE == 640
    assert dsp.WINDOW_SIZE == 318
    assert dsp.HOP == 80
    assert dsp.PAD == 119
    assert dsp.NUM_BINS == 160
    assert dsp.NUM_FRAMES == 32
    # 32 windows of 318 at hop 80 exactly tile the padded frame
    assert dsp.WINDOW_SIZE + (dsp.NUM_FRAMES - 1) * dsp.HOP == dsp.FRAME_SIZE + 2 * dsp.PAD


def test_periodic_hann_small_case():
    # Periodic form: w[k] = 0.5 - 0.5 cos(2πk/N), so hann(4) = [0, .5, 1, .5]
    np.testing.assert_allclose(dsp.periodic_hann(4), [0.0, 0.5, 1.0, 0.5], atol=1e-15)
    w = dsp.periodic_hann(dsp.WINDOW_SIZE)
    assert w[0] == 0.0
    # Σ w[k] = N/2 for the periodic window (cosine terms telescope to zero)
    np.testing.assert_allclose(w.sum(), 159.0, atol=1e-10)


def test_periodic_hann_rejects_bad_length():
    with pytest.raises(InvalidArgumentError):
        dsp.periodic_hann(0)
    with pytest.raises(InvalidArgumentError):
        dsp.periodic_hann(-3)


def test_stft_output_shape_and_dtype():
    rng = np.random.default_rng(0)
    spec = dsp.stft(rng.standard_normal(dsp.FRAME_SIZE))
    assert spec.shape == (160, 32)
    assert spec.dtype == np.complex128
    assert spec.flags.c_contiguous


def test_stft_constant_signal_dc_bin():
    # For an interior window (fully inside the unpadded region) of the
    # all-ones frame, the segment equals the window itself, whose DFT is
    # N/2 at bin 0, -N/4 at bin ±1, zero elsewhere.
    spec = dsp.stft(np.ones(dsp.FRAME_SIZE))
    mid = dsp.NUM_FRAMES // 2
    np.testing.assert_allclose(spec[0, mid], 159.0, atol=1e-9)
    np.testing.assert_allclose(spec[1, mid], -79.5, atol=1e-9)
    assert np.max(np.abs(spec[2:, mid])) < 1e-9


def test_stft_sinusoid_lands_on_expected_bin():
    # A sinusoid at 5 * fs / 318 sits exactly on DFT bin 5 of the window.
    k = 5
    f0 = k * dsp.SAMPLE_RATE / dsp.WINDOW_SIZE
    t = np.arange(dsp.FRAME_SIZE) / dsp.SAMPLE_RATE
    spec = dsp.stft(np.sin(2 * np.pi * f0 * t))
    mid = dsp.NUM_FRAMES // 2
    assert int(np.argmax(np.abs(spec[:, mid]))) == k


def test_stft_linearity():
    rng = np.random.default_rng(5)
    a = rng.standard_normal(dsp.FRAME_SIZE)
    b = rng.standard_normal(dsp.FRAME_SIZE)
    lhs = dsp.stft(2.5 * a - 0.75 * b)
    rhs = 2.5 * dsp.stft(a) - 0.75 * dsp.stft(b)
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)


def test_stft_matches_direct_dft():
    # Independent oracle: windowed segments through an explicit DFT matrix.
    rng = np.random.default_rng(9)
    x = rng.standard_normal(dsp.FRAME_SIZE)
    spec = dsp.stft(x)
    xp = np.zeros(dsp.FRAME_SIZE + 2 * dsp.PAD)
    xp[dsp.PAD:dsp.PAD + dsp.FRAME_SIZE] = x
    w = dsp.periodic_hann(dsp.WINDOW_SIZE)
    n = np.arange(dsp.WINDOW_SIZE)
    for t in (0, 7, 31):
        seg = xp[t * dsp.HOP:t * dsp.HOP + dsp.WINDOW_SIZE] * w
        for k in (0, 1, 42, 159):
            ref = np.sum(seg * np.exp(-2j * np.pi * k * n / dsp.WINDOW_SIZE))
            np.testing.assert_allclose(spec[k, t], ref, atol=1e-8)


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_round_trip_is_exact(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(dsp.FRAME_SIZE)
    y = dsp.istft(dsp.stft(x))
    rms = np.sqrt(np.mean((x - y) ** 2))
    assert rms < 1e-10


def test_round_trip_extreme_amplitudes():
    rng = np.random.default_rng(17)
    x = rng.standard_normal(dsp.FRAME_SIZE) * 1e4
    x[:100] = 0.0
    y = dsp.istft(dsp.stft(x))
    assert np.sqrt(np.mean((x - y) ** 2)) / 1e4 < 1e-10


def test_istft_validates_shape():
    with pytest.raises(InvalidArgumentError):
        dsp.istft(np.zeros((160, 31), dtype=np.complex128))
    with pytest.raises(InvalidArgumentError):
        dsp.stft(np.zeros(2561))
    with pytest.raises(InvalidArgumentError):
        dsp.stft(np.zeros((2, 2560)))
    with pytest.raises(InvalidArgumentError):
        dsp.stft(np.zeros(2560, dtype=np.int16))


def test_magnitude_phase_and_recombine():
    spec = np.array([[3 + 4j, 0j], [1j, -2 + 0j]])
    mag, ph = dsp.magnitude_phase(spec)
    np.testing.assert_allclose(mag, [[5.0, 0.0], [1.0, 2.0]])
    assert ph[0, 1] == 0.0          # zero bin keeps phase 0, not NaN
    np.testing.assert_allclose(ph[0, 0], np.arctan2(4, 3))
    np.testing.assert_allclose(dsp.recombine(mag, ph), spec, atol=1e-15)


def test_recombine_rejects_negative_magnitude():
    with pytest.raises(InvalidArgumentError):
        dsp.recombine(np.array([-1.0]), np.array([0.0]))
    with pytest.raises(InvalidArgumentError):
        dsp.recombine(np.zeros((2, 3)), np.zeros((3, 2)))
    with pytest.raises(InvalidArgumentError):
        dsp.magnitude_phase(np.zeros((2, 2)))  # real input
