"""Feature pipeline: sliding-frame assembly, normalization, reconstruction."""

import numpy as np
import pytest

from unetaec import dsp, features
from unetaec.errors import InvalidArgumentError


def blocks(rng, n):
    return [rng.standard_normal(dsp.STRIDE) for _ in range(n)]


def test_fresh_assembler_zero_history():
    a = features.FrameAssembler()
    b = np.ones(640)
    x, y = a.push_stride(b, 2 * b)
    assert np.all(x[:1920] == 0) and np.all(y[:1920] == 0)
    np.testing.assert_array_equal(x[1920:], b)
    np.testing.assert_array_equal(y[1920:], 2 * b)


def test_two_pushes_layout():
    a = features.FrameAssembler()
    b1, b2 = np.full(640, 1.0), np.full(640, 2.0)
    a.push_stride(b1, b1)
    x, _ = a.push_stride(b2, b2)
    assert np.all(x[:1280] == 0)
    np.testing.assert_array_equal(x[1280:1920], b1)
    np.testing.assert_array_equal(x[1920:], b2)


def test_four_pushes_fill_frame():
    # After four pushes the zero history is fully flushed: frame = b1‖b2‖b3‖b4.
    rng = np.random.default_rng(2)
    a = features.FrameAssembler()
    bs = blocks(rng, 4)
    for b in bs:
        x, y = a.push_stride(b, -b)
    np.testing.assert_array_equal(x, np.concatenate(bs))
    np.testing.assert_array_equal(y, -np.concatenate(bs))


def test_ring_keeps_most_recent_2560():
    rng = np.random.default_rng(3)
    a = features.FrameAssembler()
    bs = blocks(rng, 7)
    for b in bs:
        x, _ = a.push_stride(b, b)
    np.testing.assert_array_equal(x, np.concatenate(bs[3:]))


def test_reset_clears_history():
    rng = np.random.default_rng(4)
    a = features.FrameAssembler()
    a.push_stride(*blocks(rng, 2))
    a.reset()
    x, y = a.push_stride(np.zeros(640), np.zeros(640))
    assert not x.any() and not y.any()


def test_push_rejects_wrong_block_size():
    a = features.FrameAssembler()
    with pytest.raises(InvalidArgumentError):
        a.push_stride(np.zeros(641), np.zeros(640))
    with pytest.raises(InvalidArgumentError):
        a.push_stride(np.zeros(640), np.zeros((2, 320)))


def test_returned_frames_are_copies():
    a = features.FrameAssembler()
    x1, _ = a.push_stride(np.ones(640), np.ones(640))
    x1[:] = 99.0
    x2, _ = a.push_stride(np.zeros(640), np.zeros(640))
    assert not np.any(x2 == 99.0)


def test_normalize_zero_grid_hits_epsilon_floor():
    feat = features.normalize(np.zeros((160, 32)))
    assert feat.scale == 1e-8
    assert not feat.grid.any()


def test_normalize_scale_and_range():
    rng = np.random.default_rng(8)
    m = rng.random((160, 32)) * 4.0
    m[17, 5] = 4.0
    feat = features.normalize(m)
    assert feat.scale == 4.0
    assert feat.grid.max() <= 1.0 + 1e-9
    assert feat.grid.min() >= 0.0


def test_normalize_round_trip():
    rng = np.random.default_rng(9)
    m = rng.random((160, 32)) * 123.0
    feat = features.normalize(m)
    back = features.denormalize(feat)
    np.testing.assert_allclose(back, m, rtol=1e-9)


def test_normalize_rejects_bad_grids():
    with pytest.raises(InvalidArgumentError):
        features.normalize(np.zeros((160, 31)))
    bad = np.zeros((160, 32))
    bad[0, 0] = -1.0
    with pytest.raises(InvalidArgumentError):
        features.normalize(bad)
    bad[0, 0] = np.nan
    with pytest.raises(InvalidArgumentError):
        features.normalize(bad)
    bad[0, 0] = np.inf
    with pytest.raises(InvalidArgumentError):
        features.normalize(bad)


def test_reconstruct_identity_round_trip():
    # Ŝ = normalized |Y| with Y's own phase must give back the frame's last
    # 640 samples: the whole front end is invertible.
    rng = np.random.default_rng(12)
    y = rng.standard_normal(dsp.FRAME_SIZE)
    mag, phase = dsp.magnitude_phase(dsp.stft(y))
    feat = features.normalize(mag)
    out = features.reconstruct(feat.grid, phase, feat.scale)
    assert out.shape == (640,)
    rms = np.sqrt(np.mean((out - y[-640:]) ** 2))
    assert rms < 1e-10


def test_reconstruct_zero_estimate_gives_silence():
    phase = np.zeros((160, 32))
    out = features.reconstruct(np.zeros((160, 32)), phase, 3.0)
    assert not out.any()


def test_reconstruct_is_linear_in_estimate():
    rng = np.random.default_rng(13)
    s = rng.random((160, 32))
    phase = rng.uniform(-np.pi, np.pi, (160, 32))
    a = features.reconstruct(s, phase, 1.0)
    b = features.reconstruct(2.5 * s, phase, 1.0)
    np.testing.assert_allclose(b, 2.5 * a, atol=1e-9)


def test_reconstruct_validates():
    with pytest.raises(InvalidArgumentError):
        features.reconstruct(np.zeros((160, 31)), np.zeros((160, 32)), 1.0)
    with pytest.raises(InvalidArgumentError):
        features.reconstruct(np.zeros((160, 32)), np.zeros((160, 32)), 0.0)


def test_end_to_end_identity_through_pipeline():
    # assemble → stft → normalize → (identity network) → reconstruct:
    # once primed, every stride returns the newest 640 mic samples.
    rng = np.random.default_rng(21)
    a = features.FrameAssembler()
    for i in range(6):
        far = rng.standard_normal(640)
        mic = rng.standard_normal(640)
        _, y_frame = a.push_stride(far, mic)
        mag, phase = dsp.magnitude_phase(dsp.stft(y_frame))
        feat = features.normalize(mag)
        out = features.reconstruct(feat.grid, phase, feat.scale)
        rms = np.sqrt(np.mean((out - mic) ** 2))
        assert rms < 1e-6, (i, rms)
