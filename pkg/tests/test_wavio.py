"""16-bit mono WAV round-trip and validation checks."""

import wave

import numpy as np
import pytest

from unetaec import wavio
from unetaec.errors import FormatError, InvalidArgumentError


def test_grid_values_round_trip_bit_exactly(tmp_path):
    rng = np.random.default_rng(11)
    ints = rng.integers(-32768, 32768, size=4096)
    samples = ints / 32768.0
    path = tmp_path / "grid.wav"
    wavio.write_wav(path, samples)
    back = wavio.read_wav(path)
    assert np.array_equal(back, samples)


def test_arbitrary_floats_quantize_to_nearest_step(tmp_path):
    rng = np.random.default_rng(12)
    samples = rng.uniform(-0.9, 0.9, size=1000)
    path = tmp_path / "q.wav"
    wavio.write_wav(path, samples)
    back = wavio.read_wav(path)
    assert np.max(np.abs(back - samples)) <= 0.5 / 32768.0 + 1e-12
    assert np.array_equal(back, np.rint(samples * 32768.0) / 32768.0)


def test_out_of_range_values_clip_at_rails(tmp_path):
    path = tmp_path / "clip.wav"
    wavio.write_wav(path, np.array([1.5, -1.5, 1.0, -1.0]))
    back = wavio.read_wav(path)
    assert back[0] == 32767 / 32768.0
    assert back[1] == -1.0
    assert back[2] == 32767 / 32768.0  # +1.0 is one step above the int16 rail
    assert back[3] == -1.0


def test_write_rejects_bad_inputs(tmp_path):
    with pytest.raises(InvalidArgumentError):
        wavio.write_wav(tmp_path / "x.wav", np.zeros((4, 4)))
    with pytest.raises(InvalidArgumentError):
        wavio.write_wav(tmp_path / "x.wav", np.array([0.0, np.nan]))


def test_read_rejects_wrong_formats(tmp_path):
    stereo = tmp_path / "stereo.wav"
    with wave.open(str(stereo), "wb") as handle:
        handle.setnchannels(2)
        handle.setsampwidth(2)
        handle.setframerate(16000)
        handle.writeframes(b"\x00" * 64)
    with pytest.raises(FormatError):
        wavio.read_wav(stereo)

    slow = tmp_path / "slow.wav"
    with wave.open(str(slow), "wb") as handle:
        handle.setnchannels(1)
        handle.setsampwidth(2)
        handle.setframerate(8000)
        handle.writeframes(b"\x00" * 64)
    with pytest.raises(FormatError):
        wavio.read_wav(slow)

    garbage = tmp_path / "garbage.wav"
    garbage.write_bytes(b"not audio at all")
    with pytest.raises(FormatError):
        wavio.read_wav(garbage)

    with pytest.raises(FormatError):
        wavio.read_wav(tmp_path / "missing.wav")
