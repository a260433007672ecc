"""Mono 16-bit PCM WAV reading and writing at the fixed 16 kHz rate.

Samples live as float64 in [-1, 1] in memory.  The integer mapping is
symmetric (int = round(x * 32768), read back as int / 32768) so values
already on the 16-bit grid survive a write/read cycle bit-exactly.
"""

from __future__ import annotations

import wave

import numpy as np

from .errors import FormatError, InvalidArgumentError

SAMPLE_RATE = 16000
_SCALE = 32768.0


def read_wav(path) -> np.ndarray:
    """Read a mono 16-bit 16 kHz WAV file into a float64 array in [-1, 1)."""
    try:
        with wave.open(str(path), "rb") as handle:
            channels = handle.getnchannels()
            width = handle.getsampwidth()
            rate = handle.getframerate()
            if channels != 1:
                raise FormatError(f"{path}: expected mono audio, found {channels} channels")
            if width != 2:
                raise FormatError(f"{path}: expected 16-bit samples, found {8 * width}-bit")
            if rate != SAMPLE_RATE:
                raise FormatError(f"{path}: expected {SAMPLE_RATE} Hz, found {rate} Hz")
            raw = handle.readframes(handle.getnframes())
    except wave.Error as exc:
        raise FormatError(f"{path}: not a readable WAV file ({exc})") from exc
    except OSError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    return np.frombuffer(raw, dtype="<i2").astype(np.float64) / _SCALE


def write_wav(path, samples) -> None:
    """Write a 1-D float array (nominal range [-1, 1]) as mono 16-bit PCM.

    Values are rounded to the nearest 16-bit step and clipped at the rails;
    callers that care about clipping should rescale before writing.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 1:
        raise InvalidArgumentError(f"samples must be 1-D, got shape {samples.shape}")
    if not np.all(np.isfinite(samples)):
        raise InvalidArgumentError("samples must be finite")
    ints = np.clip(np.rint(samples * _SCALE), -32768, 32767).astype("<i2")
    try:
        with wave.open(str(path), "wb") as handle:
            handle.setnchannels(1)
            handle.setsampwidth(2)
            handle.setframerate(SAMPLE_RATE)
            handle.writeframes(ints.tobytes())
    except OSError as exc:
        raise FormatError(f"{path}: {exc}") from exc
