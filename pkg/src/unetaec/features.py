"""Feature pipeline between raw 40 ms strides and the network's spectrogram grids.

Each incoming 640-sample block is appended to a 2560-sample sliding frame
(120 ms of history + the new 40 ms) per channel.  Magnitude grids are scaled
by their per-frame maximum into [0, 1]; the estimate coming back from the
network is rescaled with the microphone frame's factor, recombined with the
microphone phase, and the newest 640 synthesis samples are emitted.
"""

from typing import NamedTuple

import numpy as np

from . import dsp
from .errors import InvalidArgumentError

HISTORY = dsp.FRAME_SIZE - dsp.STRIDE   # 1920 samples carried between strides
EPSILON = 1e-8


class NormalizedFeature(NamedTuple):
    """A magnitude grid divided by its recorded (strictly positive) scale."""
    grid: np.ndarray
    scale: float


class FrameAssembler:
    """Sliding-frame state for one far-end/microphone stream pair."""

    def __init__(self):
        self.reset()

    def reset(self):
        """Zero the history, as at stream start."""
        self._far = np.zeros(dsp.FRAME_SIZE)
        self._mic = np.zeros(dsp.FRAME_SIZE)

    def push_stride(self, far_block, mic_block):
        """Advance both channels by one 640-sample block; return the 2560-sample frames."""
        far = _check_block(far_block, "far_block")
        mic = _check_block(mic_block, "mic_block")
        self._far = np.concatenate([self._far[dsp.STRIDE:], far])
        self._mic = np.concatenate([self._mic[dsp.STRIDE:], mic])
        return self._far.copy(), self._mic.copy()


def _check_block(x, name):
    x = np.asarray(x)
    if x.ndim != 1 or x.shape[0] != dsp.STRIDE:
        raise InvalidArgumentError(
            f"{name} must be a 1-d block of {dsp.STRIDE} samples, got shape {x.shape}")
    return np.ascontiguousarray(x, dtype=np.float64)


def normalize(mag):
    """Scale a magnitude grid by max(max(mag), 1e-8) into [0, 1]."""
    m = np.asarray(mag, dtype=np.float64)
    if m.shape != (dsp.NUM_BINS, dsp.NUM_FRAMES):
        raise InvalidArgumentError(
            f"expected magnitude grid of shape ({dsp.NUM_BINS}, {dsp.NUM_FRAMES}), got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidArgumentError("magnitude grid contains non-finite entries")
    if m.min() < 0:
        raise InvalidArgumentError("magnitude grid contains negative entries")
    scale = max(float(m.max()), EPSILON)
    return NormalizedFeature(grid=m / scale, scale=scale)


def denormalize(feature):
    """Invert normalize(): grid times its recorded scale."""
    return np.asarray(feature.grid, dtype=np.float64) * float(feature.scale)


def reconstruct(net_output, y_phase, scale):
    """Turn a normalized estimate plus microphone phase into the newest 640 samples."""
    s_hat = np.asarray(net_output, dtype=np.float64)
    phase = np.asarray(y_phase, dtype=np.float64)
    expected = (dsp.NUM_BINS, dsp.NUM_FRAMES)
    if s_hat.shape != expected or phase.shape != expected:
        raise InvalidArgumentError(
            f"estimate shape {s_hat.shape} / phase shape {phase.shape}, expected {expected}")
    if not float(scale) > 0:
        raise InvalidArgumentError(f"scale must be positive, got {scale!r}")
    frame = dsp.istft(dsp.recombine(s_hat * float(scale), phase))
    return frame[-dsp.STRIDE:]
