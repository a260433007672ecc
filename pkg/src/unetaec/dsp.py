"""Short-time spectral analysis for the canceler's 160 ms input frames.

A 2560-sample frame (160 ms at 16 kHz) is zero-padded by 119 samples on each
side, cut into 32 windows of length 318 at hop 80 under a periodic Hann
window, and transformed to a one-sided spectrum of 160 bins per window.  The
inverse applies weighted overlap-add and divides pointwise by the summed
squared window, which makes analysis→synthesis exact for any finite frame.
"""

import numpy as np

from .errors import InvalidArgumentError

SAMPLE_RATE = 16000
FRAME_SIZE = 2560      # 160 ms
STRIDE = 640           # 40 ms
WINDOW_SIZE = 318
HOP = 80
NUM_BINS = WINDOW_SIZE // 2 + 1   # 160
NUM_FRAMES = 32

# Symmetric zero padding so the 32 analysis windows exactly tile the frame:
# 318 + 31*80 = 2798 = 2560 + 2*119.
PAD = (WINDOW_SIZE + (NUM_FRAMES - 1) * HOP - FRAME_SIZE) // 2
_PADDED = FRAME_SIZE + 2 * PAD


def periodic_hann(n):
    """Periodic (DFT-even) Hann window of length n."""
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidArgumentError("window length must be a positive integer")
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


_WINDOW = periodic_hann(WINDOW_SIZE)
_WINDOW_SQ = _WINDOW * _WINDOW

# Σ_t w²[n - t*hop] over the padded support, precomputed once.  Strictly
# positive except at the very first/last pad samples, which the valid slice
# never touches.
_WSUM = np.zeros(_PADDED)
for _t in range(NUM_FRAMES):
    _WSUM[_t * HOP:_t * HOP + WINDOW_SIZE] += _WINDOW_SQ
del _t


def _check_frame(x):
    x = np.asarray(x)
    if x.ndim != 1 or x.shape[0] != FRAME_SIZE:
        raise InvalidArgumentError(
            f"expected a 1-d frame of {FRAME_SIZE} samples, got shape {x.shape}")
    if not np.issubdtype(x.dtype, np.floating):
        raise InvalidArgumentError(f"frame must be floating point, got {x.dtype}")
    return np.ascontiguousarray(x, dtype=np.float64)


def stft(frame):
    """Transform one 2560-sample frame to a (160, 32) complex spectrogram."""
    x = _check_frame(frame)
    xp = np.zeros(_PADDED)
    xp[PAD:PAD + FRAME_SIZE] = x
    windows = np.lib.stride_tricks.sliding_window_view(xp, WINDOW_SIZE)[::HOP]
    spec = np.fft.rfft(windows * _WINDOW, axis=1)
    return np.ascontiguousarray(spec.T)


def istft(spec):
    """Invert stft(): weighted overlap-add, normalized by the window-power sum."""
    s = np.asarray(spec)
    if s.shape != (NUM_BINS, NUM_FRAMES):
        raise InvalidArgumentError(
            f"expected spectrogram of shape ({NUM_BINS}, {NUM_FRAMES}), got {s.shape}")
    if not np.issubdtype(s.dtype, np.complexfloating):
        s = s.astype(np.complex128)
    windows = np.fft.irfft(s.T, n=WINDOW_SIZE, axis=1)
    y = np.zeros(_PADDED)
    for t in range(NUM_FRAMES):
        y[t * HOP:t * HOP + WINDOW_SIZE] += windows[t] * _WINDOW
    out = np.divide(y, _WSUM, out=np.zeros_like(y), where=_WSUM > 1e-12)
    return out[PAD:PAD + FRAME_SIZE]


def magnitude_phase(spec):
    """Split a complex spectrogram into (magnitude, phase); zero bins get phase 0."""
    s = np.asarray(spec)
    if not np.issubdtype(s.dtype, np.complexfloating):
        raise InvalidArgumentError(f"expected a complex spectrogram, got {s.dtype}")
    return np.abs(s), np.angle(s)


def recombine(magnitude, phase):
    """Rebuild a complex spectrogram from magnitude and phase arrays."""
    m = np.asarray(magnitude, dtype=np.float64)
    p = np.asarray(phase, dtype=np.float64)
    if m.shape != p.shape:
        raise InvalidArgumentError(
            f"magnitude shape {m.shape} does not match phase shape {p.shape}")
    if m.size and m.min() < 0:
        raise InvalidArgumentError("magnitude must be non-negative")
    return m * np.exp(1j * p)
