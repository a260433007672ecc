"""Pure-numpy kernel backend.

Mirrors the compiled backend's contract exactly; used when the extension is
unavailable (or forced via ``UNETAEC_KERNELS=fallback``).  Half-precision ops
compute on dequantized fp32 values and saturate to +/-65504 before rounding
back, matching the compiled kernels' overflow behaviour.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

NAME = "fallback"

_F16_MAX = 65504.0


def cpu_flags():
    return "numpy"


def _saturate_f16(a32):
    return np.clip(a32, -_F16_MAX, _F16_MAX).astype(np.float16)


def _conv2d(x, w, b, relu):
    kh, kw = w.shape[0], w.shape[1]
    pf, pt = (kh - 1) // 2, (kw - 1) // 2
    xp = np.pad(x, ((pf, kh - 1 - pf), (pt, kw - 1 - pt), (0, 0)))
    win = sliding_window_view(xp, (kh, kw), axis=(0, 1))
    y = np.tensordot(win, w, axes=[(3, 4, 2), (0, 1, 2)]) + b
    if relu:
        np.maximum(y, 0.0, out=y)
    return y


def conv2d_f32(x, w, b, relu=True):
    return np.ascontiguousarray(_conv2d(x, w, b, relu), dtype=np.float32)


def conv2d_f64(x, w, b, relu=True):
    return np.ascontiguousarray(_conv2d(x, w, b, relu), dtype=np.float64)


def conv2d_f16w32(x, w32, b32, relu=True):
    y = _conv2d(x.astype(np.float32), w32, b32, relu)
    return _saturate_f16(y)


def maxpool2x1_f32(x):
    return np.ascontiguousarray(x.reshape(x.shape[0] // 2, 2, x.shape[1], x.shape[2]).max(axis=1))


def maxpool2x1_f64(x):
    return maxpool2x1_f32(x)


def maxpool2x1_f16(x):
    return maxpool2x1_f32(x)


def _upsample(x, w, b):
    wk = w[:, 0]  # (2, Cin, Cout)
    y = np.einsum("ftc,kco->fkto", x, wk).reshape(2 * x.shape[0], x.shape[1], w.shape[3])
    return y + b


def upsample2x1_f32(x, w, b):
    return np.ascontiguousarray(_upsample(x, w, b), dtype=np.float32)


def upsample2x1_f64(x, w, b):
    return np.ascontiguousarray(_upsample(x, w, b), dtype=np.float64)


def upsample2x1_f16w32(x, w32, b32):
    return _saturate_f16(_upsample(x.astype(np.float32), w32, b32))


def add_f16(a, b):
    return _saturate_f16(a.astype(np.float32) + b.astype(np.float32))


def prepare_conv3x3_f16(w16, b16):
    w32 = np.ascontiguousarray(w16, dtype=np.float32)
    b32 = np.ascontiguousarray(b16, dtype=np.float32)
    return (w32, b32)


def conv3x3_f16(x, plan, relu=True):
    w32, b32 = plan
    return conv2d_f16w32(x, w32, b32, relu)
