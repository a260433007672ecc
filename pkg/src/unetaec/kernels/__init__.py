"""Layer kernels with a compiled core and a numpy fallback.

The compiled backend (`unetaec.kernels._core`, C + AVX2/F16C via Cython) is
selected at import when available; otherwise the numpy implementation is used.
Set ``UNETAEC_KERNELS=fallback`` (or ``compiled``) to force a choice, e.g. for
benchmarking one against the other.

Tensor layouts, everywhere:

* activations ``(F, T, C)`` — frequency, time, channels, C-contiguous
* conv weights ``(KH, KW, Cin, Cout)``, biases ``(Cout,)``

Convolutions are "same"-padded cross-correlations; supported dtypes are
float32, float64 and float16 (half ops dequantize to fp32 internally and
saturate at the half range on the way back).
"""

import contextlib
import os

import numpy as np

from unetaec.errors import InvalidArgumentError

from . import _fallback

_BACKENDS = {"fallback": _fallback}

_env = os.environ.get("UNETAEC_KERNELS", "").strip().lower()
if _env not in ("fallback", "py", "numpy"):
    try:
        from . import _core
        _BACKENDS["compiled"] = _core
    except ImportError:
        _core = None
        if _env in ("compiled", "c"):
            raise

_active = _BACKENDS.get("compiled", _fallback)

_FLOAT_DTYPES = (np.float16, np.float32, np.float64)


def available_backends():
    return tuple(sorted(_BACKENDS))


def backend_name():
    return _active.NAME


def cpu_flags():
    return _active.cpu_flags()


def set_backend(name):
    global _active
    if name not in _BACKENDS:
        raise InvalidArgumentError(
            f"unknown kernel backend {name!r}; available: {available_backends()}")
    _active = _BACKENDS[name]


@contextlib.contextmanager
def use_backend(name):
    previous = backend_name()
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


def _as_c(a, dtype=None):
    return np.ascontiguousarray(a, dtype=dtype)


def _check_activation(x, name="x"):
    if not isinstance(x, np.ndarray) or x.ndim != 3:
        raise InvalidArgumentError(f"{name} must be a 3-d (F, T, C) array")
    if x.size == 0:
        raise InvalidArgumentError(f"{name} must be non-empty")
    if x.dtype.type not in _FLOAT_DTYPES:
        raise InvalidArgumentError(f"{name} has unsupported dtype {x.dtype}")


def _check_conv(x, w, b, expect_kh=None, expect_kw=None):
    _check_activation(x)
    if w.ndim != 4:
        raise InvalidArgumentError("w must be a 4-d (KH, KW, Cin, Cout) array")
    if b.ndim != 1 or b.shape[0] != w.shape[3]:
        raise InvalidArgumentError("b must be 1-d with length Cout")
    if w.shape[2] != x.shape[2]:
        raise InvalidArgumentError(
            f"channel mismatch: x has {x.shape[2]}, w expects {w.shape[2]}")
    if expect_kh is not None and (w.shape[0], w.shape[1]) != (expect_kh, expect_kw):
        raise InvalidArgumentError(
            f"kernel must be {expect_kh}x{expect_kw}, got {w.shape[0]}x{w.shape[1]}")
    if w.dtype != x.dtype or b.dtype != x.dtype:
        raise InvalidArgumentError("x, w, b must share one dtype")


def conv2d(x, w, b, relu=True):
    """Same-padded conv over (F, T, C); optionally fused ReLU."""
    _check_conv(x, w, b)
    if x.dtype == np.float64:
        return _active.conv2d_f64(_as_c(x), _as_c(w), _as_c(b), relu)
    if x.dtype == np.float32:
        return _active.conv2d_f32(_as_c(x), _as_c(w), _as_c(b), relu)
    return _active.conv2d_f16w32(_as_c(x), _as_c(w, np.float32),
                                 _as_c(b, np.float32), relu)


def maxpool_freq(x):
    """2x1 max pooling along the frequency axis (F must be even)."""
    _check_activation(x)
    if x.shape[0] % 2:
        raise InvalidArgumentError(f"F must be even to pool, got {x.shape[0]}")
    if x.dtype == np.float64:
        return _active.maxpool2x1_f64(_as_c(x))
    if x.dtype == np.float32:
        return _active.maxpool2x1_f32(_as_c(x))
    return _active.maxpool2x1_f16(_as_c(x))


def upsample_freq(x, w, b):
    """Transposed conv (kernel 2x1, stride 2) doubling the frequency axis."""
    _check_conv(x, w, b, expect_kh=2, expect_kw=1)
    if x.dtype == np.float64:
        return _active.upsample2x1_f64(_as_c(x), _as_c(w), _as_c(b))
    if x.dtype == np.float32:
        return _active.upsample2x1_f32(_as_c(x), _as_c(w), _as_c(b))
    return _active.upsample2x1_f16w32(_as_c(x), _as_c(w, np.float32),
                                      _as_c(b, np.float32))


def add_f16(a, b):
    """Half-precision elementwise add, saturating at the half range."""
    if a.shape != b.shape or a.dtype != np.float16 or b.dtype != np.float16:
        raise InvalidArgumentError("add_f16 expects two float16 arrays of one shape")
    return _active.add_f16(_as_c(a), _as_c(b))


def prepare_conv3x3_f16(w16, b16):
    """Backend-specific execution plan for a half-precision 3x3 conv.

    The plan is pinned to the backend active at build time; switching the
    default backend later does not retarget already-built plans.
    """
    if w16.ndim != 4 or w16.shape[0] != 3 or w16.shape[1] != 3:
        raise InvalidArgumentError("expected a (3, 3, Cin, Cout) kernel")
    return (_active.NAME, _active.prepare_conv3x3_f16(_as_c(w16), _as_c(b16)))


def conv3x3_f16(x, plan, relu=True):
    """Run a plan from :func:`prepare_conv3x3_f16` on float16 activations."""
    _check_activation(x)
    if x.dtype != np.float16:
        raise InvalidArgumentError("conv3x3_f16 expects float16 activations")
    name, data = plan
    return _BACKENDS[name].conv3x3_f16(_as_c(x), data, relu)
