# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled kernel backend: C with AVX2/FMA/F16C fast paths.

All functions assume C-contiguous inputs with the layouts documented in
convkernels.h; argument validation lives in :mod:`unetaec.kernels`.
"""

import numpy as np

cimport numpy as cnp
from libc.stdint cimport int64_t, uint16_t

cnp.import_array()

NAME = "compiled"

cdef extern from "convkernels.h":
    const char *uk_cpu_flags()
    void uk_conv2d_f32(const float *x, const float *w, const float *b, float *y,
                       int F, int T, int Cin, int Cout, int KH, int KW, int relu) nogil
    void uk_conv2d_f64(const double *x, const double *w, const double *b, double *y,
                       int F, int T, int Cin, int Cout, int KH, int KW, int relu) nogil
    void uk_maxpool2x1_f32(const float *x, float *y, int F, int T, int C) nogil
    void uk_maxpool2x1_f64(const double *x, double *y, int F, int T, int C) nogil
    void uk_maxpool2x1_f16(const uint16_t *x, uint16_t *y, int F, int T, int C) nogil
    void uk_convT2x1_f32(const float *x, const float *w, const float *b, float *y,
                         int F, int T, int Cin, int Cout) nogil
    void uk_convT2x1_f64(const double *x, const double *w, const double *b, double *y,
                         int F, int T, int Cin, int Cout) nogil
    void uk_conv2d_f16w32(const uint16_t *x, const float *w, const float *b,
                          uint16_t *y, int F, int T, int Cin, int Cout,
                          int KH, int KW, int relu) nogil
    void uk_convT2x1_f16w32(const uint16_t *x, const float *w, const float *b,
                            uint16_t *y, int F, int T, int Cin, int Cout) nogil
    void uk_add_f16(const uint16_t *a, const uint16_t *b, uint16_t *y, int64_t n) nogil
    int uk_winograd3x3_f16(const uint16_t *x, const float *wt, const float *b,
                           uint16_t *y, int F, int T, int Cin, int Cout, int relu) nogil


def cpu_flags():
    return uk_cpu_flags().decode("ascii")


def conv2d_f32(x, w, b, bint relu=True):
    cdef float[:, :, ::1] xv = x
    cdef float[:, :, :, ::1] wv = w
    cdef float[::1] bv = b
    y = np.empty((x.shape[0], x.shape[1], w.shape[3]), np.float32)
    cdef float[:, :, ::1] yv = y
    cdef int F = xv.shape[0], T = xv.shape[1], Cin = xv.shape[2]
    cdef int KH = wv.shape[0], KW = wv.shape[1], Cout = wv.shape[3]
    with nogil:
        uk_conv2d_f32(&xv[0, 0, 0], &wv[0, 0, 0, 0], &bv[0], &yv[0, 0, 0],
                      F, T, Cin, Cout, KH, KW, relu)
    return y


def conv2d_f64(x, w, b, bint relu=True):
    cdef double[:, :, ::1] xv = x
    cdef double[:, :, :, ::1] wv = w
    cdef double[::1] bv = b
    y = np.empty((x.shape[0], x.shape[1], w.shape[3]), np.float64)
    cdef double[:, :, ::1] yv = y
    cdef int F = xv.shape[0], T = xv.shape[1], Cin = xv.shape[2]
    cdef int KH = wv.shape[0], KW = wv.shape[1], Cout = wv.shape[3]
    with nogil:
        uk_conv2d_f64(&xv[0, 0, 0], &wv[0, 0, 0, 0], &bv[0], &yv[0, 0, 0],
                      F, T, Cin, Cout, KH, KW, relu)
    return y


def conv2d_f16w32(x, w32, b32, bint relu=True):
    cdef uint16_t[:, :, ::1] xv = x.view(np.uint16)
    cdef float[:, :, :, ::1] wv = w32
    cdef float[::1] bv = b32
    y = np.empty((x.shape[0], x.shape[1], w32.shape[3]), np.float16)
    cdef uint16_t[:, :, ::1] yv = y.view(np.uint16)
    cdef int F = xv.shape[0], T = xv.shape[1], Cin = xv.shape[2]
    cdef int KH = wv.shape[0], KW = wv.shape[1], Cout = wv.shape[3]
    with nogil:
        uk_conv2d_f16w32(&xv[0, 0, 0], &wv[0, 0, 0, 0], &bv[0], &yv[0, 0, 0],
                         F, T, Cin, Cout, KH, KW, relu)
    return y


def maxpool2x1_f32(x):
    cdef float[:, :, ::1] xv = x
    y = np.empty((x.shape[0] // 2, x.shape[1], x.shape[2]), np.float32)
    cdef float[:, :, ::1] yv = y
    with nogil:
        uk_maxpool2x1_f32(&xv[0, 0, 0], &yv[0, 0, 0],
                          xv.shape[0], xv.shape[1], xv.shape[2])
    return y


def maxpool2x1_f64(x):
    cdef double[:, :, ::1] xv = x
    y = np.empty((x.shape[0] // 2, x.shape[1], x.shape[2]), np.float64)
    cdef double[:, :, ::1] yv = y
    with nogil:
        uk_maxpool2x1_f64(&xv[0, 0, 0], &yv[0, 0, 0],
                          xv.shape[0], xv.shape[1], xv.shape[2])
    return y


def maxpool2x1_f16(x):
    cdef uint16_t[:, :, ::1] xv = x.view(np.uint16)
    y = np.empty((x.shape[0] // 2, x.shape[1], x.shape[2]), np.float16)
    cdef uint16_t[:, :, ::1] yv = y.view(np.uint16)
    with nogil:
        uk_maxpool2x1_f16(&xv[0, 0, 0], &yv[0, 0, 0],
                          xv.shape[0], xv.shape[1], xv.shape[2])
    return y


def upsample2x1_f32(x, w, b):
    cdef float[:, :, ::1] xv = x
    cdef float[:, :, :, ::1] wv = w
    cdef float[::1] bv = b
    y = np.empty((2 * x.shape[0], x.shape[1], w.shape[3]), np.float32)
    cdef float[:, :, ::1] yv = y
    with nogil:
        uk_convT2x1_f32(&xv[0, 0, 0], &wv[0, 0, 0, 0], &bv[0], &yv[0, 0, 0],
                        xv.shape[0], xv.shape[1], xv.shape[2], wv.shape[3])
    return y


def upsample2x1_f64(x, w, b):
    cdef double[:, :, ::1] xv = x
    cdef double[:, :, :, ::1] wv = w
    cdef double[::1] bv = b
    y = np.empty((2 * x.shape[0], x.shape[1], w.shape[3]), np.float64)
    cdef double[:, :, ::1] yv = y
    with nogil:
        uk_convT2x1_f64(&xv[0, 0, 0], &wv[0, 0, 0, 0], &bv[0], &yv[0, 0, 0],
                        xv.shape[0], xv.shape[1], xv.shape[2], wv.shape[3])
    return y


def upsample2x1_f16w32(x, w32, b32):
    cdef uint16_t[:, :, ::1] xv = x.view(np.uint16)
    cdef float[:, :, :, ::1] wv = w32
    cdef float[::1] bv = b32
    y = np.empty((2 * x.shape[0], x.shape[1], w32.shape[3]), np.float16)
    cdef uint16_t[:, :, ::1] yv = y.view(np.uint16)
    with nogil:
        uk_convT2x1_f16w32(&xv[0, 0, 0], &wv[0, 0, 0, 0], &bv[0], &yv[0, 0, 0],
                           xv.shape[0], xv.shape[1], xv.shape[2], wv.shape[3])
    return y


def add_f16(a, b):
    a1 = a.reshape(-1)
    b1 = b.reshape(-1)
    cdef uint16_t[::1] av = a1.view(np.uint16)
    cdef uint16_t[::1] bv = b1.view(np.uint16)
    y = np.empty(a.shape, np.float16)
    y1 = y.reshape(-1)
    cdef uint16_t[::1] yv = y1.view(np.uint16)
    cdef int64_t n = av.shape[0]
    with nogil:
        uk_add_f16(&av[0], &bv[0], &yv[0], n)
    return y


_WINO_G = np.array([[1.0, 0.0, 0.0],
                    [0.5, 0.5, 0.5],
                    [0.5, -0.5, 0.5],
                    [0.0, 0.0, 1.0]], dtype=np.float32)


def _winograd_weights(w32):
    wt = np.einsum("ai,ijcd,bj->abcd", _WINO_G, w32, _WINO_G)
    cin, cout = w32.shape[2], w32.shape[3]
    return np.ascontiguousarray(wt.reshape(16, cin, cout), dtype=np.float32)


def _winograd3x3_f16(x, wt, b32, bint relu):
    cdef uint16_t[:, :, ::1] xv = x.view(np.uint16)
    cdef float[:, :, ::1] wv = wt
    cdef float[::1] bv = b32
    y = np.empty((x.shape[0], x.shape[1], wt.shape[2]), np.float16)
    cdef uint16_t[:, :, ::1] yv = y.view(np.uint16)
    cdef int F = xv.shape[0], T = xv.shape[1]
    cdef int Cin = wv.shape[1], Cout = wv.shape[2]
    cdef int rc
    with nogil:
        rc = uk_winograd3x3_f16(&xv[0, 0, 0], &wv[0, 0, 0], &bv[0], &yv[0, 0, 0],
                                F, T, Cin, Cout, relu)
    if rc != 0:
        raise RuntimeError("winograd kernel rejected shape %r" % ((F, T, Cin, Cout),))
    return y


def prepare_conv3x3_f16(w16, b16):
    """Build this backend's execution plan for a half-precision 3x3 conv.

    Weights are stored at half precision; the plan carries dequantized fp32
    tensors (transformed into the Winograd domain for the fast path).
    """
    w32 = np.ascontiguousarray(w16, dtype=np.float32)
    b32 = np.ascontiguousarray(b16, dtype=np.float32)
    return (_winograd_weights(w32), w32, b32)


def conv3x3_f16(x, plan, bint relu=True):
    wt, w32, b32 = plan
    if x.shape[0] % 2 == 0 and x.shape[1] % 2 == 0:
        return _winograd3x3_f16(x, wt, b32, relu)
    return conv2d_f16w32(x, w32, b32, relu)
