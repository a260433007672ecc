#include "convkernels.h"

#include <stddef.h>
#include <stdlib.h>
#include <string.h>

#if defined(__AVX2__) || defined(__F16C__) || defined(__FMA__)
#include <immintrin.h>
#endif

#if defined(__AVX2__) && defined(__FMA__)
#define UK_HAVE_AVX 1
#else
#define UK_HAVE_AVX 0
#endif

#if defined(__F16C__)
#define UK_HAVE_F16C 1
#else
#define UK_HAVE_F16C 0
#endif

const char *uk_cpu_flags(void)
{
#if UK_HAVE_AVX && UK_HAVE_F16C
    return "avx2+fma+f16c";
#elif UK_HAVE_AVX
    return "avx2+fma";
#else
    return "generic";
#endif
}

/* ------------------------------------------------------------------ */
/* half <-> float                                                      */
/* ------------------------------------------------------------------ */

static inline float uk_h2f(uint16_t h)
{
#if UK_HAVE_F16C
    return _cvtsh_ss(h);
#else
    uint32_t sign = (uint32_t)(h & 0x8000u) << 16;
    uint32_t e = (h >> 10) & 0x1fu;
    uint32_t m = h & 0x3ffu;
    uint32_t u;
    union { uint32_t u; float f; } v;
    if (e == 0) {
        if (m == 0) {
            u = sign;
        } else {
            int sh = 0;
            while (!(m & 0x400u)) { m <<= 1; ++sh; }
            m &= 0x3ffu;
            u = sign | ((uint32_t)(113 - sh) << 23) | (m << 13);
        }
    } else if (e == 0x1fu) {
        u = sign | 0x7f800000u | (m << 13);
    } else {
        u = sign | ((e + 112u) << 23) | (m << 13);
    }
    v.u = u;
    return v.f;
#endif
}

static inline uint16_t uk_f2h(float f)
{
#if UK_HAVE_F16C
    return (uint16_t)_cvtss_sh(f, _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
#else
    union { float f; uint32_t u; } v = { f };
    uint32_t u = v.u;
    uint32_t sign = (u >> 16) & 0x8000u;
    uint32_t fexp = (u >> 23) & 0xffu;
    uint32_t m = u & 0x7fffffu;
    int32_t e = (int32_t)fexp - 127 + 15;
    if (fexp == 0xffu)
        return (uint16_t)(sign | 0x7c00u | (m ? 0x200u : 0u));
    if (e >= 0x1f)
        return (uint16_t)(sign | 0x7c00u);
    if (e <= 0) {
        uint32_t shift, half, rem, halfway;
        if (e < -10)
            return (uint16_t)sign;
        m |= 0x800000u;
        shift = (uint32_t)(14 - e);
        half = m >> shift;
        rem = m & ((1u << shift) - 1u);
        halfway = 1u << (shift - 1);
        if (rem > halfway || (rem == halfway && (half & 1u)))
            ++half;
        return (uint16_t)(sign | half);
    }
    {
        uint32_t half = ((uint32_t)e << 10) | (m >> 13);
        uint32_t rem = m & 0x1fffu;
        if (rem > 0x1000u || (rem == 0x1000u && (half & 1u)))
            ++half;
        return (uint16_t)(sign | half);
    }
#endif
}

static inline float uk_sat16(float v)
{
    if (v > 65504.0f) return 65504.0f;
    if (v < -65504.0f) return -65504.0f;
    return v;
}

#if UK_HAVE_AVX && UK_HAVE_F16C
static inline __m256 uk_cvtph8(const uint16_t *p)
{
    return _mm256_cvtph_ps(_mm_loadu_si128((const __m128i *)p));
}

static inline void uk_storeph8(uint16_t *p, __m256 v)
{
    const __m256 hi = _mm256_set1_ps(65504.0f);
    const __m256 lo = _mm256_set1_ps(-65504.0f);
    v = _mm256_min_ps(_mm256_max_ps(v, lo), hi);
    _mm_storeu_si128((__m128i *)p,
                     _mm256_cvtps_ph(v, _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC));
}
#endif

/* ------------------------------------------------------------------ */
/* direct convolution, fp32/fp64                                       */
/* ------------------------------------------------------------------ */

#if !UK_HAVE_AVX
static void conv_f32_scalar_region(const float *x, const float *w, const float *b,
                                   float *y, int F, int T, int Cin, int Cout,
                                   int KH, int KW, int relu, int pf, int pt,
                                   int fa, int fb, int ta, int tb, int ca, int cb)
{
    int f, t, co, kh, kw, ci;
    for (f = fa; f < fb; ++f)
        for (t = ta; t < tb; ++t)
            for (co = ca; co < cb; ++co) {
                float acc = b[co];
                for (kh = 0; kh < KH; ++kh) {
                    int fi = f + kh - pf;
                    if (fi < 0 || fi >= F) continue;
                    for (kw = 0; kw < KW; ++kw) {
                        int ti = t + kw - pt;
                        if (ti < 0 || ti >= T) continue;
                        {
                            const float *xp = x + ((size_t)fi * T + ti) * Cin;
                            const float *wp = w + ((size_t)kh * KW + kw) * Cin * Cout + co;
                            for (ci = 0; ci < Cin; ++ci)
                                acc += xp[ci] * wp[(size_t)ci * Cout];
                        }
                    }
                }
                if (relu && acc < 0.0f) acc = 0.0f;
                y[((size_t)f * T + t) * Cout + co] = acc;
            }
}
#endif /* !UK_HAVE_AVX */

#if UK_HAVE_AVX
/* Register tile: 4 time positions x 16 output channels.  The channel block is
 * the outermost loop so its weight slice (KH*KW*Cin*16 floats) stays
 * cache-resident while the activations stream through.  Tiles that touch the
 * padding mask individual pixels; partial tiles fall back to a stack
 * accumulator whose cout loop vectorizes over contiguous weights. */
static void conv_f32_avx(const float *x, const float *w, const float *b,
                         float *y, int F, int T, int Cin, int Cout,
                         int KH, int KW, int relu, int pf, int pt)
{
    int co0, f, t0, kh, kw, ci, i, j;
    for (co0 = 0; co0 < Cout; co0 += 16) {
        int nco = Cout - co0 < 16 ? Cout - co0 : 16;
        for (f = 0; f < F; ++f) {
            for (t0 = 0; t0 < T; t0 += 4) {
                int nt = T - t0 < 4 ? T - t0 : 4;
                if (nt == 4 && nco == 16) {
                    __m256 bv0 = _mm256_loadu_ps(b + co0);
                    __m256 bv1 = _mm256_loadu_ps(b + co0 + 8);
                    __m256 a00 = bv0, a01 = bv1, a10 = bv0, a11 = bv1;
                    __m256 a20 = bv0, a21 = bv1, a30 = bv0, a31 = bv1;
                    for (kh = 0; kh < KH; ++kh) {
                        int fi = f + kh - pf;
                        if (fi < 0 || fi >= F) continue;
                        for (kw = 0; kw < KW; ++kw) {
                            int ti = t0 + kw - pt;
                            const float *wrow = w + ((size_t)kh * KW + kw) * Cin * Cout + co0;
                            const float *xrow = x + ((ptrdiff_t)fi * T + ti) * Cin;
                            int i0 = ti < 0 ? -ti : 0;
                            int i1 = ti + 3 >= T ? T - 1 - ti : 3;
                            if (i0 == 0 && i1 == 3) {
                                for (ci = 0; ci < Cin; ++ci) {
                                    __m256 wv0 = _mm256_loadu_ps(wrow + (size_t)ci * Cout);
                                    __m256 wv1 = _mm256_loadu_ps(wrow + (size_t)ci * Cout + 8);
                                    __m256 xv;
                                    xv = _mm256_broadcast_ss(xrow + ci);
                                    a00 = _mm256_fmadd_ps(xv, wv0, a00);
                                    a01 = _mm256_fmadd_ps(xv, wv1, a01);
                                    xv = _mm256_broadcast_ss(xrow + (size_t)Cin + ci);
                                    a10 = _mm256_fmadd_ps(xv, wv0, a10);
                                    a11 = _mm256_fmadd_ps(xv, wv1, a11);
                                    xv = _mm256_broadcast_ss(xrow + 2 * (size_t)Cin + ci);
                                    a20 = _mm256_fmadd_ps(xv, wv0, a20);
                                    a21 = _mm256_fmadd_ps(xv, wv1, a21);
                                    xv = _mm256_broadcast_ss(xrow + 3 * (size_t)Cin + ci);
                                    a30 = _mm256_fmadd_ps(xv, wv0, a30);
                                    a31 = _mm256_fmadd_ps(xv, wv1, a31);
                                }
                            } else {
                                for (ci = 0; ci < Cin; ++ci) {
                                    __m256 wv0 = _mm256_loadu_ps(wrow + (size_t)ci * Cout);
                                    __m256 wv1 = _mm256_loadu_ps(wrow + (size_t)ci * Cout + 8);
                                    __m256 xv;
                                    if (i0 <= 0 && 0 <= i1) {
                                        xv = _mm256_broadcast_ss(xrow + ci);
                                        a00 = _mm256_fmadd_ps(xv, wv0, a00);
                                        a01 = _mm256_fmadd_ps(xv, wv1, a01);
                                    }
                                    if (i0 <= 1 && 1 <= i1) {
                                        xv = _mm256_broadcast_ss(xrow + (size_t)Cin + ci);
                                        a10 = _mm256_fmadd_ps(xv, wv0, a10);
                                        a11 = _mm256_fmadd_ps(xv, wv1, a11);
                                    }
                                    if (i0 <= 2 && 2 <= i1) {
                                        xv = _mm256_broadcast_ss(xrow + 2 * (size_t)Cin + ci);
                                        a20 = _mm256_fmadd_ps(xv, wv0, a20);
                                        a21 = _mm256_fmadd_ps(xv, wv1, a21);
                                    }
                                    if (i0 <= 3 && 3 <= i1) {
                                        xv = _mm256_broadcast_ss(xrow + 3 * (size_t)Cin + ci);
                                        a30 = _mm256_fmadd_ps(xv, wv0, a30);
                                        a31 = _mm256_fmadd_ps(xv, wv1, a31);
                                    }
                                }
                            }
                        }
                    }
                    if (relu) {
                        __m256 z = _mm256_setzero_ps();
                        a00 = _mm256_max_ps(a00, z); a01 = _mm256_max_ps(a01, z);
                        a10 = _mm256_max_ps(a10, z); a11 = _mm256_max_ps(a11, z);
                        a20 = _mm256_max_ps(a20, z); a21 = _mm256_max_ps(a21, z);
                        a30 = _mm256_max_ps(a30, z); a31 = _mm256_max_ps(a31, z);
                    }
                    {
                        float *yp = y + ((size_t)f * T + t0) * Cout + co0;
                        _mm256_storeu_ps(yp, a00);
                        _mm256_storeu_ps(yp + 8, a01);
                        _mm256_storeu_ps(yp + Cout, a10);
                        _mm256_storeu_ps(yp + Cout + 8, a11);
                        _mm256_storeu_ps(yp + 2 * (size_t)Cout, a20);
                        _mm256_storeu_ps(yp + 2 * (size_t)Cout + 8, a21);
                        _mm256_storeu_ps(yp + 3 * (size_t)Cout, a30);
                        _mm256_storeu_ps(yp + 3 * (size_t)Cout + 8, a31);
                    }
                } else {
                    float acc[4][16];
                    for (i = 0; i < nt; ++i)
                        for (j = 0; j < nco; ++j)
                            acc[i][j] = b[co0 + j];
                    for (kh = 0; kh < KH; ++kh) {
                        int fi = f + kh - pf;
                        if (fi < 0 || fi >= F) continue;
                        for (kw = 0; kw < KW; ++kw)
                            for (i = 0; i < nt; ++i) {
                                int ti = t0 + i + kw - pt;
                                const float *xp, *wrow;
                                if (ti < 0 || ti >= T) continue;
                                xp = x + ((size_t)fi * T + ti) * Cin;
                                wrow = w + ((size_t)kh * KW + kw) * Cin * Cout + co0;
                                for (ci = 0; ci < Cin; ++ci) {
                                    float xv = xp[ci];
                                    const float *wp = wrow + (size_t)ci * Cout;
                                    for (j = 0; j < nco; ++j)
                                        acc[i][j] += xv * wp[j];
                                }
                            }
                    }
                    for (i = 0; i < nt; ++i) {
                        float *yp = y + ((size_t)f * T + t0 + i) * Cout + co0;
                        for (j = 0; j < nco; ++j) {
                            float v = acc[i][j];
                            if (relu && v < 0.0f) v = 0.0f;
                            yp[j] = v;
                        }
                    }
                }
            }
        }
    }
}
#endif /* UK_HAVE_AVX */

void uk_conv2d_f32(const float *x, const float *w, const float *b, float *y,
                   int F, int T, int Cin, int Cout, int KH, int KW, int relu)
{
    int pf = (KH - 1) / 2, pt = (KW - 1) / 2;
#if UK_HAVE_AVX
    conv_f32_avx(x, w, b, y, F, T, Cin, Cout, KH, KW, relu, pf, pt);
#else
    conv_f32_scalar_region(x, w, b, y, F, T, Cin, Cout, KH, KW, relu,
                           pf, pt, 0, F, 0, T, 0, Cout);
#endif
}

void uk_conv2d_f64(const double *x, const double *w, const double *b, double *y,
                   int F, int T, int Cin, int Cout, int KH, int KW, int relu)
{
    int pf = (KH - 1) / 2, pt = (KW - 1) / 2;
    int f, t, co, kh, kw, ci;
    for (f = 0; f < F; ++f)
        for (t = 0; t < T; ++t)
            for (co = 0; co < Cout; ++co) {
                double acc = b[co];
                for (kh = 0; kh < KH; ++kh) {
                    int fi = f + kh - pf;
                    if (fi < 0 || fi >= F) continue;
                    for (kw = 0; kw < KW; ++kw) {
                        int ti = t + kw - pt;
                        if (ti < 0 || ti >= T) continue;
                        {
                            const double *xp = x + ((size_t)fi * T + ti) * Cin;
                            const double *wp = w + ((size_t)kh * KW + kw) * Cin * Cout + co;
                            for (ci = 0; ci < Cin; ++ci)
                                acc += xp[ci] * wp[(size_t)ci * Cout];
                        }
                    }
                }
                if (relu && acc < 0.0) acc = 0.0;
                y[((size_t)f * T + t) * Cout + co] = acc;
            }
}

/* ------------------------------------------------------------------ */
/* direct convolution, fp16 activations / fp32 weights                 */
/* ------------------------------------------------------------------ */

void uk_conv2d_f16w32(const uint16_t *x, const float *w, const float *b,
                      uint16_t *y, int F, int T, int Cin, int Cout,
                      int KH, int KW, int relu)
{
    int pf = (KH - 1) / 2, pt = (KW - 1) / 2;
    int f, t, co, kh, kw, ci;
    for (f = 0; f < F; ++f)
        for (t = 0; t < T; ++t)
            for (co = 0; co < Cout; ++co) {
                float acc = b[co];
                for (kh = 0; kh < KH; ++kh) {
                    int fi = f + kh - pf;
                    if (fi < 0 || fi >= F) continue;
                    for (kw = 0; kw < KW; ++kw) {
                        int ti = t + kw - pt;
                        if (ti < 0 || ti >= T) continue;
                        {
                            const uint16_t *xp = x + ((size_t)fi * T + ti) * Cin;
                            const float *wp = w + ((size_t)kh * KW + kw) * Cin * Cout + co;
                            for (ci = 0; ci < Cin; ++ci)
                                acc += uk_h2f(xp[ci]) * wp[(size_t)ci * Cout];
                        }
                    }
                }
                if (relu && acc < 0.0f) acc = 0.0f;
                y[((size_t)f * T + t) * Cout + co] = uk_f2h(uk_sat16(acc));
            }
}

/* ------------------------------------------------------------------ */
/* 2x1 max pooling along F                                             */
/* ------------------------------------------------------------------ */

void uk_maxpool2x1_f32(const float *x, float *y, int F, int T, int C)
{
    int F2 = F / 2, f2;
    size_t row = (size_t)T * C;
    for (f2 = 0; f2 < F2; ++f2) {
        const float *r0 = x + (size_t)(2 * f2) * row;
        const float *r1 = r0 + row;
        float *yp = y + (size_t)f2 * row;
        size_t i = 0;
#if UK_HAVE_AVX
        for (; i + 8 <= row; i += 8)
            _mm256_storeu_ps(yp + i, _mm256_max_ps(_mm256_loadu_ps(r0 + i),
                                                   _mm256_loadu_ps(r1 + i)));
#endif
        for (; i < row; ++i)
            yp[i] = r0[i] > r1[i] ? r0[i] : r1[i];
    }
}

void uk_maxpool2x1_f64(const double *x, double *y, int F, int T, int C)
{
    int F2 = F / 2, f2;
    size_t row = (size_t)T * C, i;
    for (f2 = 0; f2 < F2; ++f2) {
        const double *r0 = x + (size_t)(2 * f2) * row;
        const double *r1 = r0 + row;
        double *yp = y + (size_t)f2 * row;
        for (i = 0; i < row; ++i)
            yp[i] = r0[i] > r1[i] ? r0[i] : r1[i];
    }
}

void uk_maxpool2x1_f16(const uint16_t *x, uint16_t *y, int F, int T, int C)
{
    int F2 = F / 2, f2;
    size_t row = (size_t)T * C;
    for (f2 = 0; f2 < F2; ++f2) {
        const uint16_t *r0 = x + (size_t)(2 * f2) * row;
        const uint16_t *r1 = r0 + row;
        uint16_t *yp = y + (size_t)f2 * row;
        size_t i = 0;
#if UK_HAVE_AVX && UK_HAVE_F16C
        for (; i + 8 <= row; i += 8) {
            __m256 v = _mm256_max_ps(uk_cvtph8(r0 + i), uk_cvtph8(r1 + i));
            _mm_storeu_si128((__m128i *)(yp + i),
                             _mm256_cvtps_ph(v, _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC));
        }
#endif
        for (; i < row; ++i) {
            float a = uk_h2f(r0[i]), bb = uk_h2f(r1[i]);
            yp[i] = a > bb ? r0[i] : r1[i];
        }
    }
}

/* ------------------------------------------------------------------ */
/* transposed conv 2x1 stride 2 along F                                */
/* ------------------------------------------------------------------ */

void uk_convT2x1_f32(const float *x, const float *w, const float *b, float *y,
                     int F, int T, int Cin, int Cout)
{
    /* kernel 2, stride 2: output row fo draws on input row fo/2 with tap fo%2 */
    int fo, t, co, ci;
    for (fo = 0; fo < 2 * F; ++fo) {
        const float *xrow = x + (size_t)(fo / 2) * T * Cin;
        const float *wk = w + (size_t)(fo & 1) * Cin * Cout;
        float *yrow = y + (size_t)fo * T * Cout;
#if UK_HAVE_AVX
        if (Cout >= 16) {
            int co16 = Cout & ~15;
            for (t = 0; t < T; ++t) {
                const float *xp = xrow + (size_t)t * Cin;
                float *yp = yrow + (size_t)t * Cout;
                for (co = 0; co < co16; co += 16) {
                    __m256 a0 = _mm256_loadu_ps(b + co);
                    __m256 a1 = _mm256_loadu_ps(b + co + 8);
                    for (ci = 0; ci < Cin; ++ci) {
                        __m256 xv = _mm256_broadcast_ss(xp + ci);
                        const float *wp = wk + (size_t)ci * Cout + co;
                        a0 = _mm256_fmadd_ps(xv, _mm256_loadu_ps(wp), a0);
                        a1 = _mm256_fmadd_ps(xv, _mm256_loadu_ps(wp + 8), a1);
                    }
                    _mm256_storeu_ps(yp + co, a0);
                    _mm256_storeu_ps(yp + co + 8, a1);
                }
                for (co = co16; co < Cout; ++co) {
                    float acc = b[co];
                    for (ci = 0; ci < Cin; ++ci)
                        acc += xp[ci] * wk[(size_t)ci * Cout + co];
                    yp[co] = acc;
                }
            }
            continue;
        }
#endif
        for (t = 0; t < T; ++t) {
            const float *xp = xrow + (size_t)t * Cin;
            float *yp = yrow + (size_t)t * Cout;
            for (co = 0; co < Cout; ++co) {
                float acc = b[co];
                for (ci = 0; ci < Cin; ++ci)
                    acc += xp[ci] * wk[(size_t)ci * Cout + co];
                yp[co] = acc;
            }
        }
    }
}

void uk_convT2x1_f64(const double *x, const double *w, const double *b, double *y,
                     int F, int T, int Cin, int Cout)
{
    int fo, t, co, ci;
    for (fo = 0; fo < 2 * F; ++fo) {
        const double *xrow = x + (size_t)(fo / 2) * T * Cin;
        const double *wk = w + (size_t)(fo & 1) * Cin * Cout;
        double *yrow = y + (size_t)fo * T * Cout;
        for (t = 0; t < T; ++t) {
            const double *xp = xrow + (size_t)t * Cin;
            double *yp = yrow + (size_t)t * Cout;
            for (co = 0; co < Cout; ++co) {
                double acc = b[co];
                for (ci = 0; ci < Cin; ++ci)
                    acc += xp[ci] * wk[(size_t)ci * Cout + co];
                yp[co] = acc;
            }
        }
    }
}

void uk_convT2x1_f16w32(const uint16_t *x, const float *w, const float *b,
                        uint16_t *y, int F, int T, int Cin, int Cout)
{
    int fo, t, co, ci;
    for (fo = 0; fo < 2 * F; ++fo) {
        const uint16_t *xrow = x + (size_t)(fo / 2) * T * Cin;
        const float *wk = w + (size_t)(fo & 1) * Cin * Cout;
        uint16_t *yrow = y + (size_t)fo * T * Cout;
#if UK_HAVE_AVX && UK_HAVE_F16C
        if (Cout >= 16) {
            int co16 = Cout & ~15;
            for (t = 0; t < T; ++t) {
                const uint16_t *xp = xrow + (size_t)t * Cin;
                uint16_t *yp = yrow + (size_t)t * Cout;
                for (co = 0; co < co16; co += 16) {
                    __m256 a0 = _mm256_loadu_ps(b + co);
                    __m256 a1 = _mm256_loadu_ps(b + co + 8);
                    for (ci = 0; ci < Cin; ++ci) {
                        __m256 xv = _mm256_set1_ps(uk_h2f(xp[ci]));
                        const float *wp = wk + (size_t)ci * Cout + co;
                        a0 = _mm256_fmadd_ps(xv, _mm256_loadu_ps(wp), a0);
                        a1 = _mm256_fmadd_ps(xv, _mm256_loadu_ps(wp + 8), a1);
                    }
                    uk_storeph8(yp + co, a0);
                    uk_storeph8(yp + co + 8, a1);
                }
                for (co = co16; co < Cout; ++co) {
                    float acc = b[co];
                    for (ci = 0; ci < Cin; ++ci)
                        acc += uk_h2f(xp[ci]) * wk[(size_t)ci * Cout + co];
                    yp[co] = uk_f2h(uk_sat16(acc));
                }
            }
            continue;
        }
#endif
        for (t = 0; t < T; ++t) {
            const uint16_t *xp = xrow + (size_t)t * Cin;
            uint16_t *yp = yrow + (size_t)t * Cout;
            for (co = 0; co < Cout; ++co) {
                float acc = b[co];
                for (ci = 0; ci < Cin; ++ci)
                    acc += uk_h2f(xp[ci]) * wk[(size_t)ci * Cout + co];
                yp[co] = uk_f2h(uk_sat16(acc));
            }
        }
    }
}

/* ------------------------------------------------------------------ */
/* elementwise                                                         */
/* ------------------------------------------------------------------ */

void uk_add_f16(const uint16_t *a, const uint16_t *b, uint16_t *y, int64_t n)
{
    int64_t i = 0;
#if UK_HAVE_AVX && UK_HAVE_F16C
    for (; i + 8 <= n; i += 8)
        uk_storeph8(y + i, _mm256_add_ps(uk_cvtph8(a + i), uk_cvtph8(b + i)));
#endif
    for (; i < n; ++i)
        y[i] = uk_f2h(uk_sat16(uk_h2f(a[i]) + uk_h2f(b[i])));
}

/* ------------------------------------------------------------------ */
/* small fp32 GEMM (C = A * B), used by the Winograd plan              */
/* ------------------------------------------------------------------ */

#if UK_HAVE_AVX
static void uk_gemm4x16(const float *A, int lda, const float *B, int ldb,
                        float *C, int ldc, int K)
{
    __m256 c00 = _mm256_setzero_ps(), c01 = _mm256_setzero_ps();
    __m256 c10 = _mm256_setzero_ps(), c11 = _mm256_setzero_ps();
    __m256 c20 = _mm256_setzero_ps(), c21 = _mm256_setzero_ps();
    __m256 c30 = _mm256_setzero_ps(), c31 = _mm256_setzero_ps();
    int k;
    for (k = 0; k < K; ++k) {
        __m256 b0 = _mm256_loadu_ps(B + (size_t)k * ldb);
        __m256 b1 = _mm256_loadu_ps(B + (size_t)k * ldb + 8);
        __m256 a;
        a = _mm256_broadcast_ss(A + k);
        c00 = _mm256_fmadd_ps(a, b0, c00); c01 = _mm256_fmadd_ps(a, b1, c01);
        a = _mm256_broadcast_ss(A + (size_t)lda + k);
        c10 = _mm256_fmadd_ps(a, b0, c10); c11 = _mm256_fmadd_ps(a, b1, c11);
        a = _mm256_broadcast_ss(A + 2 * (size_t)lda + k);
        c20 = _mm256_fmadd_ps(a, b0, c20); c21 = _mm256_fmadd_ps(a, b1, c21);
        a = _mm256_broadcast_ss(A + 3 * (size_t)lda + k);
        c30 = _mm256_fmadd_ps(a, b0, c30); c31 = _mm256_fmadd_ps(a, b1, c31);
    }
    _mm256_storeu_ps(C, c00);
    _mm256_storeu_ps(C + 8, c01);
    _mm256_storeu_ps(C + (size_t)ldc, c10);
    _mm256_storeu_ps(C + (size_t)ldc + 8, c11);
    _mm256_storeu_ps(C + 2 * (size_t)ldc, c20);
    _mm256_storeu_ps(C + 2 * (size_t)ldc + 8, c21);
    _mm256_storeu_ps(C + 3 * (size_t)ldc, c30);
    _mm256_storeu_ps(C + 3 * (size_t)ldc + 8, c31);
}
#endif

static void uk_gemm_f32(const float *A, int lda, const float *B, int ldb,
                        float *C, int ldc, int M, int K, int N)
{
    int i, j, k;
    int i4 = 0, j16 = 0;
#if UK_HAVE_AVX
    i4 = M & ~3;
    j16 = N & ~15;
    for (i = 0; i < i4; i += 4)
        for (j = 0; j < j16; j += 16)
            uk_gemm4x16(A + (size_t)i * lda, lda, B + j, ldb,
                        C + (size_t)i * ldc + j, ldc, K);
    for (i = 0; i < i4; ++i)
        for (j = j16; j < N; ++j) {
            float acc = 0.0f;
            for (k = 0; k < K; ++k)
                acc += A[(size_t)i * lda + k] * B[(size_t)k * ldb + j];
            C[(size_t)i * ldc + j] = acc;
        }
#endif
    for (i = i4; i < M; ++i)
        for (j = 0; j < N; ++j) {
            float acc = 0.0f;
            for (k = 0; k < K; ++k)
                acc += A[(size_t)i * lda + k] * B[(size_t)k * ldb + j];
            C[(size_t)i * ldc + j] = acc;
        }
}

/* ------------------------------------------------------------------ */
/* Winograd F(2x2,3x3) over fp16 activations                           */
/* ------------------------------------------------------------------ */

/*
 * Scratch layouts (fp32):
 *   V[p][u][ci]  transformed input, u = 4*fu + tu
 *   M[p][u][co]  transform-domain products
 * The 16 GEMMs view them as strided P x Cin / P x Cout matrices.
 */

static void wino_input_tile_scalar(const uint16_t *x, float *vp,
                                   int F, int T, int Cin, int i, int j,
                                   int ci0, int ci1)
{
    float d[4][4];
    int r, c, ci;
    for (ci = ci0; ci < ci1; ++ci) {
        for (r = 0; r < 4; ++r) {
            int fi = 2 * i - 1 + r;
            for (c = 0; c < 4; ++c) {
                int tj = 2 * j - 1 + c;
                d[r][c] = (fi >= 0 && fi < F && tj >= 0 && tj < T)
                          ? uk_h2f(x[((size_t)fi * T + tj) * Cin + ci]) : 0.0f;
            }
        }
        {
            float z[4][4], v[4][4];
            for (c = 0; c < 4; ++c) {
                z[0][c] = d[0][c] - d[2][c];
                z[1][c] = d[1][c] + d[2][c];
                z[2][c] = d[2][c] - d[1][c];
                z[3][c] = d[1][c] - d[3][c];
            }
            for (r = 0; r < 4; ++r) {
                v[r][0] = z[r][0] - z[r][2];
                v[r][1] = z[r][1] + z[r][2];
                v[r][2] = z[r][2] - z[r][1];
                v[r][3] = z[r][1] - z[r][3];
            }
            for (r = 0; r < 4; ++r)
                for (c = 0; c < 4; ++c)
                    vp[((size_t)(4 * r + c)) * Cin + ci] = v[r][c];
        }
    }
}

static void wino_output_tile_scalar(const float *mp, const float *b, uint16_t *y,
                                    int T, int Cout, int i, int j, int relu,
                                    int co0, int co1)
{
    int u, co;
    for (co = co0; co < co1; ++co) {
        float m[16], t0[4], t1[4], out[2][2];
        int r, c;
        for (u = 0; u < 16; ++u)
            m[u] = mp[(size_t)u * Cout + co];
        for (c = 0; c < 4; ++c) {
            t0[c] = m[c] + m[4 + c] + m[8 + c];
            t1[c] = m[4 + c] - m[8 + c] - m[12 + c];
        }
        out[0][0] = t0[0] + t0[1] + t0[2];
        out[0][1] = t0[1] - t0[2] - t0[3];
        out[1][0] = t1[0] + t1[1] + t1[2];
        out[1][1] = t1[1] - t1[2] - t1[3];
        for (r = 0; r < 2; ++r)
            for (c = 0; c < 2; ++c) {
                float v = out[r][c] + b[co];
                if (relu && v < 0.0f) v = 0.0f;
                y[((size_t)(2 * i + r) * T + (2 * j + c)) * Cout + co] =
                    uk_f2h(uk_sat16(v));
            }
    }
}

int uk_winograd3x3_f16(const uint16_t *x, const float *wt, const float *b,
                       uint16_t *y, int F, int T, int Cin, int Cout, int relu)
{
    int F2, T2, P, i, j, u;
    float *V, *M;
    if (F <= 0 || T <= 0 || (F & 1) || (T & 1))
        return -1;
    F2 = F / 2; T2 = T / 2; P = F2 * T2;
    V = (float *)malloc((size_t)P * 16 * Cin * sizeof(float));
    M = (float *)malloc((size_t)P * 16 * Cout * sizeof(float));
    if (!V || !M) { free(V); free(M); return -1; }

    for (i = 0; i < F2; ++i)
        for (j = 0; j < T2; ++j) {
            float *vp = V + ((size_t)i * T2 + j) * 16 * Cin;
#if UK_HAVE_AVX && UK_HAVE_F16C
            {
                int ci, ci8 = Cin & ~7;
                int r, c;
                for (ci = 0; ci < ci8; ci += 8) {
                    __m256 d[4][4], z[4][4];
                    for (r = 0; r < 4; ++r) {
                        int fi = 2 * i - 1 + r;
                        for (c = 0; c < 4; ++c) {
                            int tj = 2 * j - 1 + c;
                            d[r][c] = (fi >= 0 && fi < F && tj >= 0 && tj < T)
                                ? uk_cvtph8(x + ((size_t)fi * T + tj) * Cin + ci)
                                : _mm256_setzero_ps();
                        }
                    }
                    for (c = 0; c < 4; ++c) {
                        z[0][c] = _mm256_sub_ps(d[0][c], d[2][c]);
                        z[1][c] = _mm256_add_ps(d[1][c], d[2][c]);
                        z[2][c] = _mm256_sub_ps(d[2][c], d[1][c]);
                        z[3][c] = _mm256_sub_ps(d[1][c], d[3][c]);
                    }
                    for (r = 0; r < 4; ++r) {
                        __m256 v0 = _mm256_sub_ps(z[r][0], z[r][2]);
                        __m256 v1 = _mm256_add_ps(z[r][1], z[r][2]);
                        __m256 v2 = _mm256_sub_ps(z[r][2], z[r][1]);
                        __m256 v3 = _mm256_sub_ps(z[r][1], z[r][3]);
                        _mm256_storeu_ps(vp + ((size_t)(4 * r + 0)) * Cin + ci, v0);
                        _mm256_storeu_ps(vp + ((size_t)(4 * r + 1)) * Cin + ci, v1);
                        _mm256_storeu_ps(vp + ((size_t)(4 * r + 2)) * Cin + ci, v2);
                        _mm256_storeu_ps(vp + ((size_t)(4 * r + 3)) * Cin + ci, v3);
                    }
                }
                if (ci8 < Cin)
                    wino_input_tile_scalar(x, vp, F, T, Cin, i, j, ci8, Cin);
            }
#else
            wino_input_tile_scalar(x, vp, F, T, Cin, i, j, 0, Cin);
#endif
        }

    for (u = 0; u < 16; ++u)
        uk_gemm_f32(V + (size_t)u * Cin, 16 * Cin,
                    wt + (size_t)u * Cin * Cout, Cout,
                    M + (size_t)u * Cout, 16 * Cout,
                    P, Cin, Cout);

    for (i = 0; i < F2; ++i)
        for (j = 0; j < T2; ++j) {
            const float *mp = M + ((size_t)i * T2 + j) * 16 * Cout;
#if UK_HAVE_AVX && UK_HAVE_F16C
            {
                int co, co8 = Cout & ~7;
                int r, c, uu;
                for (co = 0; co < co8; co += 8) {
                    __m256 m[16], t0[4], t1[4], o[2][2], bv;
                    for (uu = 0; uu < 16; ++uu)
                        m[uu] = _mm256_loadu_ps(mp + (size_t)uu * Cout + co);
                    for (c = 0; c < 4; ++c) {
                        t0[c] = _mm256_add_ps(_mm256_add_ps(m[c], m[4 + c]), m[8 + c]);
                        t1[c] = _mm256_sub_ps(_mm256_sub_ps(m[4 + c], m[8 + c]), m[12 + c]);
                    }
                    o[0][0] = _mm256_add_ps(_mm256_add_ps(t0[0], t0[1]), t0[2]);
                    o[0][1] = _mm256_sub_ps(_mm256_sub_ps(t0[1], t0[2]), t0[3]);
                    o[1][0] = _mm256_add_ps(_mm256_add_ps(t1[0], t1[1]), t1[2]);
                    o[1][1] = _mm256_sub_ps(_mm256_sub_ps(t1[1], t1[2]), t1[3]);
                    bv = _mm256_loadu_ps(b + co);
                    for (r = 0; r < 2; ++r)
                        for (c = 0; c < 2; ++c) {
                            __m256 v = _mm256_add_ps(o[r][c], bv);
                            if (relu)
                                v = _mm256_max_ps(v, _mm256_setzero_ps());
                            uk_storeph8(y + ((size_t)(2 * i + r) * T + (2 * j + c)) * Cout + co, v);
                        }
                }
                if (co8 < Cout)
                    wino_output_tile_scalar(mp, b, y, T, Cout, i, j, relu, co8, Cout);
            }
#else
            wino_output_tile_scalar(mp, b, y, T, Cout, i, j, relu, 0, Cout);
#endif
        }

    free(V);
    free(M);
    return 0;
}
