#ifndef UK_CONVKERNELS_H
#define UK_CONVKERNELS_H

#include <stdint.h>

/*
 * Dense layer kernels for the canceler network.
 *
 * Layouts (row-major, contiguous):
 *   activations  x[F][T][C]
 *   conv weights w[KH][KW][Cin][Cout]
 *   biases       b[Cout]
 *
 * Convolution is cross-correlation with "same" zero padding:
 *   pad_f = (KH-1)/2 before, KH-1-pad_f after (likewise along T).
 *
 * fp16 tensors are IEEE half stored as uint16_t; arithmetic happens in fp32
 * on converted values and results saturate to +/-65504 before the final
 * rounding, so the half outputs can never be Inf/NaN for finite inputs.
 */

const char *uk_cpu_flags(void);

void uk_conv2d_f32(const float *x, const float *w, const float *b, float *y,
                   int F, int T, int Cin, int Cout, int KH, int KW, int relu);
void uk_conv2d_f64(const double *x, const double *w, const double *b, double *y,
                   int F, int T, int Cin, int Cout, int KH, int KW, int relu);

void uk_maxpool2x1_f32(const float *x, float *y, int F, int T, int C);
void uk_maxpool2x1_f64(const double *x, double *y, int F, int T, int C);
void uk_maxpool2x1_f16(const uint16_t *x, uint16_t *y, int F, int T, int C);

/* Transposed conv, kernel 2x1, stride 2 along F: y has shape [2F][T][Cout],
 * w is [2][1][Cin][Cout]; linear (no activation). */
void uk_convT2x1_f32(const float *x, const float *w, const float *b, float *y,
                     int F, int T, int Cin, int Cout);
void uk_convT2x1_f64(const double *x, const double *w, const double *b, double *y,
                     int F, int T, int Cin, int Cout);

/* fp16 activations with dequantized fp32 weights (generic direct form). */
void uk_conv2d_f16w32(const uint16_t *x, const float *w, const float *b,
                      uint16_t *y, int F, int T, int Cin, int Cout,
                      int KH, int KW, int relu);
void uk_convT2x1_f16w32(const uint16_t *x, const float *w, const float *b,
                        uint16_t *y, int F, int T, int Cin, int Cout);

/* Elementwise saturating half add: y = a + b. */
void uk_add_f16(const uint16_t *a, const uint16_t *b, uint16_t *y, int64_t n);

/* 3x3 conv over fp16 activations via the Winograd F(2x2,3x3) plan.
 * wt holds transformed weights [16][Cin][Cout] with u = 4*fu + tu.
 * Requires F and T even; returns 0 on success, -1 otherwise. */
int uk_winograd3x3_f16(const uint16_t *x, const float *wt, const float *b,
                       uint16_t *y, int F, int T, int Cin, int Cout, int relu);

#endif /* UK_CONVKERNELS_H */
