#pragma once

#include <cstdint>

// Dense/conv/pool compute kernels.  Each kernel exists in two forms: a plain
// serial runner under kernels::serial and an OpenMP runner at namespace scope.
// Both call the same per-slice core routine, and parallelism is only ever over
// independent output slices, so the two forms produce bit-identical results at
// any thread count.  This file is compiled with -ffp-contract=off so the
// rounding sequence does not depend on whether a loop was vectorized.
//
// Layout conventions: activations are NCHW, conv weights are (Co, Ci, K, K),
// dense weights are (O, I), all row-major float32.

namespace randrl::kernels {

struct ConvDims {
    int n;       // batch
    int ci;      // input channels
    int h, w;    // input spatial size
    int co;      // output channels
    int k;       // square kernel size
    int stride;
    int pad;

    int h_out() const { return (h + 2 * pad - k) / stride + 1; }
    int w_out() const { return (w + 2 * pad - k) / stride + 1; }
};

// y[n,co,ho,wo] = bias[co] + sum_{ci,kh,kw} w[co,ci,kh,kw] * x[n,ci,...].
// bias may be nullptr.
void conv2d_forward(const float* x, const float* w, const float* bias, float* y,
                    const ConvDims& d);

// gx[n,ci,h,w] += sum_{co,kh,kw} gy[n,co,...] * w[co,ci,kh,kw].
// Accumulates into gx; caller zeroes it when starting a fresh gradient.
void conv2d_backward_input(const float* gy, const float* w, float* gx,
                           const ConvDims& d);

// gw[co,ci,kh,kw] += sum_{n,ho,wo} gy * x;  gbias[co] += sum gy (if not null).
void conv2d_backward_weight(const float* x, const float* gy, float* gw,
                            float* gbias, const ConvDims& d);

// gbias[co] += sum_{n,ho,wo} gy[n,co,ho,wo]
void conv2d_backward_bias(const float* gy, float* gbias, const ConvDims& d);

// y[n,o] = bias[o] + sum_i x[n,i] * w[o,i].  bias may be nullptr.
void dense_forward(const float* x, const float* w, const float* bias, float* y,
                   int n, int in, int out);

// gx[n,i] += sum_o gy[n,o] * w[o,i]
void dense_backward_input(const float* gy, const float* w, float* gx,
                          int n, int in, int out);

// gw[o,i] += sum_n gy[n,o] * x[n,i];  gbias[o] += sum_n gy[n,o] (if not null)
void dense_backward_weight(const float* x, const float* gy, float* gw,
                           float* gbias, int n, int in, int out);

// 2x2 max pooling with stride 2.  Input spatial dims must be even.  argmax
// stores, per output element, which of the four window slots won (0..3, ties
// to the lowest index) for the backward scatter.
void maxpool2x2_forward(const float* x, float* y, uint8_t* argmax,
                        int n, int c, int h, int w);

void maxpool2x2_backward(const float* gy, const uint8_t* argmax, float* gx,
                         int n, int c, int h, int w);

namespace serial {
void conv2d_forward(const float* x, const float* w, const float* bias, float* y,
                    const ConvDims& d);
void conv2d_backward_input(const float* gy, const float* w, float* gx,
                           const ConvDims& d);
void conv2d_backward_weight(const float* x, const float* gy, float* gw,
                            float* gbias, const ConvDims& d);
void conv2d_backward_bias(const float* gy, float* gbias, const ConvDims& d);
void dense_forward(const float* x, const float* w, const float* bias, float* y,
                   int n, int in, int out);
void dense_backward_input(const float* gy, const float* w, float* gx,
                          int n, int in, int out);
void dense_backward_weight(const float* x, const float* gy, float* gw,
                           float* gbias, int n, int in, int out);
void maxpool2x2_forward(const float* x, float* y, uint8_t* argmax,
                        int n, int c, int h, int w);
void maxpool2x2_backward(const float* gy, const uint8_t* argmax, float* gx,
                         int n, int c, int h, int w);
}  // namespace serial

}  // namespace randrl::kernels
