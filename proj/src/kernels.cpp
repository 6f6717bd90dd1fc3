#include "randrl/kernels.hpp"

#include <algorithm>
#include <cstddef>
#include <vector>

#include "randrl/error.hpp"

// Implementation notes.
//
// Every kernel is written as a single `impl` function shared by the serial
// and the OpenMP runner; the runner only flips the `if` clause of the omp
// pragma.  Because both runners execute the same compiled loop body, and
// because threads only ever split work across independent output slices,
// serial and parallel results are identical to the last bit at any thread
// count.  Within one output element the accumulation order is a fixed
// lexicographic walk of the reduction axes, so results are also stable from
// run to run.
//
// Reductions that sum many terms into one scalar (weight gradients, bias
// gradients) first accumulate per-column partials in float, then collapse
// the partials left-to-right in double.  That keeps the inner loops
// vectorizable without reassociation while bounding the rounding error of
// long sums.

namespace randrl::kernels {

namespace {

void validate(const ConvDims& d) {
    if (d.n <= 0 || d.ci <= 0 || d.h <= 0 || d.w <= 0 || d.co <= 0)
        throw ValueError("conv2d: non-positive dimension");
    if (d.k <= 0 || d.stride <= 0 || d.pad < 0)
        throw ValueError("conv2d: bad kernel/stride/pad");
    if (d.h_out() <= 0 || d.w_out() <= 0)
        throw ValueError("conv2d: empty output");
}

// ---------------------------------------------------------------- conv fwd

__attribute__((noinline)) void conv_fwd_impl(const float* x, const float* w,
                                             const float* bias, float* y,
                                             const ConvDims& d, bool par) {
    const int Ho = d.h_out(), Wo = d.w_out();
    const int K = d.k, P = d.pad, H = d.h, W = d.w;
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static) if (par)
#else
    (void)par;
#endif
    for (int n = 0; n < d.n; ++n) {
        for (int co = 0; co < d.co; ++co) {
            float* yp = y + ((size_t)n * d.co + co) * Ho * Wo;
            const float b = bias ? bias[co] : 0.0f;
            for (int i = 0; i < Ho * Wo; ++i) yp[i] = b;
            const float* wc = w + ((size_t)co * d.ci) * K * K;
            if (d.stride == 1) {
                for (int ci = 0; ci < d.ci; ++ci) {
                    const float* xp = x + ((size_t)n * d.ci + ci) * H * W;
                    const float* wp = wc + (size_t)ci * K * K;
                    for (int kh = 0; kh < K; ++kh) {
                        const int ho_lo = std::max(0, P - kh);
                        const int ho_hi = std::min(Ho, H + P - kh);
                        for (int kw = 0; kw < K; ++kw) {
                            const float wv = wp[kh * K + kw];
                            const int wo_lo = std::max(0, P - kw);
                            const int wo_hi = std::min(Wo, W + P - kw);
                            for (int ho = ho_lo; ho < ho_hi; ++ho) {
                                const float* xrow = xp + (ho + kh - P) * W + (kw - P);
                                float* yrow = yp + ho * Wo;
                                for (int wo = wo_lo; wo < wo_hi; ++wo)
                                    yrow[wo] += wv * xrow[wo];
                            }
                        }
                    }
                }
            } else {
                for (int ci = 0; ci < d.ci; ++ci) {
                    const float* xp = x + ((size_t)n * d.ci + ci) * H * W;
                    const float* wp = wc + (size_t)ci * K * K;
                    for (int kh = 0; kh < K; ++kh) {
                        for (int kw = 0; kw < K; ++kw) {
                            const float wv = wp[kh * K + kw];
                            for (int ho = 0; ho < Ho; ++ho) {
                                const int hx = ho * d.stride + kh - P;
                                if (hx < 0 || hx >= H) continue;
                                for (int wo = 0; wo < Wo; ++wo) {
                                    const int wx = wo * d.stride + kw - P;
                                    if (wx < 0 || wx >= W) continue;
                                    yp[ho * Wo + wo] += wv * xp[hx * W + wx];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

// ----------------------------------------------------------- conv bwd input

__attribute__((noinline)) void conv_bwdx_impl(const float* gy, const float* w,
                                              float* gx, const ConvDims& d,
                                              bool par) {
    const int Ho = d.h_out(), Wo = d.w_out();
    const int K = d.k, P = d.pad, H = d.h, W = d.w;
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static) if (par)
#else
    (void)par;
#endif
    for (int n = 0; n < d.n; ++n) {
        for (int ci = 0; ci < d.ci; ++ci) {
            float* gxp = gx + ((size_t)n * d.ci + ci) * H * W;
            if (d.stride == 1) {
                for (int co = 0; co < d.co; ++co) {
                    const float* gyp = gy + ((size_t)n * d.co + co) * Ho * Wo;
                    const float* wp = w + ((size_t)co * d.ci + ci) * K * K;
                    for (int kh = 0; kh < K; ++kh) {
                        const int h_lo = std::max(0, kh - P);
                        const int h_hi = std::min(H, Ho + kh - P);
                        for (int kw = 0; kw < K; ++kw) {
                            const float wv = wp[kh * K + kw];
                            const int w_lo = std::max(0, kw - P);
                            const int w_hi = std::min(W, Wo + kw - P);
                            for (int h = h_lo; h < h_hi; ++h) {
                                float* gxrow = gxp + h * W;
                                const float* gyrow = gyp + (h + P - kh) * Wo + (P - kw);
                                for (int ww = w_lo; ww < w_hi; ++ww)
                                    gxrow[ww] += wv * gyrow[ww];
                            }
                        }
                    }
                }
            } else {
                for (int co = 0; co < d.co; ++co) {
                    const float* gyp = gy + ((size_t)n * d.co + co) * Ho * Wo;
                    const float* wp = w + ((size_t)co * d.ci + ci) * K * K;
                    for (int kh = 0; kh < K; ++kh) {
                        for (int kw = 0; kw < K; ++kw) {
                            const float wv = wp[kh * K + kw];
                            for (int h = 0; h < H; ++h) {
                                const int hr = h + P - kh;
                                if (hr % d.stride != 0) continue;
                                const int ho = hr / d.stride;
                                if (ho < 0 || ho >= Ho) continue;
                                for (int ww = 0; ww < W; ++ww) {
                                    const int wr = ww + P - kw;
                                    if (wr % d.stride != 0) continue;
                                    const int wo = wr / d.stride;
                                    if (wo < 0 || wo >= Wo) continue;
                                    gxp[h * W + ww] += wv * gyp[ho * Wo + wo];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------- conv bwd weight

__attribute__((noinline)) void conv_bwdw_impl(const float* x, const float* gy,
                                              float* gw, const ConvDims& d,
                                              bool par) {
    const int Ho = d.h_out(), Wo = d.w_out();
    const int K = d.k, P = d.pad, H = d.h, W = d.w;
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static) if (par)
#else
    (void)par;
#endif
    for (int co = 0; co < d.co; ++co) {
        for (int ci = 0; ci < d.ci; ++ci) {
            std::vector<float> acc((size_t)Wo);
            float* gwp = gw + ((size_t)co * d.ci + ci) * K * K;
            for (int kh = 0; kh < K; ++kh) {
                for (int kw = 0; kw < K; ++kw) {
                    std::fill(acc.begin(), acc.end(), 0.0f);
                    if (d.stride == 1) {
                        const int ho_lo = std::max(0, P - kh);
                        const int ho_hi = std::min(Ho, H + P - kh);
                        const int wo_lo = std::max(0, P - kw);
                        const int wo_hi = std::min(Wo, W + P - kw);
                        for (int n = 0; n < d.n; ++n) {
                            const float* xp = x + ((size_t)n * d.ci + ci) * H * W;
                            const float* gyp = gy + ((size_t)n * d.co + co) * Ho * Wo;
                            for (int ho = ho_lo; ho < ho_hi; ++ho) {
                                const float* xrow = xp + (ho + kh - P) * W + (kw - P);
                                const float* gyrow = gyp + ho * Wo;
                                for (int wo = wo_lo; wo < wo_hi; ++wo)
                                    acc[wo] += gyrow[wo] * xrow[wo];
                            }
                        }
                    } else {
                        for (int n = 0; n < d.n; ++n) {
                            const float* xp = x + ((size_t)n * d.ci + ci) * H * W;
                            const float* gyp = gy + ((size_t)n * d.co + co) * Ho * Wo;
                            for (int ho = 0; ho < Ho; ++ho) {
                                const int hx = ho * d.stride + kh - P;
                                if (hx < 0 || hx >= H) continue;
                                for (int wo = 0; wo < Wo; ++wo) {
                                    const int wx = wo * d.stride + kw - P;
                                    if (wx < 0 || wx >= W) continue;
                                    acc[wo] += gyp[ho * Wo + wo] * xp[hx * W + wx];
                                }
                            }
                        }
                    }
                    double s = 0.0;
                    for (int wo = 0; wo < Wo; ++wo) s += acc[wo];
                    gwp[kh * K + kw] += static_cast<float>(s);
                }
            }
        }
    }
}

__attribute__((noinline)) void conv_bwdb_impl(const float* gy, float* gbias,
                                              const ConvDims& d, bool par) {
    const int Ho = d.h_out(), Wo = d.w_out();
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (par)
#else
    (void)par;
#endif
    for (int co = 0; co < d.co; ++co) {
        std::vector<float> acc((size_t)Wo, 0.0f);
        for (int n = 0; n < d.n; ++n) {
            const float* gyp = gy + ((size_t)n * d.co + co) * Ho * Wo;
            for (int ho = 0; ho < Ho; ++ho)
                for (int wo = 0; wo < Wo; ++wo) acc[wo] += gyp[ho * Wo + wo];
        }
        double s = 0.0;
        for (int wo = 0; wo < Wo; ++wo) s += acc[wo];
        gbias[co] += static_cast<float>(s);
    }
}

// ------------------------------------------------------------------- dense

__attribute__((noinline)) void dense_fwd_impl(const float* x, const float* w,
                                              const float* bias, float* y,
                                              int n, int in, int out, bool par) {
    // Transposed weight copy so the inner loop runs over contiguous outputs;
    // each output element still sums its terms in ascending input order.
    std::vector<float> wt((size_t)in * out);
    for (int o = 0; o < out; ++o)
        for (int i = 0; i < in; ++i) wt[(size_t)i * out + o] = w[(size_t)o * in + i];
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (par)
#else
    (void)par;
#endif
    for (int r = 0; r < n; ++r) {
        float* yrow = y + (size_t)r * out;
        if (bias)
            for (int o = 0; o < out; ++o) yrow[o] = bias[o];
        else
            for (int o = 0; o < out; ++o) yrow[o] = 0.0f;
        const float* xrow = x + (size_t)r * in;
        for (int i = 0; i < in; ++i) {
            const float xv = xrow[i];
            // Adding a zero product never changes an accumulator bit, and
            // post-relu inputs are mostly zeros, so skipping is safe and
            // saves real time.
            if (xv == 0.0f) continue;
            const float* wtrow = wt.data() + (size_t)i * out;
            for (int o = 0; o < out; ++o) yrow[o] += xv * wtrow[o];
        }
    }
}

__attribute__((noinline)) void dense_bwdx_impl(const float* gy, const float* w,
                                               float* gx, int n, int in, int out,
                                               bool par) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (par)
#else
    (void)par;
#endif
    for (int r = 0; r < n; ++r) {
        float* gxrow = gx + (size_t)r * in;
        const float* gyrow = gy + (size_t)r * out;
        for (int o = 0; o < out; ++o) {
            const float gv = gyrow[o];
            if (gv == 0.0f) continue;
            const float* wrow = w + (size_t)o * in;
            for (int i = 0; i < in; ++i) gxrow[i] += gv * wrow[i];
        }
    }
}

__attribute__((noinline)) void dense_bwdw_impl(const float* x, const float* gy,
                                               float* gw, float* gbias, int n,
                                               int in, int out, bool par) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (par)
#else
    (void)par;
#endif
    for (int o = 0; o < out; ++o) {
        float* gwrow = gw + (size_t)o * in;
        double bacc = 0.0;
        for (int r = 0; r < n; ++r) {
            const float gv = gy[(size_t)r * out + o];
            bacc += gv;
            if (gv == 0.0f) continue;
            const float* xrow = x + (size_t)r * in;
            for (int i = 0; i < in; ++i) gwrow[i] += gv * xrow[i];
        }
        if (gbias) gbias[o] += static_cast<float>(bacc);
    }
}

// ----------------------------------------------------------------- maxpool

__attribute__((noinline)) void pool_fwd_impl(const float* x, float* y,
                                             uint8_t* argmax, int n, int c,
                                             int h, int w, bool par) {
    const int ho = h / 2, wo = w / 2;
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static) if (par)
#else
    (void)par;
#endif
    for (int b = 0; b < n; ++b) {
        for (int ch = 0; ch < c; ++ch) {
            const float* xp = x + ((size_t)b * c + ch) * h * w;
            float* yp = y + ((size_t)b * c + ch) * ho * wo;
            uint8_t* ap = argmax + ((size_t)b * c + ch) * ho * wo;
            for (int i = 0; i < ho; ++i) {
                for (int j = 0; j < wo; ++j) {
                    const float* win = xp + (2 * i) * w + 2 * j;
                    float best = win[0];
                    uint8_t bi = 0;
                    // slots scan in row-major window order; ties keep the
                    // earliest slot
                    const float cands[3] = {win[1], win[w], win[w + 1]};
                    for (uint8_t s = 0; s < 3; ++s) {
                        if (cands[s] > best) {
                            best = cands[s];
                            bi = static_cast<uint8_t>(s + 1);
                        }
                    }
                    yp[i * wo + j] = best;
                    ap[i * wo + j] = bi;
                }
            }
        }
    }
}

__attribute__((noinline)) void pool_bwd_impl(const float* gy,
                                             const uint8_t* argmax, float* gx,
                                             int n, int c, int h, int w,
                                             bool par) {
    const int ho = h / 2, wo = w / 2;
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static) if (par)
#else
    (void)par;
#endif
    for (int b = 0; b < n; ++b) {
        for (int ch = 0; ch < c; ++ch) {
            const float* gyp = gy + ((size_t)b * c + ch) * ho * wo;
            const uint8_t* ap = argmax + ((size_t)b * c + ch) * ho * wo;
            float* gxp = gx + ((size_t)b * c + ch) * h * w;
            for (int i = 0; i < ho; ++i) {
                for (int j = 0; j < wo; ++j) {
                    const uint8_t s = ap[i * wo + j];
                    const int di = s / 2, dj = s % 2;
                    gxp[(2 * i + di) * w + (2 * j + dj)] += gyp[i * wo + j];
                }
            }
        }
    }
}

void check_pool(int n, int c, int h, int w) {
    if (n <= 0 || c <= 0 || h <= 0 || w <= 0)
        throw ValueError("maxpool2x2: non-positive dimension");
    if (h % 2 != 0 || w % 2 != 0)
        throw ValueError("maxpool2x2: spatial dims must be even");
}

void check_dense(int n, int in, int out) {
    if (n <= 0 || in <= 0 || out <= 0)
        throw ValueError("dense: non-positive dimension");
}

}  // namespace

void conv2d_forward(const float* x, const float* w, const float* bias, float* y,
                    const ConvDims& d) {
    validate(d);
    conv_fwd_impl(x, w, bias, y, d, true);
}

void conv2d_backward_input(const float* gy, const float* w, float* gx,
                           const ConvDims& d) {
    validate(d);
    conv_bwdx_impl(gy, w, gx, d, true);
}

void conv2d_backward_weight(const float* x, const float* gy, float* gw,
                            float* gbias, const ConvDims& d) {
    validate(d);
    conv_bwdw_impl(x, gy, gw, d, true);
    if (gbias) conv_bwdb_impl(gy, gbias, d, true);
}

void conv2d_backward_bias(const float* gy, float* gbias, const ConvDims& d) {
    validate(d);
    conv_bwdb_impl(gy, gbias, d, true);
}

void dense_forward(const float* x, const float* w, const float* bias, float* y,
                   int n, int in, int out) {
    check_dense(n, in, out);
    dense_fwd_impl(x, w, bias, y, n, in, out, true);
}

void dense_backward_input(const float* gy, const float* w, float* gx,
                          int n, int in, int out) {
    check_dense(n, in, out);
    dense_bwdx_impl(gy, w, gx, n, in, out, true);
}

void dense_backward_weight(const float* x, const float* gy, float* gw,
                           float* gbias, int n, int in, int out) {
    check_dense(n, in, out);
    dense_bwdw_impl(x, gy, gw, gbias, n, in, out, true);
}

void maxpool2x2_forward(const float* x, float* y, uint8_t* argmax,
                        int n, int c, int h, int w) {
    check_pool(n, c, h, w);
    pool_fwd_impl(x, y, argmax, n, c, h, w, true);
}

void maxpool2x2_backward(const float* gy, const uint8_t* argmax, float* gx,
                         int n, int c, int h, int w) {
    check_pool(n, c, h, w);
    pool_bwd_impl(gy, argmax, gx, n, c, h, w, true);
}

namespace serial {

void conv2d_forward(const float* x, const float* w, const float* bias, float* y,
                    const ConvDims& d) {
    validate(d);
    conv_fwd_impl(x, w, bias, y, d, false);
}

void conv2d_backward_input(const float* gy, const float* w, float* gx,
                           const ConvDims& d) {
    validate(d);
    conv_bwdx_impl(gy, w, gx, d, false);
}

void conv2d_backward_weight(const float* x, const float* gy, float* gw,
                            float* gbias, const ConvDims& d) {
    validate(d);
    conv_bwdw_impl(x, gy, gw, d, false);
    if (gbias) conv_bwdb_impl(gy, gbias, d, false);
}

void conv2d_backward_bias(const float* gy, float* gbias, const ConvDims& d) {
    validate(d);
    conv_bwdb_impl(gy, gbias, d, false);
}

void dense_forward(const float* x, const float* w, const float* bias, float* y,
                   int n, int in, int out) {
    check_dense(n, in, out);
    dense_fwd_impl(x, w, bias, y, n, in, out, false);
}

void dense_backward_input(const float* gy, const float* w, float* gx,
                          int n, int in, int out) {
    check_dense(n, in, out);
    dense_bwdx_impl(gy, w, gx, n, in, out, false);
}

void dense_backward_weight(const float* x, const float* gy, float* gw,
                           float* gbias, int n, int in, int out) {
    check_dense(n, in, out);
    dense_bwdw_impl(x, gy, gw, gbias, n, in, out, false);
}

void maxpool2x2_forward(const float* x, float* y, uint8_t* argmax,
                        int n, int c, int h, int w) {
    check_pool(n, c, h, w);
    pool_fwd_impl(x, y, argmax, n, c, h, w, false);
}

void maxpool2x2_backward(const float* gy, const uint8_t* argmax, float* gx,
                         int n, int c, int h, int w) {
    check_pool(n, c, h, w);
    pool_bwd_impl(gy, argmax, gx, n, c, h, w, false);
}

}  // namespace serial

}  // namespace randrl::kernels
