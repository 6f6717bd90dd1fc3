#pragma once

// Independent reference implementations used only by tests.  Everything here
// is written in the most obvious guarded-loop style with float64
// accumulation, deliberately sharing no code with src/kernels.cpp, so the
// two can check each other.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "randrl/tensor.hpp"

namespace oracle {

using randrl::Tensor;

// y[n,co,ho,wo] = bias[co] + sum w*x, float64 accumulation.
inline Tensor conv2d(const Tensor& x, const Tensor& w, const float* bias,
                     int stride, int pad) {
    const int64_t N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int64_t Co = w.dim(0), K = w.dim(2);
    const int64_t Ho = (H + 2 * pad - K) / stride + 1;
    const int64_t Wo = (W + 2 * pad - K) / stride + 1;
    Tensor y({N, Co, Ho, Wo});
    for (int64_t n = 0; n < N; ++n)
        for (int64_t co = 0; co < Co; ++co)
            for (int64_t ho = 0; ho < Ho; ++ho)
                for (int64_t wo = 0; wo < Wo; ++wo) {
                    double acc = bias ? bias[co] : 0.0;
                    for (int64_t ci = 0; ci < Ci; ++ci)
                        for (int64_t kh = 0; kh < K; ++kh)
                            for (int64_t kw = 0; kw < K; ++kw) {
                                const int64_t hx = ho * stride + kh - pad;
                                const int64_t wx = wo * stride + kw - pad;
                                if (hx < 0 || hx >= H || wx < 0 || wx >= W) continue;
                                acc += static_cast<double>(w.at4(co, ci, kh, kw)) *
                                       static_cast<double>(x.at4(n, ci, hx, wx));
                            }
                    y.at4(n, co, ho, wo) = static_cast<float>(acc);
                }
    return y;
}

inline Tensor dense(const Tensor& x, const Tensor& w, const float* bias) {
    const int64_t N = x.dim(0), I = x.dim(1), O = w.dim(0);
    Tensor y({N, O});
    for (int64_t n = 0; n < N; ++n)
        for (int64_t o = 0; o < O; ++o) {
            double acc = bias ? bias[o] : 0.0;
            for (int64_t i = 0; i < I; ++i)
                acc += static_cast<double>(x.at2(n, i)) * static_cast<double>(w.at2(o, i));
            y.at2(n, o) = static_cast<float>(acc);
        }
    return y;
}

inline Tensor maxpool2x2(const Tensor& x) {
    const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    Tensor y({N, C, H / 2, W / 2});
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c)
            for (int64_t i = 0; i < H / 2; ++i)
                for (int64_t j = 0; j < W / 2; ++j) {
                    float m = x.at4(n, c, 2 * i, 2 * j);
                    m = std::max(m, x.at4(n, c, 2 * i, 2 * j + 1));
                    m = std::max(m, x.at4(n, c, 2 * i + 1, 2 * j));
                    m = std::max(m, x.at4(n, c, 2 * i + 1, 2 * j + 1));
                    y.at4(n, c, i, j) = m;
                }
    return y;
}

// Central finite difference of a scalar-valued function at x[i], step h.
inline double central_diff(const std::function<double(const std::vector<float>&)>& f,
                           std::vector<float> x, size_t i, double h) {
    const float orig = x[i];
    x[i] = static_cast<float>(orig + h);
    const double up = f(x);
    x[i] = static_cast<float>(orig - h);
    const double down = f(x);
    return (up - down) / (2.0 * h);
}

// Symmetric relative error with an absolute floor so near-zero gradients do
// not blow up the ratio.
inline double rel_err(double a, double b) {
    const double denom = std::max(1e-3, std::abs(a) + std::abs(b));
    return std::abs(a - b) / denom;
}

// GAE by literal recursion on the defining sum of discounted TD residuals,
// independent of the production backward-scan implementation.
inline void gae_reference(const std::vector<float>& rewards,
                          const std::vector<float>& values,
                          const std::vector<uint8_t>& dones, float bootstrap,
                          double gamma, double lambda,
                          std::vector<float>& adv_out) {
    const size_t T = rewards.size();
    adv_out.assign(T, 0.0f);
    for (size_t t = 0; t < T; ++t) {
        double adv = 0.0, coef = 1.0;
        for (size_t l = t; l < T; ++l) {
            const double vnext = (l + 1 < T) ? values[l + 1] : bootstrap;
            const double mask = dones[l] ? 0.0 : 1.0;
            const double delta = rewards[l] + gamma * vnext * mask - values[l];
            adv += coef * delta;
            if (dones[l]) break;
            coef *= gamma * lambda;
        }
        adv_out[t] = static_cast<float>(adv);
    }
}

}  // namespace oracle
