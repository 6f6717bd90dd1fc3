#include "randrl/nn.hpp"

#include <cmath>

#include "randrl/error.hpp"

namespace randrl::nn {

void adam_step(Param& p, AdamState& s, const AdamConfig& cfg, int64_t t) {
    if (!p.value.same_shape(s.m))
        throw ValueError("adam_step: state shape mismatch for " + p.name);
    if (t < 1) throw ValueError("adam_step: t must be >= 1");
    const double bc1 = 1.0 - std::pow(static_cast<double>(cfg.beta1), static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(static_cast<double>(cfg.beta2), static_cast<double>(t));
    float* w = p.value.data();
    const float* g = p.grad.data();
    float* m = s.m.data();
    float* v = s.v.data();
    const int64_t n = p.value.numel();
    for (int64_t i = 0; i < n; ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0f - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0f - cfg.beta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        w[i] -= static_cast<float>(cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
}

void init_he_normal(Tensor& w, int64_t fan_in, Rng& rng) {
    if (fan_in <= 0) throw ValueError("init_he_normal: fan_in must be > 0");
    const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
    float* d = w.data();
    for (int64_t i = 0; i < w.numel(); ++i)
        d[i] = static_cast<float>(std * rng.normal());
}

void init_xavier_normal(Tensor& w, int64_t fan_in, int64_t fan_out, Rng& rng) {
    if (fan_in <= 0 || fan_out <= 0)
        throw ValueError("init_xavier_normal: fans must be > 0");
    const double std = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
    float* d = w.data();
    for (int64_t i = 0; i < w.numel(); ++i)
        d[i] = static_cast<float>(std * rng.normal());
}

void softmax_rows_inplace(Tensor& t) {
    if (t.rank() != 2) throw ValueError("softmax_rows: expected rank-2 tensor");
    const int64_t rows = t.dim(0), cols = t.dim(1);
    for (int64_t r = 0; r < rows; ++r) {
        float* row = t.data() + r * cols;
        float mx = row[0];
        for (int64_t c = 1; c < cols; ++c) mx = std::max(mx, row[c]);
        double sum = 0.0;
        for (int64_t c = 0; c < cols; ++c) {
            row[c] = std::exp(row[c] - mx);
            sum += row[c];
        }
        const float inv = static_cast<float>(1.0 / sum);
        for (int64_t c = 0; c < cols; ++c) row[c] *= inv;
    }
}

void relu_inplace(Tensor& t) {
    float* d = t.data();
    for (int64_t i = 0; i < t.numel(); ++i)
        if (d[i] < 0.0f) d[i] = 0.0f;
}

}  // namespace randrl::nn
