#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "randrl/rng.hpp"
#include "randrl/tensor.hpp"

namespace randrl::nn {

// A trainable tensor with its persistent gradient buffer.  Tapes accumulate
// into grad; call zero_grad() (or zero_grads over a set) before each
// optimization step.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    Param() = default;
    Param(std::string n, Tensor v)
        : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

    void zero_grad() { grad.fill(0.0f); }
};

// Per-parameter Adam accumulators.
struct AdamState {
    Tensor m;
    Tensor v;

    AdamState() = default;
    explicit AdamState(const std::vector<int64_t>& shape) : m(shape), v(shape) {}
};

struct AdamConfig {
    float lr = 5e-4f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

// One Adam update.  t is the 1-based step count shared by all parameters of
// the model (used for bias correction).
void adam_step(Param& p, AdamState& s, const AdamConfig& cfg, int64_t t);

// He-normal fill: std = sqrt(2 / fan_in).  Used for all relu-facing weights.
void init_he_normal(Tensor& w, int64_t fan_in, Rng& rng);

// Xavier-normal fill: std = sqrt(2 / (fan_in + fan_out)).  Used for
// tanh-facing weights.
void init_xavier_normal(Tensor& w, int64_t fan_in, int64_t fan_out, Rng& rng);

// Forward-only helpers for code that works on plain tensors (metrics,
// probability post-processing).  Row-wise over a (N, C) tensor.
void softmax_rows_inplace(Tensor& t);
void relu_inplace(Tensor& t);

}  // namespace randrl::nn
