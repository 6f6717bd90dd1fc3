#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "randrl/error.hpp"
#include "randrl/nn.hpp"
#include "randrl/rng.hpp"

using randrl::Rng;
using randrl::Tensor;
namespace nn = randrl::nn;

TEST_CASE("adam matches a scalar reference implementation") {
    // independent double-precision reference evolved alongside
    nn::Param p("w", Tensor::full({1}, 1.0f));
    nn::AdamState s(p.value.shape());
    nn::AdamConfig cfg;
    cfg.lr = 0.1f;
    double w = 1.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 5; ++t) {
        const double g = 0.5 * t;  // arbitrary deterministic gradient schedule
        p.grad[0] = static_cast<float>(g);
        nn::adam_step(p, s, cfg, t);
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        const double mhat = m / (1.0 - std::pow(0.9, t));
        const double vhat = v / (1.0 - std::pow(0.999, t));
        w -= 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
        CHECK(p.value[0] == doctest::Approx(w).epsilon(1e-4));
    }
}

TEST_CASE("adam bias correction makes the first step size ~lr") {
    nn::Param p("w", Tensor::full({1}, 0.0f));
    nn::AdamState s(p.value.shape());
    nn::AdamConfig cfg;
    p.grad[0] = 3.0f;  // any gradient: first step is lr * g/|g|
    nn::adam_step(p, s, cfg, 1);
    CHECK(p.value[0] == doctest::Approx(-cfg.lr).epsilon(1e-3));
}

TEST_CASE("adam validates state shape and step count") {
    nn::Param p("w", Tensor::full({2}, 0.0f));
    nn::AdamState bad(std::vector<int64_t>{3});
    nn::AdamConfig cfg;
    CHECK_THROWS_AS(nn::adam_step(p, bad, cfg, 1), randrl::ValueError);
    nn::AdamState good(p.value.shape());
    CHECK_THROWS_AS(nn::adam_step(p, good, cfg, 0), randrl::ValueError);
}

TEST_CASE("he init has the requested standard deviation") {
    Rng rng(31);
    Tensor w({64, 50});
    nn::init_he_normal(w, 50, rng);
    double sum = 0.0, sumsq = 0.0;
    for (int64_t i = 0; i < w.numel(); ++i) {
        sum += w[i];
        sumsq += static_cast<double>(w[i]) * w[i];
    }
    const double n = static_cast<double>(w.numel());
    const double mean = sum / n;
    const double std = std::sqrt(sumsq / n - mean * mean);
    CHECK(std == doctest::Approx(std::sqrt(2.0 / 50.0)).epsilon(0.05));
    CHECK(mean == doctest::Approx(0.0).scale(0.01).epsilon(1));
}

TEST_CASE("softmax_rows_inplace normalizes each row") {
    Tensor t({2, 3});
    t.at2(0, 0) = 1000.0f;  // overflow-prone without the max shift
    t.at2(0, 1) = 1000.0f;
    t.at2(0, 2) = 999.0f;
    t.at2(1, 0) = -5.0f;
    t.at2(1, 1) = 0.0f;
    t.at2(1, 2) = 5.0f;
    nn::softmax_rows_inplace(t);
    for (int r = 0; r < 2; ++r) {
        double s = 0.0;
        for (int c = 0; c < 3; ++c) {
            CHECK(t.at2(r, c) >= 0.0f);
            s += t.at2(r, c);
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-5));
    }
    CHECK(t.at2(0, 0) == t.at2(0, 1));
}

TEST_CASE("relu_inplace zeroes only negatives") {
    Tensor t({3});
    t[0] = -1.0f; t[1] = 0.0f; t[2] = 2.0f;
    nn::relu_inplace(t);
    CHECK(t[0] == 0.0f);
    CHECK(t[1] == 0.0f);
    CHECK(t[2] == 2.0f);
}
