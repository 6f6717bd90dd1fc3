#include <cmath>

#include "doctest.h"
#include "randrl/error.hpp"
#include "randrl/tensor.hpp"

using randrl::Tensor;

TEST_CASE("construction zero-fills and tracks shape") {
    Tensor t({2, 3, 4});
    CHECK(t.numel() == 24);
    CHECK(t.rank() == 3);
    CHECK(t.dim(1) == 3);
    for (int64_t i = 0; i < t.numel(); ++i) CHECK(t[i] == 0.0f);
}

TEST_CASE("negative dimension is rejected") {
    CHECK_THROWS_AS(Tensor({2, -1}), randrl::ValueError);
}

TEST_CASE("at4 maps NCHW indices to the flat layout") {
    Tensor t({2, 3, 4, 5});
    t.at4(1, 2, 3, 4) = 7.0f;
    CHECK(t[((1 * 3 + 2) * 4 + 3) * 5 + 4] == 7.0f);
}

TEST_CASE("at2 maps row-major indices") {
    Tensor t({3, 4});
    t.at2(2, 1) = -1.5f;
    CHECK(t[2 * 4 + 1] == -1.5f);
}

TEST_CASE("reshaped preserves data and checks element count") {
    Tensor t({2, 6});
    for (int64_t i = 0; i < 12; ++i) t[i] = static_cast<float>(i);
    Tensor r = t.reshaped({3, 4});
    CHECK(r.dim(0) == 3);
    for (int64_t i = 0; i < 12; ++i) CHECK(r[i] == static_cast<float>(i));
    CHECK_THROWS_AS(t.reshaped({5, 5}), randrl::ValueError);
}

TEST_CASE("fill and full set every element") {
    Tensor t = Tensor::full({7}, 2.5f);
    for (int64_t i = 0; i < 7; ++i) CHECK(t[i] == 2.5f);
    t.fill(-1.0f);
    for (int64_t i = 0; i < 7; ++i) CHECK(t[i] == -1.0f);
}

TEST_CASE("all_finite detects NaN and infinity") {
    Tensor t({3});
    CHECK(t.all_finite());
    t[1] = std::numeric_limits<float>::infinity();
    CHECK_FALSE(t.all_finite());
    t[1] = std::nanf("");
    CHECK_FALSE(t.all_finite());
}

TEST_CASE("shape_str formats dimensions") {
    CHECK(Tensor({2, 3}).shape_str() == "(2, 3)");
    CHECK(Tensor(std::vector<int64_t>{}).shape_str() == "()");
}
