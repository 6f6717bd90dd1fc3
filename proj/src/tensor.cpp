#include "randrl/tensor.hpp"

#include <cmath>
#include <sstream>

#include "randrl/error.hpp"

namespace randrl {

static int64_t checked_numel(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
        if (d < 0) throw ValueError("Tensor: negative dimension");
        n *= d;
    }
    return n;
}

Tensor::Tensor(std::vector<int64_t> shape)
    : shape_(std::move(shape)), numel_(checked_numel(shape_)),
      data_(static_cast<size_t>(numel_), 0.0f) {}

Tensor::Tensor(std::initializer_list<int64_t> shape)
    : Tensor(std::vector<int64_t>(shape)) {}

Tensor Tensor::full(std::vector<int64_t> shape, float v) {
    Tensor t(std::move(shape));
    t.fill(v);
    return t;
}

int64_t Tensor::dim(size_t i) const {
    if (i >= shape_.size()) throw ValueError("Tensor::dim: axis out of range");
    return shape_[i];
}

float& Tensor::at4(int64_t n, int64_t c, int64_t h, int64_t w) {
    return data_[static_cast<size_t>(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
}

float Tensor::at4(int64_t n, int64_t c, int64_t h, int64_t w) const {
    return data_[static_cast<size_t>(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
}

float& Tensor::at2(int64_t r, int64_t c) {
    return data_[static_cast<size_t>(r * shape_[1] + c)];
}

float Tensor::at2(int64_t r, int64_t c) const {
    return data_[static_cast<size_t>(r * shape_[1] + c)];
}

void Tensor::fill(float v) {
    for (auto& x : data_) x = v;
}

Tensor Tensor::reshaped(std::vector<int64_t> new_shape) const {
    Tensor out(std::move(new_shape));
    if (out.numel() != numel_)
        throw ValueError("Tensor::reshaped: element count mismatch (" + shape_str() +
                         " -> " + out.shape_str() + ")");
    out.data_ = data_;
    return out;
}

bool Tensor::all_finite() const {
    for (float x : data_)
        if (!std::isfinite(x)) return false;
    return true;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << ", ";
        os << shape_[i];
    }
    os << ")";
    return os.str();
}

}  // namespace randrl
