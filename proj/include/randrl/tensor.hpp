#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace randrl {

// Dense float32 tensor with row-major layout.  Activations use NCHW order;
// dense weights are (out, in).  This is deliberately a plain value type:
// copies are real copies, which keeps rollout storage and checkpointing
// straightforward.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int64_t> shape);
    Tensor(std::initializer_list<int64_t> shape);

    static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<int64_t> shape, float v);

    const std::vector<int64_t>& shape() const { return shape_; }
    int64_t dim(size_t i) const;
    size_t rank() const { return shape_.size(); }
    int64_t numel() const { return numel_; }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    std::vector<float>& raw() { return data_; }
    const std::vector<float>& raw() const { return data_; }

    float& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    float operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // NCHW element access used by the environments and renderers; kernels
    // index flat buffers directly for speed.
    float& at4(int64_t n, int64_t c, int64_t h, int64_t w);
    float at4(int64_t n, int64_t c, int64_t h, int64_t w) const;
    float& at2(int64_t r, int64_t c);
    float at2(int64_t r, int64_t c) const;

    void fill(float v);
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    // Reinterprets the buffer with a new shape of identical element count.
    Tensor reshaped(std::vector<int64_t> new_shape) const;

    bool all_finite() const;
    std::string shape_str() const;

private:
    std::vector<int64_t> shape_;
    int64_t numel_ = 0;
    std::vector<float> data_;
};

}  // namespace randrl
