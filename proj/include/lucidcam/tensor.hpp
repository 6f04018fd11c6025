#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lucidcam/errors.hpp"

namespace lucidcam {

// Dense float32 tensor, row-major, last dimension fastest.
// Reductions over tensor contents accumulate in double; see tensor.cpp.
class Tensor {
public:
    Tensor() = default;

    // Fills every element with `fill`.
    explicit Tensor(std::vector<int> shape, float fill = 0.0f);

    // Adopts an existing buffer; length must equal the shape product.
    Tensor(std::vector<int> shape, std::vector<float> data);

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    std::vector<float>& storage() { return data_; }
    const std::vector<float>& storage() const { return data_; }

    float& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    float operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    // Rank-checked accessors for the shapes this project uses.
    float& at(int h, int w);
    float at(int h, int w) const;
    float& at(int c, int h, int w);
    float at(int c, int h, int w) const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    static std::int64_t shape_product(const std::vector<int>& shape);
    static std::string shape_string(const std::vector<int>& shape);

private:
    std::vector<int> shape_;
    std::vector<float> data_;
};

// Resizes a rank-2 tensor with align-corners bilinear interpolation.
// Output corners equal input corners whenever both extents are >= 2.
Tensor bilinear_resize(const Tensor& input, int out_h, int out_w);

// Maps values to [0, 1] via (v - min) / (max - min).
// A constant input (max == min) maps to all zeros.
Tensor minmax_normalize(const Tensor& input);

// Reductions (double accumulation).
double tensor_min(const Tensor& t);
double tensor_max(const Tensor& t);
double tensor_mean(const Tensor& t);
double tensor_sum(const Tensor& t);

bool all_finite(const Tensor& t);

// FNV-1a over the raw float32 bytes; used by determinism checks.
std::uint64_t tensor_hash(const Tensor& t);

} // namespace lucidcam
