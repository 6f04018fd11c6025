#include "lucidcam/tensor.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace lucidcam {

std::int64_t Tensor::shape_product(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
        if (d <= 0) {
            throw ShapeError("tensor extents must be positive, got " + shape_string(shape));
        }
        n *= d;
    }
    return n;
}

std::string Tensor::shape_string(const std::vector<int>& shape) {
    std::ostringstream out;
    out << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << ", ";
        out << shape[i];
    }
    out << "]";
    return out.str();
}

Tensor::Tensor(std::vector<int> shape, float fill) : shape_(std::move(shape)) {
    data_.assign(static_cast<std::size_t>(shape_product(shape_)), fill);
}

Tensor::Tensor(std::vector<int> shape, std::vector<float> data) : shape_(std::move(shape)) {
    std::int64_t n = shape_product(shape_);
    if (n != static_cast<std::int64_t>(data.size())) {
        throw ShapeError("buffer length " + std::to_string(data.size()) +
                         " does not match shape " + shape_string(shape_));
    }
    data_ = std::move(data);
}

namespace {

void require_rank(const Tensor& t, int rank, const char* what) {
    if (t.rank() != rank) {
        throw ShapeError(std::string(what) + " expects rank-" + std::to_string(rank) +
                         " tensor, got " + Tensor::shape_string(t.shape()));
    }
}

} // namespace

float& Tensor::at(int h, int w) {
    require_rank(*this, 2, "at(h, w)");
    return data_[static_cast<std::size_t>(h) * dim(1) + w];
}

float Tensor::at(int h, int w) const {
    require_rank(*this, 2, "at(h, w)");
    return data_[static_cast<std::size_t>(h) * dim(1) + w];
}

float& Tensor::at(int c, int h, int w) {
    require_rank(*this, 3, "at(c, h, w)");
    return data_[(static_cast<std::size_t>(c) * dim(1) + h) * dim(2) + w];
}

float Tensor::at(int c, int h, int w) const {
    require_rank(*this, 3, "at(c, h, w)");
    return data_[(static_cast<std::size_t>(c) * dim(1) + h) * dim(2) + w];
}

Tensor bilinear_resize(const Tensor& input, int out_h, int out_w) {
    require_rank(input, 2, "bilinear_resize");
    if (out_h <= 0 || out_w <= 0) {
        throw ShapeError("bilinear_resize target extents must be positive");
    }
    int in_h = input.dim(0);
    int in_w = input.dim(1);
    Tensor out({out_h, out_w});
    double sy = out_h > 1 ? static_cast<double>(in_h - 1) / (out_h - 1) : 0.0;
    double sx = out_w > 1 ? static_cast<double>(in_w - 1) / (out_w - 1) : 0.0;
    for (int i = 0; i < out_h; ++i) {
        double y = i * sy;
        int y0 = static_cast<int>(y);
        if (y0 > in_h - 2) y0 = in_h - 2;
        if (y0 < 0) y0 = 0;
        double ty = in_h > 1 ? y - y0 : 0.0;
        for (int j = 0; j < out_w; ++j) {
            double x = j * sx;
            int x0 = static_cast<int>(x);
            if (x0 > in_w - 2) x0 = in_w - 2;
            if (x0 < 0) x0 = 0;
            double tx = in_w > 1 ? x - x0 : 0.0;
            int x1 = in_w > 1 ? x0 + 1 : x0;
            int y1 = in_h > 1 ? y0 + 1 : y0;
            double top = input.at(y0, x0) * (1.0 - tx) + input.at(y0, x1) * tx;
            double bot = input.at(y1, x0) * (1.0 - tx) + input.at(y1, x1) * tx;
            out.at(i, j) = static_cast<float>(top * (1.0 - ty) + bot * ty);
        }
    }
    return out;
}

Tensor minmax_normalize(const Tensor& input) {
    if (input.empty()) {
        throw ShapeError("minmax_normalize expects a non-empty tensor");
    }
    double lo = tensor_min(input);
    double hi = tensor_max(input);
    Tensor out(input.shape());
    if (hi == lo) {
        return out;
    }
    double inv = 1.0 / (hi - lo);
    for (std::int64_t i = 0; i < input.size(); ++i) {
        out[i] = static_cast<float>((input[i] - lo) * inv);
    }
    return out;
}

double tensor_min(const Tensor& t) {
    double m = std::numeric_limits<double>::infinity();
    for (std::int64_t i = 0; i < t.size(); ++i) m = std::min(m, static_cast<double>(t[i]));
    return m;
}

double tensor_max(const Tensor& t) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::int64_t i = 0; i < t.size(); ++i) m = std::max(m, static_cast<double>(t[i]));
    return m;
}

double tensor_sum(const Tensor& t) {
    double s = 0.0;
    for (std::int64_t i = 0; i < t.size(); ++i) s += t[i];
    return s;
}

double tensor_mean(const Tensor& t) {
    if (t.size() == 0) return 0.0;
    return tensor_sum(t) / static_cast<double>(t.size());
}

bool all_finite(const Tensor& t) {
    for (std::int64_t i = 0; i < t.size(); ++i) {
        if (!std::isfinite(t[i])) return false;
    }
    return true;
}

std::uint64_t tensor_hash(const Tensor& t) {
    std::uint64_t h = 1469598103934665603ULL;
    const unsigned char* bytes = reinterpret_cast<const unsigned char*>(t.data());
    std::size_t n = static_cast<std::size_t>(t.size()) * sizeof(float);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= bytes[i];
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace lucidcam
