#include "lucidcam/nn.hpp"

#include <cmath>

#include "lucidcam/nn_kernels.hpp"

namespace lucidcam {

namespace {

void check_conv_shapes(const Tensor& input, const Tensor& weight, const Tensor& bias,
                       int stride, int pad, int& oh, int& ow) {
    if (input.rank() != 3) {
        throw ShapeError("conv2d input must be C x H x W, got " +
                         Tensor::shape_string(input.shape()));
    }
    if (weight.rank() != 4 || weight.dim(2) != weight.dim(3)) {
        throw ShapeError("conv2d weight must be Cout x Cin x K x K, got " +
                         Tensor::shape_string(weight.shape()));
    }
    if (bias.rank() != 1 || bias.dim(0) != weight.dim(0)) {
        throw ShapeError("conv2d bias must have one value per output channel");
    }
    if (input.dim(0) != weight.dim(1)) {
        throw ShapeError("conv2d channel mismatch: input has " + std::to_string(input.dim(0)) +
                         ", weight expects " + std::to_string(weight.dim(1)));
    }
    if (stride < 1 || pad < 0) {
        throw ShapeError("conv2d needs stride >= 1 and pad >= 0");
    }
    int k = weight.dim(2);
    int h = input.dim(1);
    int w = input.dim(2);
    if (h + 2 * pad < k || w + 2 * pad < k) {
        throw ShapeError("conv2d kernel larger than padded input");
    }
    if ((h + 2 * pad - k) % stride != 0 || (w + 2 * pad - k) % stride != 0) {
        throw ShapeError("conv2d extents do not divide evenly by stride");
    }
    oh = kernels::conv_out_extent(h, k, stride, pad);
    ow = kernels::conv_out_extent(w, k, stride, pad);
}

void check_pool_shapes(const Tensor& input, int kernel, int stride, int& oh, int& ow) {
    if (input.rank() != 3) {
        throw ShapeError("max_pool2d input must be C x H x W, got " +
                         Tensor::shape_string(input.shape()));
    }
    if (kernel < 1 || stride < 1) {
        throw ShapeError("max_pool2d needs kernel >= 1 and stride >= 1");
    }
    int h = input.dim(1);
    int w = input.dim(2);
    if (h < kernel || w < kernel || (h - kernel) % stride != 0 || (w - kernel) % stride != 0) {
        throw ShapeError("max_pool2d extents " + Tensor::shape_string(input.shape()) +
                         " not divisible for kernel " + std::to_string(kernel) +
                         " stride " + std::to_string(stride));
    }
    oh = (h - kernel) / stride + 1;
    ow = (w - kernel) / stride + 1;
}

} // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& weight, const Tensor& bias,
                      int stride, int pad) {
    int oh, ow;
    check_conv_shapes(input, weight, bias, stride, pad, oh, ow);
    Tensor out({weight.dim(0), oh, ow});
    kernels::conv2d_fwd(input.data(), input.dim(0), input.dim(1), input.dim(2),
                        weight.data(), weight.dim(0), weight.dim(2),
                        bias.data(), stride, pad, out.data(), oh, ow);
    return out;
}

ConvGrads conv2d_backward(const Tensor& input, const Tensor& weight,
                          const Tensor& grad_out, int stride, int pad) {
    Tensor bias({weight.dim(0)});
    int oh, ow;
    check_conv_shapes(input, weight, bias, stride, pad, oh, ow);
    if (grad_out.shape() != std::vector<int>{weight.dim(0), oh, ow}) {
        throw ShapeError("conv2d grad_out shape " + Tensor::shape_string(grad_out.shape()) +
                         " does not match forward output");
    }
    ConvGrads grads;
    grads.input = Tensor(input.shape());
    grads.weight = Tensor(weight.shape());
    grads.bias = Tensor({weight.dim(0)});
    kernels::conv2d_bwd_input(weight.data(), input.dim(0), weight.dim(0), weight.dim(2),
                              grad_out.data(), oh, ow, stride, pad,
                              grads.input.data(), input.dim(1), input.dim(2));
    kernels::conv2d_bwd_params(input.data(), input.dim(0), input.dim(1), input.dim(2),
                               grad_out.data(), weight.dim(0), oh, ow,
                               weight.dim(2), stride, pad,
                               grads.weight.data(), grads.bias.data());
    return grads;
}

Tensor max_pool2d_forward(const Tensor& input, int kernel, int stride) {
    int oh, ow;
    check_pool_shapes(input, kernel, stride, oh, ow);
    Tensor out({input.dim(0), oh, ow});
    kernels::maxpool_fwd(input.data(), input.dim(0), input.dim(1), input.dim(2),
                         kernel, stride, out.data(), oh, ow);
    return out;
}

Tensor max_pool2d_backward(const Tensor& input, const Tensor& grad_out,
                           int kernel, int stride) {
    int oh, ow;
    check_pool_shapes(input, kernel, stride, oh, ow);
    if (grad_out.shape() != std::vector<int>{input.dim(0), oh, ow}) {
        throw ShapeError("max_pool2d grad_out shape does not match forward output");
    }
    Tensor gin(input.shape());
    kernels::maxpool_bwd(input.data(), input.dim(0), input.dim(1), input.dim(2),
                         kernel, stride, grad_out.data(), oh, ow, gin.data());
    return gin;
}

Tensor relu_forward(const Tensor& input) {
    Tensor out(input.shape());
    kernels::relu_fwd(input.data(), static_cast<std::size_t>(input.size()), out.data());
    return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
    if (!input.same_shape(grad_out)) {
        throw ShapeError("relu grad_out shape does not match input");
    }
    Tensor gin(input.shape());
    kernels::relu_bwd(input.data(), grad_out.data(),
                      static_cast<std::size_t>(input.size()), gin.data());
    return gin;
}

Tensor global_avg_pool_forward(const Tensor& input) {
    if (input.rank() != 3) {
        throw ShapeError("global_avg_pool input must be C x H x W");
    }
    Tensor out({input.dim(0)});
    kernels::gap_fwd(input.data(), input.dim(0), input.dim(1), input.dim(2), out.data());
    return out;
}

Tensor global_avg_pool_backward(const std::vector<int>& input_shape, const Tensor& grad_out) {
    if (input_shape.size() != 3) {
        throw ShapeError("global_avg_pool input shape must be C x H x W");
    }
    if (grad_out.rank() != 1 || grad_out.dim(0) != input_shape[0]) {
        throw ShapeError("global_avg_pool grad_out must have one value per channel");
    }
    Tensor gin(input_shape);
    kernels::gap_bwd(grad_out.data(), input_shape[0], input_shape[1], input_shape[2],
                     gin.data());
    return gin;
}

Tensor dense_forward(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    if (x.rank() != 1 || weight.rank() != 2 || bias.rank() != 1) {
        throw ShapeError("dense expects rank-1 input, rank-2 weight, rank-1 bias");
    }
    if (weight.dim(1) != x.dim(0) || weight.dim(0) != bias.dim(0)) {
        throw ShapeError("dense shape mismatch: x " + Tensor::shape_string(x.shape()) +
                         ", weight " + Tensor::shape_string(weight.shape()));
    }
    Tensor y({weight.dim(0)});
    kernels::dense_fwd(x.data(), x.dim(0), weight.data(), weight.dim(0), bias.data(),
                       y.data());
    return y;
}

DenseGrads dense_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_out) {
    if (grad_out.rank() != 1 || grad_out.dim(0) != weight.dim(0)) {
        throw ShapeError("dense grad_out must have one value per output");
    }
    if (x.rank() != 1 || weight.dim(1) != x.dim(0)) {
        throw ShapeError("dense backward shape mismatch");
    }
    DenseGrads grads;
    grads.input = Tensor(x.shape());
    grads.weight = Tensor(weight.shape());
    grads.bias = Tensor({weight.dim(0)});
    kernels::dense_bwd(x.data(), x.dim(0), weight.data(), weight.dim(0), grad_out.data(),
                       grads.input.data(), grads.weight.data(), grads.bias.data());
    return grads;
}

Tensor softmax(const Tensor& logits) {
    if (logits.rank() != 1 || logits.dim(0) < 1) {
        throw ShapeError("softmax expects a rank-1 tensor");
    }
    double m = tensor_max(logits);
    double se = 0.0;
    Tensor out(logits.shape());
    for (std::int64_t i = 0; i < logits.size(); ++i) se += std::exp(logits[i] - m);
    for (std::int64_t i = 0; i < logits.size(); ++i) {
        out[i] = static_cast<float>(std::exp(logits[i] - m) / se);
    }
    return out;
}

float softmax_cross_entropy(const Tensor& logits, int label) {
    if (logits.rank() != 1) {
        throw ShapeError("softmax_cross_entropy expects rank-1 logits");
    }
    if (label < 0 || label >= logits.dim(0)) {
        throw ArgumentError("label " + std::to_string(label) + " out of range for " +
                            std::to_string(logits.dim(0)) + " classes");
    }
    double m = tensor_max(logits);
    double se = 0.0;
    for (std::int64_t i = 0; i < logits.size(); ++i) se += std::exp(logits[i] - m);
    double loss = std::log(se) - (static_cast<double>(logits[label]) - m);
    return static_cast<float>(loss);
}

Tensor softmax_cross_entropy_grad(const Tensor& logits, int label) {
    if (label < 0 || label >= logits.dim(0)) {
        throw ArgumentError("label " + std::to_string(label) + " out of range for " +
                            std::to_string(logits.dim(0)) + " classes");
    }
    Tensor grad = softmax(logits);
    grad[label] -= 1.0f;
    return grad;
}

} // namespace lucidcam
