#pragma once

#include "lucidcam/tensor.hpp"

namespace lucidcam {

// Cross-correlation (kernels are not flipped), square kernel, symmetric
// zero padding. input C x H x W, weight Cout x Cin x K x K, bias Cout.
Tensor conv2d_forward(const Tensor& input, const Tensor& weight, const Tensor& bias,
                      int stride = 1, int pad = 0);

struct ConvGrads {
    Tensor input;
    Tensor weight;
    Tensor bias;
};
ConvGrads conv2d_backward(const Tensor& input, const Tensor& weight,
                          const Tensor& grad_out, int stride = 1, int pad = 0);

// Window maximum; ties resolve to the first maximum in row-major order.
Tensor max_pool2d_forward(const Tensor& input, int kernel = 2, int stride = 2);
Tensor max_pool2d_backward(const Tensor& input, const Tensor& grad_out,
                           int kernel = 2, int stride = 2);

Tensor relu_forward(const Tensor& input);
Tensor relu_backward(const Tensor& input, const Tensor& grad_out);

// C x H x W -> C, spatial mean per channel.
Tensor global_avg_pool_forward(const Tensor& input);
Tensor global_avg_pool_backward(const std::vector<int>& input_shape, const Tensor& grad_out);

// y = W x + b. x rank-1.
Tensor dense_forward(const Tensor& x, const Tensor& weight, const Tensor& bias);

struct DenseGrads {
    Tensor input;
    Tensor weight;
    Tensor bias;
};
DenseGrads dense_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_out);

Tensor softmax(const Tensor& logits);

// Numerically stable softmax cross-entropy against an integer label.
float softmax_cross_entropy(const Tensor& logits, int label);
Tensor softmax_cross_entropy_grad(const Tensor& logits, int label);

} // namespace lucidcam
