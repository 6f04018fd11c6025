#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "lucidcam/tensor.hpp"

namespace lucidcam {

enum class LayerKind { Conv2d, Relu, MaxPool2d, GlobalAvgPool, Flatten, Dense };

struct LayerDef {
    LayerKind kind;
    // Conv2d.
    int in_ch = 0;
    int out_ch = 0;
    int kernel = 0;
    int stride = 1;
    int pad = 0;
    // Dense.
    int in_dim = 0;
    int out_dim = 0;

    static LayerDef conv2d(int in_ch, int out_ch, int kernel = 3, int stride = 1, int pad = 1);
    static LayerDef relu();
    static LayerDef max_pool2d(int kernel = 2, int stride = 2);
    static LayerDef global_avg_pool();
    static LayerDef flatten();
    static LayerDef dense(int in_dim, int out_dim);
};

enum class HeadKind { GapLinear, Mlp };

// A small fixed sequential architecture description. Three conv blocks
// (conv 3x3 / relu / maxpool 2x2 at 16, 32, 64 channels) followed by either a
// global-average-pool + linear head or a flatten + two-layer MLP head.
struct ModelSpec {
    std::array<int, 3> input_shape{3, 96, 96};
    HeadKind head_kind = HeadKind::GapLinear;
    std::vector<LayerDef> layers;

    // Throws ShapeError / ArgumentError when the stack is inconsistent.
    void validate() const;

    // Shape flowing OUT of each layer; index L is the logits shape.
    std::vector<std::vector<int>> layer_output_shapes() const;

    std::vector<int> conv_layer_indices() const;
    int last_conv_index() const;
    int num_classes() const { return 2; }

    static ModelSpec small_cam_net(int size = 96, HeadKind head = HeadKind::GapLinear);
};

struct ParamEntry {
    std::string name;
    Tensor value;
    bool trainable = true;
};

// Named parameter tensors in a fixed order (layer order, weight before bias).
struct Parameters {
    std::vector<ParamEntry> entries;

    ParamEntry* find(std::string_view name);
    const ParamEntry* find(std::string_view name) const;
    std::int64_t total_size() const;

    // conv/dense weights ~ uniform(-b, b) with b = sqrt(6 / fan_in), biases
    // zero, everything drawn from one SplitMix64 stream in entry order.
    static Parameters init(const ModelSpec& spec, std::uint64_t seed);
};

// Parameter entry indices per layer: {weight, bias} or {-1, -1}.
std::vector<std::array<int, 2>> layer_param_indices(const ModelSpec& spec);

struct ForwardTrace {
    const ModelSpec* spec = nullptr;
    const Parameters* params = nullptr;
    // acts[i] is the input of layer i; acts[num_layers] is the logits.
    std::vector<Tensor> acts;
    // Index of the conv layer selected for capture, or -1.
    int capture_layer = -1;
    // The captured activation is the output of this layer: the selected conv
    // followed by its trailing relu/maxpool run, i.e. the feature map the rest
    // of the network actually consumes.
    int capture_tap = -1;

    const Tensor& logits() const { return acts.back(); }
    const Tensor& captured_activations() const;
};

// Runs the network, keeping every intermediate activation.
ForwardTrace forward(const ModelSpec& spec, const Parameters& params, const Tensor& image);

// Same, recording which conv layer's feature maps to expose. layer_id indexes
// spec.layers and must name a Conv2d layer.
ForwardTrace forward_with_capture(const ModelSpec& spec, const Parameters& params,
                                  const Tensor& image, int layer_id);

Tensor forward_logits(const ModelSpec& spec, const Parameters& params, const Tensor& image);

struct Capture {
    int layer_id = -1;
    int class_index = -1;
    Tensor activations; // K x h x w
    Tensor gradients;   // d logit / d activations, same shape
};

struct BackwardResult {
    Capture capture;
    // Aligned with Parameters::entries.
    std::vector<Tensor> param_grads;
};

// Seeds the reverse pass with d(logit[class_index]); pre-softmax, so the
// result is class evidence rather than probability.
BackwardResult backward_from_logit(const ForwardTrace& trace, int class_index);

struct LossBackward {
    float loss = 0.0f;
    std::vector<Tensor> param_grads; // empty tensors below lowest_layer
};

// Seeds the reverse pass with d(cross_entropy(logits, label)). Layers below
// lowest_layer are skipped entirely (their gradient tensors stay empty),
// which makes the frozen-backbone phase cheap.
LossBackward backward_from_loss(const ForwardTrace& trace, int label, int lowest_layer = 0);

// Maximum over sampled parameters (and both logits) of
// |analytic - central_fd| / max(|analytic|, |fd|, 1e-8).
// The finite differences run through a float64 shadow forward pass.
double grad_check(const ModelSpec& spec, const Parameters& params, const Tensor& image,
                  double eps);

} // namespace lucidcam
