#include "lucidcam/model.hpp"

#include <algorithm>
#include <cmath>

#include "lucidcam/nn.hpp"
#include "lucidcam/nn_kernels.hpp"
#include "lucidcam/rng.hpp"

namespace lucidcam {

LayerDef LayerDef::conv2d(int in_ch, int out_ch, int kernel, int stride, int pad) {
    LayerDef ld;
    ld.kind = LayerKind::Conv2d;
    ld.in_ch = in_ch;
    ld.out_ch = out_ch;
    ld.kernel = kernel;
    ld.stride = stride;
    ld.pad = pad;
    return ld;
}

LayerDef LayerDef::relu() {
    LayerDef ld;
    ld.kind = LayerKind::Relu;
    return ld;
}

LayerDef LayerDef::max_pool2d(int kernel, int stride) {
    LayerDef ld;
    ld.kind = LayerKind::MaxPool2d;
    ld.kernel = kernel;
    ld.stride = stride;
    return ld;
}

LayerDef LayerDef::global_avg_pool() {
    LayerDef ld;
    ld.kind = LayerKind::GlobalAvgPool;
    return ld;
}

LayerDef LayerDef::flatten() {
    LayerDef ld;
    ld.kind = LayerKind::Flatten;
    return ld;
}

LayerDef LayerDef::dense(int in_dim, int out_dim) {
    LayerDef ld;
    ld.kind = LayerKind::Dense;
    ld.in_dim = in_dim;
    ld.out_dim = out_dim;
    return ld;
}

ModelSpec ModelSpec::small_cam_net(int size, HeadKind head) {
    ModelSpec spec;
    spec.input_shape = {3, size, size};
    spec.head_kind = head;
    int chans[4] = {3, 16, 32, 64};
    for (int b = 0; b < 3; ++b) {
        spec.layers.push_back(LayerDef::conv2d(chans[b], chans[b + 1], 3, 1, 1));
        spec.layers.push_back(LayerDef::relu());
        spec.layers.push_back(LayerDef::max_pool2d(2, 2));
    }
    if (head == HeadKind::GapLinear) {
        spec.layers.push_back(LayerDef::global_avg_pool());
        spec.layers.push_back(LayerDef::dense(64, 2));
    } else {
        int side = size / 8;
        spec.layers.push_back(LayerDef::flatten());
        spec.layers.push_back(LayerDef::dense(64 * side * side, 64));
        spec.layers.push_back(LayerDef::relu());
        spec.layers.push_back(LayerDef::dense(64, 2));
    }
    return spec;
}

std::vector<std::vector<int>> ModelSpec::layer_output_shapes() const {
    std::vector<std::vector<int>> shapes;
    shapes.reserve(layers.size() + 1);
    if (input_shape[0] <= 0 || input_shape[1] <= 0 || input_shape[2] <= 0) {
        throw ShapeError("model input extents must be positive");
    }
    std::vector<int> cur{input_shape[0], input_shape[1], input_shape[2]};
    shapes.push_back(cur);
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerDef& ld = layers[i];
        std::string where = "layer " + std::to_string(i);
        switch (ld.kind) {
        case LayerKind::Conv2d: {
            if (cur.size() != 3) throw ShapeError(where + ": conv2d needs a C x H x W input");
            if (cur[0] != ld.in_ch) {
                throw ShapeError(where + ": conv2d expects " + std::to_string(ld.in_ch) +
                                 " channels, input has " + std::to_string(cur[0]));
            }
            int h = cur[1], w = cur[2];
            if (h + 2 * ld.pad < ld.kernel || w + 2 * ld.pad < ld.kernel) {
                throw ShapeError(where + ": conv2d kernel larger than padded input");
            }
            if ((h + 2 * ld.pad - ld.kernel) % ld.stride != 0 ||
                (w + 2 * ld.pad - ld.kernel) % ld.stride != 0) {
                throw ShapeError(where + ": conv2d extents do not divide by stride");
            }
            cur = {ld.out_ch, kernels::conv_out_extent(h, ld.kernel, ld.stride, ld.pad),
                   kernels::conv_out_extent(w, ld.kernel, ld.stride, ld.pad)};
            break;
        }
        case LayerKind::Relu:
            break;
        case LayerKind::MaxPool2d: {
            if (cur.size() != 3) throw ShapeError(where + ": max_pool2d needs a C x H x W input");
            int h = cur[1], w = cur[2];
            if (h < ld.kernel || w < ld.kernel || (h - ld.kernel) % ld.stride != 0 ||
                (w - ld.kernel) % ld.stride != 0) {
                throw ShapeError(where + ": max_pool2d extents not divisible");
            }
            cur = {cur[0], (h - ld.kernel) / ld.stride + 1, (w - ld.kernel) / ld.stride + 1};
            break;
        }
        case LayerKind::GlobalAvgPool:
            if (cur.size() != 3) {
                throw ShapeError(where + ": global_avg_pool needs a C x H x W input");
            }
            cur = {cur[0]};
            break;
        case LayerKind::Flatten: {
            if (cur.size() != 3) throw ShapeError(where + ": flatten needs a C x H x W input");
            cur = {cur[0] * cur[1] * cur[2]};
            break;
        }
        case LayerKind::Dense:
            if (cur.size() != 1) throw ShapeError(where + ": dense needs a rank-1 input");
            if (cur[0] != ld.in_dim) {
                throw ShapeError(where + ": dense expects " + std::to_string(ld.in_dim) +
                                 " inputs, got " + std::to_string(cur[0]));
            }
            cur = {ld.out_dim};
            break;
        }
        shapes.push_back(cur);
    }
    return shapes;
}

std::vector<int> ModelSpec::conv_layer_indices() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].kind == LayerKind::Conv2d) out.push_back(static_cast<int>(i));
    }
    return out;
}

int ModelSpec::last_conv_index() const {
    std::vector<int> convs = conv_layer_indices();
    if (convs.empty()) throw ArgumentError("model has no conv2d layer");
    return convs.back();
}

void ModelSpec::validate() const {
    if (layers.empty()) throw ShapeError("model has no layers");
    std::vector<std::vector<int>> shapes = layer_output_shapes();
    if (shapes.back() != std::vector<int>{2}) {
        throw ShapeError("model must end in two logits, got " +
                         Tensor::shape_string(shapes.back()));
    }
    if (conv_layer_indices().empty()) {
        throw ShapeError("model needs at least one conv2d layer");
    }
    std::size_t n = layers.size();
    if (head_kind == HeadKind::GapLinear) {
        if (n < 2 || layers[n - 2].kind != LayerKind::GlobalAvgPool ||
            layers[n - 1].kind != LayerKind::Dense) {
            throw ShapeError("gap_linear head must end with global_avg_pool then dense");
        }
    } else {
        bool has_flatten = false;
        for (const LayerDef& ld : layers) {
            if (ld.kind == LayerKind::Flatten) has_flatten = true;
            if (ld.kind == LayerKind::GlobalAvgPool) {
                throw ShapeError("mlp head must not contain global_avg_pool");
            }
        }
        if (!has_flatten || layers[n - 1].kind != LayerKind::Dense) {
            throw ShapeError("mlp head must flatten and end with a dense layer");
        }
    }
}

ParamEntry* Parameters::find(std::string_view name) {
    for (ParamEntry& e : entries) {
        if (e.name == name) return &e;
    }
    return nullptr;
}

const ParamEntry* Parameters::find(std::string_view name) const {
    for (const ParamEntry& e : entries) {
        if (e.name == name) return &e;
    }
    return nullptr;
}

std::int64_t Parameters::total_size() const {
    std::int64_t n = 0;
    for (const ParamEntry& e : entries) n += e.value.size();
    return n;
}

Parameters Parameters::init(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    SplitMix64 rng(seed);
    Parameters params;
    int conv_i = 0, dense_i = 0;
    for (const LayerDef& ld : spec.layers) {
        if (ld.kind == LayerKind::Conv2d) {
            double bound = std::sqrt(6.0 / (static_cast<double>(ld.in_ch) * ld.kernel * ld.kernel));
            Tensor w({ld.out_ch, ld.in_ch, ld.kernel, ld.kernel});
            for (std::int64_t i = 0; i < w.size(); ++i) {
                w[i] = static_cast<float>(rng.uniform(-bound, bound));
            }
            std::string base = "conv" + std::to_string(conv_i++);
            params.entries.push_back({base + ".weight", std::move(w), true});
            params.entries.push_back({base + ".bias", Tensor({ld.out_ch}), true});
        } else if (ld.kind == LayerKind::Dense) {
            double bound = std::sqrt(6.0 / static_cast<double>(ld.in_dim));
            Tensor w({ld.out_dim, ld.in_dim});
            for (std::int64_t i = 0; i < w.size(); ++i) {
                w[i] = static_cast<float>(rng.uniform(-bound, bound));
            }
            std::string base = "dense" + std::to_string(dense_i++);
            params.entries.push_back({base + ".weight", std::move(w), true});
            params.entries.push_back({base + ".bias", Tensor({ld.out_dim}), true});
        }
    }
    return params;
}

std::vector<std::array<int, 2>> layer_param_indices(const ModelSpec& spec) {
    std::vector<std::array<int, 2>> map;
    map.reserve(spec.layers.size());
    int next = 0;
    for (const LayerDef& ld : spec.layers) {
        if (ld.kind == LayerKind::Conv2d || ld.kind == LayerKind::Dense) {
            map.push_back({next, next + 1});
            next += 2;
        } else {
            map.push_back({-1, -1});
        }
    }
    return map;
}

const Tensor& ForwardTrace::captured_activations() const {
    if (capture_tap < 0) throw ArgumentError("forward pass did not select a capture layer");
    return acts[static_cast<std::size_t>(capture_tap) + 1];
}

namespace {

void check_image(const ModelSpec& spec, const Tensor& image) {
    std::vector<int> want{spec.input_shape[0], spec.input_shape[1], spec.input_shape[2]};
    if (image.shape() != want) {
        throw ShapeError("image shape " + Tensor::shape_string(image.shape()) +
                         " does not match model input " + Tensor::shape_string(want));
    }
}

ForwardTrace run_forward(const ModelSpec& spec, const Parameters& params, const Tensor& image,
                         int capture_layer) {
    spec.validate();
    check_image(spec, image);
    std::vector<std::array<int, 2>> pmap = layer_param_indices(spec);
    if (!params.entries.empty() &&
        params.entries.size() != 2 * static_cast<std::size_t>(
            std::count_if(spec.layers.begin(), spec.layers.end(), [](const LayerDef& ld) {
                return ld.kind == LayerKind::Conv2d || ld.kind == LayerKind::Dense;
            }))) {
        throw ShapeError("parameter list does not match model spec");
    }
    ForwardTrace trace;
    trace.spec = &spec;
    trace.params = &params;
    trace.capture_layer = capture_layer;
    if (capture_layer >= 0) {
        int tap = capture_layer;
        while (tap + 1 < static_cast<int>(spec.layers.size()) &&
               (spec.layers[tap + 1].kind == LayerKind::Relu ||
                spec.layers[tap + 1].kind == LayerKind::MaxPool2d)) {
            ++tap;
        }
        trace.capture_tap = tap;
    }
    trace.acts.reserve(spec.layers.size() + 1);
    trace.acts.push_back(image);
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerDef& ld = spec.layers[i];
        const Tensor& in = trace.acts.back();
        switch (ld.kind) {
        case LayerKind::Conv2d:
            trace.acts.push_back(conv2d_forward(in, params.entries[pmap[i][0]].value,
                                                params.entries[pmap[i][1]].value,
                                                ld.stride, ld.pad));
            break;
        case LayerKind::Relu:
            trace.acts.push_back(relu_forward(in));
            break;
        case LayerKind::MaxPool2d:
            trace.acts.push_back(max_pool2d_forward(in, ld.kernel, ld.stride));
            break;
        case LayerKind::GlobalAvgPool:
            trace.acts.push_back(global_avg_pool_forward(in));
            break;
        case LayerKind::Flatten: {
            Tensor flat({static_cast<int>(in.size())}, in.storage());
            trace.acts.push_back(std::move(flat));
            break;
        }
        case LayerKind::Dense:
            trace.acts.push_back(dense_forward(in, params.entries[pmap[i][0]].value,
                                               params.entries[pmap[i][1]].value));
            break;
        }
    }
    return trace;
}

// Walks layers top-down, returning gradients aligned with params.entries.
// Stops descending below lowest_layer; records the gradient flowing out of
// capture_tap when requested.
std::vector<Tensor> walk_backward(const ForwardTrace& trace, Tensor grad, int lowest_layer,
                                  Tensor* capture_grad) {
    const ModelSpec& spec = *trace.spec;
    const Parameters& params = *trace.params;
    std::vector<std::array<int, 2>> pmap = layer_param_indices(spec);
    std::vector<Tensor> grads(params.entries.size());
    for (int i = static_cast<int>(spec.layers.size()) - 1; i >= lowest_layer; --i) {
        if (capture_grad && i == trace.capture_tap) *capture_grad = grad;
        const LayerDef& ld = spec.layers[i];
        const Tensor& in = trace.acts[static_cast<std::size_t>(i)];
        bool need_input = i > lowest_layer;
        switch (ld.kind) {
        case LayerKind::Conv2d: {
            const Tensor& w = params.entries[pmap[i][0]].value;
            Tensor gw(w.shape());
            Tensor gb({ld.out_ch});
            kernels::conv2d_bwd_params(in.data(), ld.in_ch, in.dim(1), in.dim(2),
                                       grad.data(), ld.out_ch, grad.dim(1), grad.dim(2),
                                       ld.kernel, ld.stride, ld.pad,
                                       gw.data(), gb.data());
            grads[pmap[i][0]] = std::move(gw);
            grads[pmap[i][1]] = std::move(gb);
            if (need_input) {
                Tensor gi(in.shape());
                kernels::conv2d_bwd_input(w.data(), ld.in_ch, ld.out_ch, ld.kernel,
                                          grad.data(), grad.dim(1), grad.dim(2),
                                          ld.stride, ld.pad,
                                          gi.data(), in.dim(1), in.dim(2));
                grad = std::move(gi);
            }
            break;
        }
        case LayerKind::Relu:
            if (need_input) grad = relu_backward(in, grad);
            break;
        case LayerKind::MaxPool2d:
            if (need_input) grad = max_pool2d_backward(in, grad, ld.kernel, ld.stride);
            break;
        case LayerKind::GlobalAvgPool:
            if (need_input) grad = global_avg_pool_backward(in.shape(), grad);
            break;
        case LayerKind::Flatten:
            if (need_input) grad = Tensor(in.shape(), std::move(grad.storage()));
            break;
        case LayerKind::Dense: {
            const Tensor& w = params.entries[pmap[i][0]].value;
            DenseGrads dg = dense_backward(in, w, grad);
            grads[pmap[i][0]] = std::move(dg.weight);
            grads[pmap[i][1]] = std::move(dg.bias);
            if (need_input) grad = std::move(dg.input);
            break;
        }
        }
    }
    return grads;
}

} // namespace

ForwardTrace forward(const ModelSpec& spec, const Parameters& params, const Tensor& image) {
    return run_forward(spec, params, image, -1);
}

ForwardTrace forward_with_capture(const ModelSpec& spec, const Parameters& params,
                                  const Tensor& image, int layer_id) {
    if (layer_id < 0 || layer_id >= static_cast<int>(spec.layers.size())) {
        throw ArgumentError("capture layer " + std::to_string(layer_id) + " out of range");
    }
    if (spec.layers[static_cast<std::size_t>(layer_id)].kind != LayerKind::Conv2d) {
        throw ArgumentError("capture layer " + std::to_string(layer_id) +
                            " is not a conv2d layer");
    }
    return run_forward(spec, params, image, layer_id);
}

Tensor forward_logits(const ModelSpec& spec, const Parameters& params, const Tensor& image) {
    return forward(spec, params, image).logits();
}

BackwardResult backward_from_logit(const ForwardTrace& trace, int class_index) {
    if (trace.spec == nullptr || trace.acts.empty()) {
        throw ArgumentError("backward_from_logit needs a forward trace");
    }
    if (trace.capture_layer < 0) {
        throw ArgumentError("forward pass did not select a capture layer");
    }
    const Tensor& logits = trace.logits();
    if (class_index < 0 || class_index >= logits.dim(0)) {
        throw ArgumentError("class index " + std::to_string(class_index) + " out of range");
    }
    Tensor seed(logits.shape());
    seed[class_index] = 1.0f;
    BackwardResult result;
    result.capture.layer_id = trace.capture_layer;
    result.capture.class_index = class_index;
    result.capture.activations = trace.captured_activations();
    result.param_grads = walk_backward(trace, std::move(seed), 0, &result.capture.gradients);
    return result;
}

LossBackward backward_from_loss(const ForwardTrace& trace, int label, int lowest_layer) {
    if (trace.spec == nullptr || trace.acts.empty()) {
        throw ArgumentError("backward_from_loss needs a forward trace");
    }
    if (lowest_layer < 0 || lowest_layer >= static_cast<int>(trace.spec->layers.size())) {
        throw ArgumentError("lowest_layer out of range");
    }
    LossBackward result;
    result.loss = softmax_cross_entropy(trace.logits(), label);
    Tensor seed = softmax_cross_entropy_grad(trace.logits(), label);
    result.param_grads = walk_backward(trace, std::move(seed), lowest_layer, nullptr);
    return result;
}

namespace {

// Float64 shadow of the forward pass, used only by grad_check so finite
// differences are not dominated by float32 rounding.
std::vector<double> shadow_logits(const ModelSpec& spec,
                                  const std::vector<std::vector<double>>& pbufs,
                                  const std::vector<std::array<int, 2>>& pmap,
                                  const std::vector<std::vector<int>>& shapes,
                                  const std::vector<double>& image) {
    std::vector<double> cur = image;
    std::vector<double> next;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerDef& ld = spec.layers[i];
        const std::vector<int>& si = shapes[i];
        const std::vector<int>& so = shapes[i + 1];
        std::int64_t out_n = 1;
        for (int d : so) out_n *= d;
        next.assign(static_cast<std::size_t>(out_n), 0.0);
        switch (ld.kind) {
        case LayerKind::Conv2d:
            kernels::conv2d_fwd(cur.data(), si[0], si[1], si[2],
                                pbufs[pmap[i][0]].data(), ld.out_ch, ld.kernel,
                                pbufs[pmap[i][1]].data(), ld.stride, ld.pad,
                                next.data(), so[1], so[2]);
            break;
        case LayerKind::Relu:
            kernels::relu_fwd(cur.data(), cur.size(), next.data());
            break;
        case LayerKind::MaxPool2d:
            kernels::maxpool_fwd(cur.data(), si[0], si[1], si[2], ld.kernel, ld.stride,
                                 next.data(), so[1], so[2]);
            break;
        case LayerKind::GlobalAvgPool:
            kernels::gap_fwd(cur.data(), si[0], si[1], si[2], next.data());
            break;
        case LayerKind::Flatten:
            next = cur;
            break;
        case LayerKind::Dense:
            kernels::dense_fwd(cur.data(), ld.in_dim, pbufs[pmap[i][0]].data(), ld.out_dim,
                               pbufs[pmap[i][1]].data(), next.data());
            break;
        }
        cur.swap(next);
    }
    return cur;
}

} // namespace

double grad_check(const ModelSpec& spec, const Parameters& params, const Tensor& image,
                  double eps) {
    if (!(eps > 0.0)) throw ArgumentError("grad_check eps must be positive");
    spec.validate();
    std::vector<std::array<int, 2>> pmap = layer_param_indices(spec);
    std::vector<std::vector<int>> shapes = spec.layer_output_shapes();
    std::vector<std::vector<double>> pbufs;
    pbufs.reserve(params.entries.size());
    for (const ParamEntry& e : params.entries) {
        pbufs.emplace_back(e.value.data(), e.value.data() + e.value.size());
    }
    std::vector<double> img(image.data(), image.data() + image.size());

    ForwardTrace trace = forward_with_capture(spec, params, image, spec.last_conv_index());
    double max_rel = 0.0;
    for (int cls = 0; cls < 2; ++cls) {
        BackwardResult back = backward_from_logit(trace, cls);
        for (std::size_t e = 0; e < params.entries.size(); ++e) {
            const Tensor& analytic = back.param_grads[e];
            std::int64_t n = analytic.size();
            int samples = static_cast<int>(std::min<std::int64_t>(n, 12));
            for (int s = 0; s < samples; ++s) {
                std::int64_t idx = samples == 1 ? 0 : s * (n - 1) / (samples - 1);
                double orig = pbufs[e][static_cast<std::size_t>(idx)];
                auto fd_at = [&](double step) {
                    pbufs[e][static_cast<std::size_t>(idx)] = orig + step;
                    double up = shadow_logits(spec, pbufs, pmap, shapes, img)[cls];
                    pbufs[e][static_cast<std::size_t>(idx)] = orig - step;
                    double down = shadow_logits(spec, pbufs, pmap, shapes, img)[cls];
                    pbufs[e][static_cast<std::size_t>(idx)] = orig;
                    return (up - down) / (2.0 * step);
                };
                // The network is piecewise linear in any single parameter, so
                // a kink-free central difference is step-independent. When two
                // step sizes disagree, the interval straddles a relu/maxpool
                // kink and the step must shrink before FD means anything.
                double step = eps;
                double fd = fd_at(step);
                for (int refine = 0; refine < 12; ++refine) {
                    double finer = fd_at(step / 4.0);
                    bool settled = std::abs(finer - fd) <=
                                   1e-6 * std::max({std::abs(fd), std::abs(finer), 1e-8});
                    fd = finer;
                    step /= 4.0;
                    if (settled) break;
                }
                double a = analytic[idx];
                double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-8});
                max_rel = std::max(max_rel, rel);
            }
        }
    }
    return max_rel;
}

} // namespace lucidcam
