#include "lucidcam/cam.hpp"

#include <algorithm>
#include <cmath>

#include "lucidcam/errors.hpp"
#include "lucidcam/nn.hpp"

namespace lucidcam {

namespace {

// Resize the rectified coarse map to the image extents and normalize. A
// degenerate constant-positive map normalizes to all ones so that the
// "max is 1 unless all_zero" contract holds.
Heatmap finish_heatmap(const Tensor& coarse, int out_h, int out_w, int class_index,
                       int layer_id) {
    Heatmap heat;
    heat.class_index = class_index;
    heat.layer_id = layer_id;
    heat.raw_max = tensor_max(coarse);
    heat.all_zero = heat.raw_max == 0.0;
    Tensor resized = bilinear_resize(coarse, out_h, out_w);
    if (heat.all_zero) {
        heat.values = Tensor({out_h, out_w});
        return heat;
    }
    double lo = tensor_min(resized);
    double hi = tensor_max(resized);
    if (hi == lo) {
        heat.values = Tensor({out_h, out_w});
        for (std::int64_t i = 0; i < heat.values.size(); ++i) heat.values[i] = 1.0f;
        return heat;
    }
    heat.values = minmax_normalize(resized);
    return heat;
}

Tensor weighted_rectified_map(const Tensor& acts, const std::vector<double>& weights) {
    int channels = acts.dim(0), h = acts.dim(1), w = acts.dim(2);
    Tensor coarse({h, w});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int k = 0; k < channels; ++k) {
                s += weights[static_cast<std::size_t>(k)] * acts.at(k, y, x);
            }
            coarse.at(y, x) = static_cast<float>(std::max(s, 0.0));
        }
    }
    return coarse;
}

} // namespace

Heatmap grad_cam(const ModelSpec& spec, const Parameters& params, const Tensor& image,
                 int class_index, int layer_id) {
    ForwardTrace trace = forward_with_capture(spec, params, image, layer_id);
    BackwardResult back = backward_from_logit(trace, class_index);
    const Tensor& acts = back.capture.activations;
    const Tensor& grads = back.capture.gradients;
    int channels = acts.dim(0);
    std::int64_t cells = static_cast<std::int64_t>(acts.dim(1)) * acts.dim(2);
    std::vector<double> alpha(static_cast<std::size_t>(channels));
    for (int k = 0; k < channels; ++k) {
        double s = 0.0;
        for (std::int64_t i = 0; i < cells; ++i) s += grads[k * cells + i];
        alpha[static_cast<std::size_t>(k)] = s / static_cast<double>(cells);
    }
    Tensor coarse = weighted_rectified_map(acts, alpha);
    return finish_heatmap(coarse, image.dim(1), image.dim(2), class_index, layer_id);
}

Heatmap cam_gap_head(const ModelSpec& spec, const Parameters& params, const Tensor& image,
                     int class_index) {
    if (spec.head_kind != HeadKind::GapLinear) {
        throw ArgumentError("cam_gap_head needs a gap_linear head");
    }
    if (class_index < 0 || class_index >= spec.num_classes()) {
        throw ArgumentError("class index " + std::to_string(class_index) + " out of range");
    }
    int layer_id = spec.last_conv_index();
    ForwardTrace trace = forward_with_capture(spec, params, image, layer_id);
    const Tensor& acts = trace.captured_activations();

    std::vector<std::array<int, 2>> pmap = layer_param_indices(spec);
    const Tensor& head_w = params.entries[static_cast<std::size_t>(
        pmap[spec.layers.size() - 1][0])].value;
    int channels = acts.dim(0);
    std::vector<double> weights(static_cast<std::size_t>(channels));
    for (int k = 0; k < channels; ++k) {
        weights[static_cast<std::size_t>(k)] = head_w.at(class_index, k);
    }
    Tensor coarse = weighted_rectified_map(acts, weights);
    return finish_heatmap(coarse, image.dim(1), image.dim(2), class_index, layer_id);
}

LocalizationScore localization_score(const Heatmap& heatmap, const Tensor& mask,
                                     int dilation_px) {
    const Tensor& values = heatmap.values;
    if (values.rank() != 2 || mask.rank() != 2 || values.shape() != mask.shape()) {
        throw ArgumentError("heatmap and mask extents must match");
    }
    if (dilation_px < 0) throw ArgumentError("dilation must be non-negative");
    int h = values.dim(0), w = values.dim(1);

    // square dilation, separable: rows first, then columns
    std::vector<char> rows(static_cast<std::size_t>(h) * w, 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (mask.at(y, x) > 0.5f) {
                int lo = std::max(0, x - dilation_px), hi = std::min(w - 1, x + dilation_px);
                for (int xx = lo; xx <= hi; ++xx) rows[static_cast<std::size_t>(y) * w + xx] = 1;
            }
        }
    }
    std::vector<char> dilated(static_cast<std::size_t>(h) * w, 0);
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) {
            if (rows[static_cast<std::size_t>(y) * w + x]) {
                int lo = std::max(0, y - dilation_px), hi = std::min(h - 1, y + dilation_px);
                for (int yy = lo; yy <= hi; ++yy) dilated[static_cast<std::size_t>(yy) * w + x] = 1;
            }
        }
    }

    double total = 0.0, inside = 0.0;
    int best_y = 0, best_x = 0;
    float best = values.at(0, 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            float v = values.at(y, x);
            total += v;
            if (dilated[static_cast<std::size_t>(y) * w + x]) inside += v;
            if (v > best) {
                best = v;
                best_y = y;
                best_x = x;
            }
        }
    }
    LocalizationScore score;
    score.mass_fraction = total > 0.0 ? inside / total : 0.0;
    score.hit = dilated[static_cast<std::size_t>(best_y) * w + best_x] != 0;
    return score;
}

std::vector<LossEntry> top_losses(const ModelSpec& spec, const Parameters& params,
                                  const Dataset& data, int k) {
    if (k < 1) throw ArgumentError("top_losses needs k >= 1");
    if (data.empty()) throw DataError("top_losses needs a non-empty dataset");
    std::vector<LossEntry> entries;
    entries.reserve(data.size());
    for (const Sample& sample : data) {
        Tensor logits = forward_logits(spec, params, sample.image);
        Tensor probs = softmax(logits);
        int predicted = 0;
        for (int c = 1; c < logits.dim(0); ++c) {
            if (probs[c] > probs[predicted]) predicted = c;
        }
        LossEntry e;
        e.id = sample.id;
        e.predicted = predicted;
        e.actual = sample.label;
        e.loss = softmax_cross_entropy(logits, sample.label);
        e.probability = probs[predicted];
        entries.push_back(std::move(e));
    }
    std::sort(entries.begin(), entries.end(), [](const LossEntry& a, const LossEntry& b) {
        if (a.loss != b.loss) return a.loss > b.loss;
        return a.id < b.id;
    });
    if (entries.size() > static_cast<std::size_t>(k)) {
        entries.resize(static_cast<std::size_t>(k));
    }
    return entries;
}

} // namespace lucidcam
