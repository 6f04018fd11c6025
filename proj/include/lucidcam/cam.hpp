#pragma once

#include <string>
#include <vector>

#include "lucidcam/data.hpp"
#include "lucidcam/model.hpp"

namespace lucidcam {

// Class-evidence map over the input extents. values live in [0,1] and peak at
// exactly 1 unless the rectified coarse map was identically zero (all_zero).
// raw_max keeps the pre-normalization maximum of the coarse map around for
// diagnostics.
struct Heatmap {
    Tensor values; // H x W
    int class_index = 0;
    int layer_id = -1;
    bool all_zero = false;
    double raw_max = 0.0;
};

// Grad-CAM: alpha_k = spatial mean of d logit[class] / d A_k at the captured
// conv layer, coarse map = relu(sum_k alpha_k A_k), bilinear-resized to the
// image extents and minmax-normalized.
Heatmap grad_cam(const ModelSpec& spec, const Parameters& params, const Tensor& image,
                 int class_index, int layer_id);

// Classic CAM from the head weights directly (no gradients); gap_linear heads
// only. Agrees with grad_cam at the last conv layer to within float rounding.
Heatmap cam_gap_head(const ModelSpec& spec, const Parameters& params, const Tensor& image,
                     int class_index);

struct LocalizationScore {
    double mass_fraction = 0.0;
    bool hit = false;
};

// Fraction of heatmap mass inside the mask dilated by a square window of
// radius dilation_px, plus whether the argmax cell (first row-major on ties)
// lands inside that dilated region.
LocalizationScore localization_score(const Heatmap& heatmap, const Tensor& mask,
                                     int dilation_px = 8);

struct LossEntry {
    std::string id;
    int predicted = 0;
    int actual = 0;
    double loss = 0.0;
    double probability = 0.0; // softmax probability of the predicted class
};

// Per-sample cross-entropy, sorted by loss descending (ties by id ascending),
// truncated to at most k entries.
std::vector<LossEntry> top_losses(const ModelSpec& spec, const Parameters& params,
                                  const Dataset& data, int k);

} // namespace lucidcam
