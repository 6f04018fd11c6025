#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lucidcam/rng.hpp"
#include "lucidcam/tensor.hpp"

namespace lucidcam {

struct Sample {
    Tensor image;               // 3 x S x S, values in [0, 1]
    int label = 0;              // 0 or 1
    std::optional<Tensor> mask; // S x S in {0, 1}; 1 marks lesion pixels
    std::string id;
};

using Dataset = std::vector<Sample>;

struct DataGenConfig {
    int n_samples = 0;
    int size = 96;
    double pos_frac = 0.4;
    double bright_outlier_frac = 0.01;
    double dark_outlier_frac = 0.01;
    std::uint64_t seed = 0;

    void validate() const;
};

// Deterministic counts derived from a config.
struct DataGenPlan {
    int n_pos = 0;
    int n_plain_neg = 0;
    int n_bright = 0;
    int n_dark = 0;

    static DataGenPlan from_config(const DataGenConfig& cfg);
    // Class of a sample index under the fixed block layout:
    // [positives][plain negatives][bright outliers][dark outliers].
    enum class Kind { Positive, Negative, BrightOutlier, DarkOutlier };
    Kind kind_of(int index) const;
};

// Synthesizes histology-style patches: pink value-noise background, positives
// carry 3..8 dark purple ellipses with at least one centered in the middle
// S/3 window, outliers are nearly-white / nearly-black throwaway frames.
// Sample i depends only on (cfg.seed, i), so generation order and worker
// count never change the bytes.
Dataset generate_dataset(const DataGenConfig& cfg, int workers = 1);
Sample generate_sample(const DataGenConfig& cfg, int index);

// Geometric / photometric primitives (rank-2 or rank-3 tensors).
Tensor rotate90(const Tensor& t, int quarter_turns);
Tensor flip_horizontal(const Tensor& t);
Tensor flip_vertical(const Tensor& t);
// Reflect-pads by `pad` then crops back to the original extents at the given
// offsets, each in [0, 2*pad].
Tensor reflect_pad_crop(const Tensor& t, int pad, int off_y, int off_x);
Tensor adjust_brightness(const Tensor& t, double scale); // clamps to [0, 1]
Tensor gaussian_blur(const Tensor& t, double sigma);     // sigma 0 = identity

struct AugmentConfig {
    double p_rotate = 0.5;
    double p_crop = 0.5;
    double p_hflip = 0.5;
    double p_vflip = 0.5;
    double p_brightness = 0.5;
    double p_blur = 0.5;
    int crop_pad = 8;
    double brightness_lo = 0.8;
    double brightness_hi = 1.2;
    double sigma_max = 1.0;
};

// Applies coin-flipped transforms in a fixed order: rotate, crop, flips,
// brightness, blur. The mask follows the geometric transforms only; the label
// never changes. All probabilities zero = identity.
Sample augment(const Sample& sample, SplitMix64& rng, const AugmentConfig& cfg = {});

struct OutlierFilterResult {
    Dataset kept;
    struct Removed {
        std::string id;
        int label = 0;
        double mean_intensity = 0.0;
    };
    std::vector<Removed> removed;
};

// Drops samples whose mean intensity over all channels falls outside
// (low, high). Order of kept samples is preserved.
OutlierFilterResult filter_outliers(Dataset dataset, double low = 0.05, double high = 0.95);

// Per-class shuffled split; each class contributes round(count * valid_frac)
// samples to the validation side.
std::pair<Dataset, Dataset> stratified_split(Dataset dataset, double valid_frac,
                                             std::uint64_t seed);

// Directory layout: images/<id>.png, labels.csv ("filename,label"),
// optional masks/<id>.png (8-bit gray, 255 = lesion), manifest.json.
Dataset load_image_dir(const std::filesystem::path& images_dir,
                       const std::filesystem::path& labels_csv,
                       const std::optional<std::filesystem::path>& masks_dir = std::nullopt);

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir,
                   const std::string& manifest_json);

double mean_intensity(const Tensor& image);

} // namespace lucidcam
