#include "lucidcam/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <thread>

namespace lucidcam {

void DataGenConfig::validate() const {
    if (n_samples < 1) throw ArgumentError("n_samples must be at least 1");
    if (size < 16) throw ArgumentError("patch size must be at least 16");
    if (pos_frac < 0.0 || pos_frac > 1.0) throw ArgumentError("pos_frac must be in [0, 1]");
    if (bright_outlier_frac < 0.0 || dark_outlier_frac < 0.0) {
        throw ArgumentError("outlier fractions must be non-negative");
    }
    if (pos_frac + bright_outlier_frac + dark_outlier_frac > 1.0) {
        throw ArgumentError("pos_frac plus outlier fractions must not exceed 1");
    }
}

DataGenPlan DataGenPlan::from_config(const DataGenConfig& cfg) {
    cfg.validate();
    DataGenPlan plan;
    plan.n_pos = static_cast<int>(std::lround(cfg.n_samples * cfg.pos_frac));
    plan.n_bright = static_cast<int>(std::lround(cfg.n_samples * cfg.bright_outlier_frac));
    plan.n_dark = static_cast<int>(std::lround(cfg.n_samples * cfg.dark_outlier_frac));
    plan.n_plain_neg = cfg.n_samples - plan.n_pos - plan.n_bright - plan.n_dark;
    if (plan.n_plain_neg < 0) {
        throw ArgumentError("rounded class counts exceed n_samples");
    }
    return plan;
}

DataGenPlan::Kind DataGenPlan::kind_of(int index) const {
    if (index < n_pos) return Kind::Positive;
    if (index < n_pos + n_plain_neg) return Kind::Negative;
    if (index < n_pos + n_plain_neg + n_bright) return Kind::BrightOutlier;
    return Kind::DarkOutlier;
}

namespace {

std::string sample_id(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "s%06d", index);
    return buf;
}

// Eosin-like background: coarse value noise stretched over the patch and
// mapped between two pinks, with a little per-pixel luminance jitter.
Tensor pink_background(int size, SplitMix64& rng) {
    const int grid_n = 7;
    Tensor grid({grid_n, grid_n});
    for (std::int64_t i = 0; i < grid.size(); ++i) {
        grid[i] = static_cast<float>(rng.next_double());
    }
    Tensor noise = bilinear_resize(grid, size, size);
    const double light[3] = {0.96, 0.82, 0.90};
    const double deep[3] = {0.80, 0.55, 0.72};
    Tensor img({3, size, size});
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            double n = noise.at(y, x);
            double jitter = rng.uniform(-0.015, 0.015);
            for (int c = 0; c < 3; ++c) {
                double v = deep[c] + (light[c] - deep[c]) * n + jitter;
                img.at(c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        }
    }
    return img;
}

void stamp_ellipse(Tensor& img, Tensor& mask, double cx, double cy, double rx, double ry,
                   double theta, const double color[3]) {
    int size = mask.dim(0);
    double r = std::max(rx, ry);
    int y0 = std::max(0, static_cast<int>(std::floor(cy - r)));
    int y1 = std::min(size - 1, static_cast<int>(std::ceil(cy + r)));
    int x0 = std::max(0, static_cast<int>(std::floor(cx - r)));
    int x1 = std::min(size - 1, static_cast<int>(std::ceil(cx + r)));
    double ct = std::cos(theta), st = std::sin(theta);
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            double dx = x - cx, dy = y - cy;
            double u = (dx * ct + dy * st) / rx;
            double v = (-dx * st + dy * ct) / ry;
            if (u * u + v * v <= 1.0) {
                for (int c = 0; c < 3; ++c) {
                    img.at(c, y, x) = static_cast<float>(color[c]);
                }
                mask.at(y, x) = 1.0f;
            }
        }
    }
}

Sample positive_sample(const DataGenConfig& cfg, SplitMix64& rng) {
    int size = cfg.size;
    Sample s;
    s.image = pink_background(size, rng);
    s.mask = Tensor({size, size});
    int n_ellipses = rng.range_int(3, 8);
    int window = size / 3;
    double window_lo = (size - window) / 2;
    double margin = size / 12.0;
    for (int e = 0; e < n_ellipses; ++e) {
        double cx, cy;
        if (e == 0) {
            // The defining lesion sits inside the central third of the patch.
            cx = rng.uniform(window_lo, window_lo + window);
            cy = rng.uniform(window_lo, window_lo + window);
        } else {
            cx = rng.uniform(margin, size - margin);
            cy = rng.uniform(margin, size - margin);
        }
        double rx = rng.uniform(size / 16.0, size / 8.0);
        double ry = rng.uniform(size / 16.0, size / 8.0);
        double theta = rng.uniform(0.0, 3.14159265358979323846);
        double color[3] = {
            std::clamp(0.38 + rng.uniform(-0.06, 0.06), 0.0, 1.0),
            std::clamp(0.22 + rng.uniform(-0.05, 0.05), 0.0, 1.0),
            std::clamp(0.45 + rng.uniform(-0.06, 0.06), 0.0, 1.0),
        };
        stamp_ellipse(s.image, *s.mask, cx, cy, rx, ry, theta, color);
    }
    s.label = 1;
    return s;
}

Sample flat_noise_sample(int size, SplitMix64& rng, double lo, double hi) {
    Sample s;
    s.image = Tensor({3, size, size});
    for (std::int64_t i = 0; i < s.image.size(); ++i) {
        s.image[i] = static_cast<float>(rng.uniform(lo, hi));
    }
    s.label = 0;
    return s;
}

} // namespace

Sample generate_sample(const DataGenConfig& cfg, int index) {
    DataGenPlan plan = DataGenPlan::from_config(cfg);
    if (index < 0 || index >= cfg.n_samples) {
        throw ArgumentError("sample index out of range");
    }
    SplitMix64 rng = substream(cfg.seed, static_cast<std::uint64_t>(index));
    Sample s;
    switch (plan.kind_of(index)) {
    case DataGenPlan::Kind::Positive:
        s = positive_sample(cfg, rng);
        break;
    case DataGenPlan::Kind::Negative:
        s.image = pink_background(cfg.size, rng);
        s.label = 0;
        break;
    case DataGenPlan::Kind::BrightOutlier:
        s = flat_noise_sample(cfg.size, rng, 0.97, 1.0);
        break;
    case DataGenPlan::Kind::DarkOutlier:
        s = flat_noise_sample(cfg.size, rng, 0.0, 0.03);
        break;
    }
    s.id = sample_id(index);
    return s;
}

Dataset generate_dataset(const DataGenConfig& cfg, int workers) {
    cfg.validate();
    if (workers < 1) throw ArgumentError("workers must be at least 1");
    Dataset out(static_cast<std::size_t>(cfg.n_samples));
    if (workers == 1) {
        for (int i = 0; i < cfg.n_samples; ++i) out[static_cast<std::size_t>(i)] = generate_sample(cfg, i);
        return out;
    }
    std::vector<std::thread> pool;
    std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(workers),
                                                  static_cast<std::size_t>(cfg.n_samples));
    for (std::size_t t = 0; t < n_threads; ++t) {
        pool.emplace_back([&, t]() {
            for (int i = static_cast<int>(t); i < cfg.n_samples; i += static_cast<int>(n_threads)) {
                out[static_cast<std::size_t>(i)] = generate_sample(cfg, i);
            }
        });
    }
    for (std::thread& th : pool) th.join();
    return out;
}

namespace {

void require_image_rank(const Tensor& t, const char* what) {
    if (t.rank() != 2 && t.rank() != 3) {
        throw ShapeError(std::string(what) + " expects a rank-2 or rank-3 tensor");
    }
}

int plane_count(const Tensor& t) { return t.rank() == 3 ? t.dim(0) : 1; }
int height_of(const Tensor& t) { return t.rank() == 3 ? t.dim(1) : t.dim(0); }
int width_of(const Tensor& t) { return t.rank() == 3 ? t.dim(2) : t.dim(1); }

// Mirror an out-of-range coordinate back inside [0, n) without repeating the
// edge pixel.
int reflect_index(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}

} // namespace

Tensor rotate90(const Tensor& t, int quarter_turns) {
    require_image_rank(t, "rotate90");
    int k = ((quarter_turns % 4) + 4) % 4;
    if (k == 0) return t;
    int c = plane_count(t), h = height_of(t), w = width_of(t);
    int oh = (k % 2 == 0) ? h : w;
    int ow = (k % 2 == 0) ? w : h;
    Tensor out(t.rank() == 3 ? std::vector<int>{c, oh, ow} : std::vector<int>{oh, ow});
    const float* src = t.data();
    float* dst = out.data();
    for (int p = 0; p < c; ++p) {
        const float* sp = src + static_cast<std::size_t>(p) * h * w;
        float* dp = dst + static_cast<std::size_t>(p) * oh * ow;
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                int sy, sx;
                switch (k) {
                case 1: sy = h - 1 - x; sx = y; break;          // 90 degrees clockwise
                case 2: sy = h - 1 - y; sx = w - 1 - x; break;
                default: sy = x; sx = w - 1 - y; break;         // 270 degrees clockwise
                }
                dp[static_cast<std::size_t>(y) * ow + x] = sp[static_cast<std::size_t>(sy) * w + sx];
            }
        }
    }
    return out;
}

Tensor flip_horizontal(const Tensor& t) {
    require_image_rank(t, "flip_horizontal");
    int c = plane_count(t), h = height_of(t), w = width_of(t);
    Tensor out(t.shape());
    for (int p = 0; p < c; ++p) {
        const float* sp = t.data() + static_cast<std::size_t>(p) * h * w;
        float* dp = out.data() + static_cast<std::size_t>(p) * h * w;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                dp[static_cast<std::size_t>(y) * w + x] = sp[static_cast<std::size_t>(y) * w + (w - 1 - x)];
            }
        }
    }
    return out;
}

Tensor flip_vertical(const Tensor& t) {
    require_image_rank(t, "flip_vertical");
    int c = plane_count(t), h = height_of(t), w = width_of(t);
    Tensor out(t.shape());
    for (int p = 0; p < c; ++p) {
        const float* sp = t.data() + static_cast<std::size_t>(p) * h * w;
        float* dp = out.data() + static_cast<std::size_t>(p) * h * w;
        for (int y = 0; y < h; ++y) {
            const float* srow = sp + static_cast<std::size_t>(h - 1 - y) * w;
            float* drow = dp + static_cast<std::size_t>(y) * w;
            for (int x = 0; x < w; ++x) drow[x] = srow[x];
        }
    }
    return out;
}

Tensor reflect_pad_crop(const Tensor& t, int pad, int off_y, int off_x) {
    require_image_rank(t, "reflect_pad_crop");
    int c = plane_count(t), h = height_of(t), w = width_of(t);
    if (pad < 0 || pad > std::min(h, w) - 1) {
        throw ArgumentError("reflect_pad_crop pad must be in [0, min(h, w) - 1]");
    }
    if (off_y < 0 || off_y > 2 * pad || off_x < 0 || off_x > 2 * pad) {
        throw ArgumentError("crop offsets must lie in [0, 2 * pad]");
    }
    Tensor out(t.shape());
    for (int p = 0; p < c; ++p) {
        const float* sp = t.data() + static_cast<std::size_t>(p) * h * w;
        float* dp = out.data() + static_cast<std::size_t>(p) * h * w;
        for (int y = 0; y < h; ++y) {
            int sy = reflect_index(y + off_y - pad, h);
            for (int x = 0; x < w; ++x) {
                int sx = reflect_index(x + off_x - pad, w);
                dp[static_cast<std::size_t>(y) * w + x] = sp[static_cast<std::size_t>(sy) * w + sx];
            }
        }
    }
    return out;
}

Tensor adjust_brightness(const Tensor& t, double scale) {
    if (scale < 0.0) throw ArgumentError("brightness scale must be non-negative");
    Tensor out(t.shape());
    for (std::int64_t i = 0; i < t.size(); ++i) {
        out[i] = static_cast<float>(std::clamp(t[i] * scale, 0.0, 1.0));
    }
    return out;
}

Tensor gaussian_blur(const Tensor& t, double sigma) {
    require_image_rank(t, "gaussian_blur");
    if (sigma < 0.0) throw ArgumentError("blur sigma must be non-negative");
    if (sigma == 0.0) return t;
    int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double total = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        double v = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
        kernel[static_cast<std::size_t>(i + radius)] = v;
        total += v;
    }
    for (double& v : kernel) v /= total;

    int c = plane_count(t), h = height_of(t), w = width_of(t);
    Tensor tmp(t.shape());
    Tensor out(t.shape());
    for (int p = 0; p < c; ++p) {
        const float* sp = t.data() + static_cast<std::size_t>(p) * h * w;
        float* mp = tmp.data() + static_cast<std::size_t>(p) * h * w;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    acc += kernel[static_cast<std::size_t>(i + radius)] *
                           sp[static_cast<std::size_t>(y) * w + reflect_index(x + i, w)];
                }
                mp[static_cast<std::size_t>(y) * w + x] = static_cast<float>(acc);
            }
        }
        float* op = out.data() + static_cast<std::size_t>(p) * h * w;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    acc += kernel[static_cast<std::size_t>(i + radius)] *
                           mp[static_cast<std::size_t>(reflect_index(y + i, h)) * w + x];
                }
                op[static_cast<std::size_t>(y) * w + x] = static_cast<float>(acc);
            }
        }
    }
    return out;
}

Sample augment(const Sample& sample, SplitMix64& rng, const AugmentConfig& cfg) {
    Sample out = sample;
    auto geometric = [&](auto&& fn) {
        out.image = fn(out.image);
        if (out.mask) out.mask = fn(*out.mask);
    };
    if (rng.next_double() < cfg.p_rotate) {
        int k = rng.range_int(0, 3);
        geometric([&](const Tensor& t) { return rotate90(t, k); });
    }
    if (rng.next_double() < cfg.p_crop) {
        int off_y = rng.range_int(0, 2 * cfg.crop_pad);
        int off_x = rng.range_int(0, 2 * cfg.crop_pad);
        geometric([&](const Tensor& t) { return reflect_pad_crop(t, cfg.crop_pad, off_y, off_x); });
    }
    if (rng.next_double() < cfg.p_hflip) {
        geometric([](const Tensor& t) { return flip_horizontal(t); });
    }
    if (rng.next_double() < cfg.p_vflip) {
        geometric([](const Tensor& t) { return flip_vertical(t); });
    }
    if (rng.next_double() < cfg.p_brightness) {
        double scale = rng.uniform(cfg.brightness_lo, cfg.brightness_hi);
        out.image = adjust_brightness(out.image, scale);
    }
    if (rng.next_double() < cfg.p_blur) {
        double sigma = rng.uniform(0.0, cfg.sigma_max);
        out.image = gaussian_blur(out.image, sigma);
    }
    return out;
}

double mean_intensity(const Tensor& image) { return tensor_mean(image); }

OutlierFilterResult filter_outliers(Dataset dataset, double low, double high) {
    if (low >= high) throw ArgumentError("outlier thresholds must satisfy low < high");
    OutlierFilterResult result;
    result.kept.reserve(dataset.size());
    for (Sample& s : dataset) {
        double mean = mean_intensity(s.image);
        if (mean < low || mean > high) {
            result.removed.push_back({s.id, s.label, mean});
        } else {
            result.kept.push_back(std::move(s));
        }
    }
    return result;
}

std::pair<Dataset, Dataset> stratified_split(Dataset dataset, double valid_frac,
                                             std::uint64_t seed) {
    if (!(valid_frac > 0.0 && valid_frac < 1.0)) {
        throw ArgumentError("valid_frac must be strictly between 0 and 1");
    }
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        int label = dataset[i].label;
        if (label != 0 && label != 1) {
            throw DataError("labels must be 0 or 1, sample " + dataset[i].id);
        }
        by_class[label].push_back(i);
    }
    if (by_class[0].empty() || by_class[1].empty()) {
        throw DataError("stratified split needs both classes present");
    }
    std::vector<bool> to_valid(dataset.size(), false);
    for (int label = 0; label < 2; ++label) {
        SplitMix64 rng = substream(seed, static_cast<std::uint64_t>(label));
        std::vector<std::size_t>& idx = by_class[label];
        shuffle(idx, rng);
        std::size_t n_valid = static_cast<std::size_t>(
            std::lround(static_cast<double>(idx.size()) * valid_frac));
        n_valid = std::min(n_valid, idx.size());
        for (std::size_t i = 0; i < n_valid; ++i) to_valid[idx[i]] = true;
    }
    Dataset train, valid;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        (to_valid[i] ? valid : train).push_back(std::move(dataset[i]));
    }
    return {std::move(train), std::move(valid)};
}

} // namespace lucidcam
