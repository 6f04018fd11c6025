#include "lucidcam/cam.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "lucidcam/nn.hpp"
#include "lucidcam/rng.hpp"

using namespace lucidcam;

namespace {

Tensor random_image(const ModelSpec& spec, std::uint64_t seed) {
    Tensor img({spec.input_shape[0], spec.input_shape[1], spec.input_shape[2]});
    SplitMix64 rng(seed);
    for (std::int64_t i = 0; i < img.size(); ++i) img[i] = rng.next_float();
    return img;
}

// channels -> channels 1x1 identity conv + relu, then GAP + linear: the
// captured feature maps are exactly the (non-negative) input planes, so tests
// can drive the activations directly.
ModelSpec probe_spec(int channels, int size) {
    ModelSpec spec;
    spec.input_shape = {channels, size, size};
    spec.head_kind = HeadKind::GapLinear;
    spec.layers = {LayerDef::conv2d(channels, channels, 1, 1, 0), LayerDef::relu(),
                   LayerDef::global_avg_pool(), LayerDef::dense(channels, 2)};
    return spec;
}

Parameters probe_params(const ModelSpec& spec, const std::vector<float>& head_row0,
                        const std::vector<float>& head_row1) {
    Parameters params = Parameters::init(spec, 0);
    Tensor& conv_w = params.find("conv0.weight")->value;
    for (std::int64_t i = 0; i < conv_w.size(); ++i) conv_w[i] = 0.0f;
    int channels = spec.input_shape[0];
    // 1x1 kernels: entry (k, k, 0, 0) sits at flat index k * (channels + 1)
    for (int k = 0; k < channels; ++k) conv_w[static_cast<std::int64_t>(k) * (channels + 1)] = 1.0f;
    Tensor& head_w = params.find("dense0.weight")->value;
    for (int k = 0; k < channels; ++k) {
        head_w.at(0, k) = head_row0[static_cast<std::size_t>(k)];
        head_w.at(1, k) = head_row1[static_cast<std::size_t>(k)];
    }
    params.find("dense0.bias")->value = Tensor({2});
    return params;
}

} // namespace

TEST(GradCam, SingleChannelUnitGradientReproducesActivations) {
    ModelSpec spec = probe_spec(1, 6);
    // head weight 36 makes d logit / d cell = 36 / (6*6) = 1 at every cell
    Parameters params = probe_params(spec, {36.0f}, {0.0f});
    Tensor image = random_image(spec, 5);

    Heatmap heat = grad_cam(spec, params, image, 0, 0);
    Tensor plane({6, 6});
    for (int y = 0; y < 6; ++y) {
        for (int x = 0; x < 6; ++x) plane.at(y, x) = image.at(0, y, x);
    }
    Tensor expected = minmax_normalize(plane); // resize 6x6 -> 6x6 is identity
    for (std::int64_t i = 0; i < expected.size(); ++i) {
        EXPECT_NEAR(heat.values[i], expected[i], 1e-6);
    }
    EXPECT_FALSE(heat.all_zero);
    EXPECT_NEAR(heat.raw_max, tensor_max(plane), 1e-6);
    EXPECT_EQ(heat.class_index, 0);
    EXPECT_EQ(heat.layer_id, 0);
}

TEST(GradCam, ZeroHeadRowYieldsAllZeroMap) {
    ModelSpec spec = probe_spec(2, 6);
    Parameters params = probe_params(spec, {0.0f, 0.0f}, {1.0f, 1.0f});
    Tensor image = random_image(spec, 9);

    Heatmap zero = grad_cam(spec, params, image, 0, 0);
    EXPECT_TRUE(zero.all_zero);
    EXPECT_EQ(zero.raw_max, 0.0);
    for (std::int64_t i = 0; i < zero.values.size(); ++i) EXPECT_EQ(zero.values[i], 0.0f);

    Heatmap cam = cam_gap_head(spec, params, image, 0);
    EXPECT_TRUE(cam.all_zero);

    Heatmap live = grad_cam(spec, params, image, 1, 0);
    EXPECT_FALSE(live.all_zero);
    EXPECT_FLOAT_EQ(static_cast<float>(tensor_max(live.values)), 1.0f);
}

TEST(GradCam, AlphasMatchFiniteDifferencesThroughMlpHead) {
    ModelSpec spec = ModelSpec::small_cam_net(32, HeadKind::Mlp);
    Parameters params = Parameters::init(spec, 7);
    Tensor image = random_image(spec, 13);
    int layer_id = spec.last_conv_index();

    ForwardTrace trace = forward_with_capture(spec, params, image, layer_id);
    BackwardResult back = backward_from_logit(trace, 1);
    const Tensor& acts = back.capture.activations;
    int channels = acts.dim(0);
    std::int64_t cells = static_cast<std::int64_t>(acts.dim(1)) * acts.dim(2);

    // double-precision replay of the flatten -> dense -> relu -> dense tail
    const Tensor& w1 = params.find("dense0.weight")->value;
    const Tensor& b1 = params.find("dense0.bias")->value;
    const Tensor& w2 = params.find("dense1.weight")->value;
    const Tensor& b2 = params.find("dense1.bias")->value;
    std::vector<double> flat(acts.size());
    for (std::int64_t i = 0; i < acts.size(); ++i) flat[static_cast<std::size_t>(i)] = acts[i];
    auto tail_logit = [&](const std::vector<double>& x) {
        int hidden = w1.dim(0);
        double logit = b2[1];
        for (int j = 0; j < hidden; ++j) {
            double h = b1[j];
            for (std::size_t i = 0; i < x.size(); ++i) {
                h += static_cast<double>(w1[j * static_cast<int>(x.size()) +
                                            static_cast<std::int64_t>(i)]) * x[i];
            }
            if (h > 0.0) logit += static_cast<double>(w2.at(1, j)) * h;
        }
        return logit;
    };

    const double eps = 1e-5;
    for (int k = 0; k < channels; ++k) {
        double analytic = 0.0, fd = 0.0;
        for (std::int64_t i = 0; i < cells; ++i) {
            std::int64_t idx = k * cells + i;
            analytic += back.capture.gradients[idx];
            double orig = flat[static_cast<std::size_t>(idx)];
            flat[static_cast<std::size_t>(idx)] = orig + eps;
            double up = tail_logit(flat);
            flat[static_cast<std::size_t>(idx)] = orig - eps;
            double down = tail_logit(flat);
            flat[static_cast<std::size_t>(idx)] = orig;
            fd += (up - down) / (2.0 * eps);
        }
        analytic /= static_cast<double>(cells);
        fd /= static_cast<double>(cells);
        double rel = std::fabs(analytic - fd) /
                     std::max({std::fabs(analytic), std::fabs(fd), 1e-8});
        EXPECT_LE(rel, 1e-3) << "channel " << k;
    }
}

TEST(GradCam, MatchesCamOnGapLinearHeads) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        ModelSpec spec = ModelSpec::small_cam_net(48);
        Parameters params = Parameters::init(spec, seed);
        Tensor image = random_image(spec, seed + 100);
        for (int cls = 0; cls < 2; ++cls) {
            Heatmap grad = grad_cam(spec, params, image, cls, spec.last_conv_index());
            Heatmap cam = cam_gap_head(spec, params, image, cls);
            ASSERT_EQ(grad.values.shape(), cam.values.shape());
            EXPECT_EQ(grad.all_zero, cam.all_zero);
            EXPECT_EQ(grad.layer_id, cam.layer_id);
            for (std::int64_t i = 0; i < grad.values.size(); ++i) {
                ASSERT_NEAR(grad.values[i], cam.values[i], 1e-5)
                    << "seed " << seed << " class " << cls << " px " << i;
            }
        }
    }
}

TEST(GradCam, NormalizedMapIgnoresPositiveHeadScaling) {
    ModelSpec spec = ModelSpec::small_cam_net(48);
    Parameters params = Parameters::init(spec, 11);
    Tensor image = random_image(spec, 12);
    Heatmap base = grad_cam(spec, params, image, 1, spec.last_conv_index());

    Tensor& head_w = params.find("dense0.weight")->value;
    for (int k = 0; k < head_w.dim(1); ++k) head_w.at(1, k) *= 7.0f;
    Heatmap scaled = grad_cam(spec, params, image, 1, spec.last_conv_index());

    std::int64_t base_argmax = 0, scaled_argmax = 0;
    for (std::int64_t i = 0; i < base.values.size(); ++i) {
        if (base.values[i] > base.values[base_argmax]) base_argmax = i;
        if (scaled.values[i] > scaled.values[scaled_argmax]) scaled_argmax = i;
        EXPECT_NEAR(base.values[i], scaled.values[i], 1e-5);
    }
    EXPECT_EQ(base_argmax, scaled_argmax);
    EXPECT_NEAR(scaled.raw_max, 7.0 * base.raw_max, 1e-5 * std::fabs(scaled.raw_max));
}

TEST(GradCam, OppositeHeadRowsGiveDisjointSupports) {
    ModelSpec spec = probe_spec(2, 8);
    Parameters params = probe_params(spec, {1.0f, -1.0f}, {-1.0f, 1.0f});
    // channel 0 lights the left two columns, channel 1 the right two; the
    // empty middle keeps the supports separated after resizing
    Tensor image({2, 8, 8});
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 2; ++x) image.at(0, y, x) = 0.5f + 0.05f * static_cast<float>(y);
        for (int x = 6; x < 8; ++x) image.at(1, y, x) = 0.4f + 0.05f * static_cast<float>(x);
    }

    Heatmap left = grad_cam(spec, params, image, 0, 0);
    Heatmap right = grad_cam(spec, params, image, 1, 0);
    EXPECT_FALSE(left.all_zero);
    EXPECT_FALSE(right.all_zero);
    int overlap = 0, left_support = 0, right_support = 0;
    for (std::int64_t i = 0; i < left.values.size(); ++i) {
        if (left.values[i] > 0.0f) ++left_support;
        if (right.values[i] > 0.0f) ++right_support;
        if (left.values[i] > 0.0f && right.values[i] > 0.0f) ++overlap;
    }
    EXPECT_EQ(overlap, 0);
    EXPECT_GT(left_support, 0);
    EXPECT_GT(right_support, 0);
}

TEST(GradCam, ValuesStayNormalizedAtEveryConvLayer) {
    ModelSpec spec = ModelSpec::small_cam_net(48);
    for (std::uint64_t seed = 30; seed < 33; ++seed) {
        Parameters params = Parameters::init(spec, seed);
        Tensor image = random_image(spec, seed);
        for (int layer_id : spec.conv_layer_indices()) {
            Heatmap heat = grad_cam(spec, params, image, 1, layer_id);
            ASSERT_EQ(heat.values.dim(0), 48);
            ASSERT_EQ(heat.values.dim(1), 48);
            EXPECT_GE(tensor_min(heat.values), 0.0);
            EXPECT_LE(tensor_max(heat.values), 1.0);
            if (!heat.all_zero) {
                EXPECT_FLOAT_EQ(static_cast<float>(tensor_max(heat.values)), 1.0f);
            }
            EXPECT_EQ(heat.layer_id, layer_id);
            EXPECT_EQ(heat.class_index, 1);
        }
    }
}

TEST(GradCam, ConstantPositiveMapNormalizesToOnes) {
    ModelSpec spec = probe_spec(1, 6);
    Parameters params = probe_params(spec, {2.0f}, {0.0f});
    Tensor& conv_w = params.find("conv0.weight")->value;
    conv_w[0] = 0.0f;
    params.find("conv0.bias")->value[0] = 5.0f; // feature map is constant 5

    Tensor image = random_image(spec, 3);
    Heatmap heat = grad_cam(spec, params, image, 0, 0);
    EXPECT_FALSE(heat.all_zero);
    for (std::int64_t i = 0; i < heat.values.size(); ++i) EXPECT_EQ(heat.values[i], 1.0f);
    // alpha = 2/36, activation 5 everywhere
    EXPECT_NEAR(heat.raw_max, 10.0 / 36.0, 1e-6);

    Heatmap cam = cam_gap_head(spec, params, image, 0);
    EXPECT_FALSE(cam.all_zero);
    for (std::int64_t i = 0; i < cam.values.size(); ++i) EXPECT_EQ(cam.values[i], 1.0f);
    EXPECT_NEAR(cam.raw_max, 10.0, 1e-6);
}

TEST(GradCam, DeterministicAcrossCalls) {
    ModelSpec spec = ModelSpec::small_cam_net(48);
    Parameters params = Parameters::init(spec, 21);
    Tensor image = random_image(spec, 22);
    Heatmap a = grad_cam(spec, params, image, 0, spec.last_conv_index());
    Heatmap b = grad_cam(spec, params, image, 0, spec.last_conv_index());
    for (std::int64_t i = 0; i < a.values.size(); ++i) EXPECT_EQ(a.values[i], b.values[i]);
    EXPECT_EQ(a.raw_max, b.raw_max);
}

TEST(GradCam, RejectsBadLayerAndClass) {
    ModelSpec spec = ModelSpec::small_cam_net(48);
    Parameters params = Parameters::init(spec, 1);
    Tensor image = random_image(spec, 2);
    EXPECT_THROW(grad_cam(spec, params, image, 0, 1), ArgumentError);  // relu layer
    EXPECT_THROW(grad_cam(spec, params, image, 0, 99), ArgumentError); // out of range
    EXPECT_THROW(grad_cam(spec, params, image, 2, 0), ArgumentError);  // bad class

    ModelSpec mlp = ModelSpec::small_cam_net(48, HeadKind::Mlp);
    Parameters mlp_params = Parameters::init(mlp, 1);
    EXPECT_THROW(cam_gap_head(mlp, mlp_params, random_image(mlp, 3), 0), ArgumentError);
    EXPECT_THROW(cam_gap_head(spec, params, image, -1), ArgumentError);
}

TEST(Localization, FullAndEmptyMasks) {
    Heatmap heat;
    heat.values = Tensor({4, 4});
    for (std::int64_t i = 0; i < 16; ++i) heat.values[i] = 0.1f * static_cast<float>(i + 1);

    Tensor full({4, 4});
    for (std::int64_t i = 0; i < 16; ++i) full[i] = 1.0f;
    LocalizationScore on = localization_score(heat, full, 8);
    EXPECT_DOUBLE_EQ(on.mass_fraction, 1.0);
    EXPECT_TRUE(on.hit);

    Tensor empty({4, 4});
    LocalizationScore off = localization_score(heat, empty, 8);
    EXPECT_DOUBLE_EQ(off.mass_fraction, 0.0);
    EXPECT_FALSE(off.hit);
}

TEST(Localization, SquareDilationAndArgmaxHit) {
    Heatmap heat;
    heat.values = Tensor({4, 4});
    heat.values.at(0, 1) = 1.0f;
    heat.values.at(3, 3) = 3.0f;
    Tensor mask({4, 4});
    mask.at(0, 0) = 1.0f;

    // dilation 1 grows the corner cell into a 2x2 block containing (0,1)
    LocalizationScore d1 = localization_score(heat, mask, 1);
    EXPECT_NEAR(d1.mass_fraction, 0.25, 1e-6);
    EXPECT_FALSE(d1.hit); // argmax (3,3) stays outside

    LocalizationScore d0 = localization_score(heat, mask, 0);
    EXPECT_DOUBLE_EQ(d0.mass_fraction, 0.0);
    EXPECT_FALSE(d0.hit);

    Tensor center({4, 4});
    center.at(2, 2) = 1.0f;
    Heatmap peak;
    peak.values = Tensor({4, 4});
    peak.values.at(1, 1) = 1.0f; // inside the 3x3 dilated block
    LocalizationScore hit = localization_score(peak, center, 1);
    EXPECT_DOUBLE_EQ(hit.mass_fraction, 1.0);
    EXPECT_TRUE(hit.hit);
}

TEST(Localization, TiesPickFirstRowMajorCell) {
    Heatmap flat;
    flat.values = Tensor({3, 3});
    for (std::int64_t i = 0; i < 9; ++i) flat.values[i] = 0.5f;
    Tensor corner({3, 3});
    corner.at(0, 0) = 1.0f;
    EXPECT_TRUE(localization_score(flat, corner, 0).hit);

    Tensor elsewhere({3, 3});
    elsewhere.at(2, 2) = 1.0f;
    EXPECT_FALSE(localization_score(flat, elsewhere, 0).hit);
}

TEST(Localization, ZeroMapAndBadArguments) {
    Heatmap zero;
    zero.values = Tensor({4, 4});
    zero.all_zero = true;
    Tensor full({4, 4});
    for (std::int64_t i = 0; i < 16; ++i) full[i] = 1.0f;
    EXPECT_DOUBLE_EQ(localization_score(zero, full, 2).mass_fraction, 0.0);

    Heatmap heat;
    heat.values = Tensor({4, 4});
    EXPECT_THROW(localization_score(heat, Tensor({3, 4}), 1), ArgumentError);
    EXPECT_THROW(localization_score(heat, full, -1), ArgumentError);
}

TEST(TopLosses, RanksByLossDescending) {
    ModelSpec spec = probe_spec(2, 4);
    Parameters params = probe_params(spec, {1.0f, 0.0f}, {0.0f, 1.0f});

    auto sample = [&](float ch0, float ch1, int label, std::string id) {
        Sample s;
        s.image = Tensor({2, 4, 4});
        for (int y = 0; y < 4; ++y) {
            for (int x = 0; x < 4; ++x) {
                s.image.at(0, y, x) = ch0;
                s.image.at(1, y, x) = ch1;
            }
        }
        s.label = label;
        s.id = std::move(id);
        return s;
    };
    // logits are the per-channel means, so losses are known in closed form
    Dataset data;
    data.push_back(sample(1.0f, 0.0f, 1, "b"));
    data.push_back(sample(3.0f, 0.0f, 1, "a"));
    data.push_back(sample(0.0f, 0.4f, 1, "c"));

    std::vector<LossEntry> ranked = top_losses(spec, params, data, 3);
    ASSERT_EQ(ranked.size(), 3u);
    EXPECT_EQ(ranked[0].id, "a");
    EXPECT_EQ(ranked[1].id, "b");
    EXPECT_EQ(ranked[2].id, "c");
    EXPECT_EQ(ranked[0].predicted, 0);
    EXPECT_EQ(ranked[0].actual, 1);
    EXPECT_NEAR(ranked[0].loss, std::log(1.0 + std::exp(3.0)), 1e-5);
    EXPECT_NEAR(ranked[0].probability, std::exp(3.0) / (1.0 + std::exp(3.0)), 1e-5);
    EXPECT_EQ(ranked[2].predicted, 1);
    EXPECT_NEAR(ranked[2].loss, std::log(1.0 + std::exp(-0.4)), 1e-5);

    std::vector<LossEntry> top2 = top_losses(spec, params, data, 2);
    ASSERT_EQ(top2.size(), 2u);
    EXPECT_EQ(top2[0].id, "a");
    EXPECT_EQ(top2[1].id, "b");

    // k larger than the dataset returns the full ranking
    EXPECT_EQ(top_losses(spec, params, data, 10).size(), 3u);
    Dataset one{data[0]};
    EXPECT_EQ(top_losses(spec, params, one, 5).at(0).id, "b");
}

TEST(TopLosses, TiesOrderByIdAscending) {
    ModelSpec spec = probe_spec(2, 4);
    Parameters params = probe_params(spec, {0.0f, 0.0f}, {0.0f, 0.0f});
    Dataset data;
    for (const char* id : {"s3", "s1", "s2"}) {
        Sample s;
        s.image = Tensor({2, 4, 4});
        s.label = 0;
        s.id = id;
        data.push_back(std::move(s));
    }
    std::vector<LossEntry> ranked = top_losses(spec, params, data, 3);
    ASSERT_EQ(ranked.size(), 3u);
    EXPECT_EQ(ranked[0].id, "s1");
    EXPECT_EQ(ranked[1].id, "s2");
    EXPECT_EQ(ranked[2].id, "s3");
    EXPECT_NEAR(ranked[0].loss, std::log(2.0), 1e-6);
    EXPECT_NEAR(ranked[0].probability, 0.5, 1e-6);
}

TEST(TopLosses, RejectsBadArguments) {
    ModelSpec spec = probe_spec(2, 4);
    Parameters params = probe_params(spec, {1.0f, 0.0f}, {0.0f, 1.0f});
    Sample s;
    s.image = Tensor({2, 4, 4});
    Dataset data{s};
    EXPECT_THROW(top_losses(spec, params, data, 0), ArgumentError);
    EXPECT_THROW(top_losses(spec, params, {}, 3), DataError);
}
