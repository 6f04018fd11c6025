#include "lucidcam/nn.hpp"

#include <cmath>
#include <gtest/gtest.h>

#include "lucidcam/rng.hpp"

using namespace lucidcam;

namespace {

// Independent nested-loop convolution oracle in double precision.
std::vector<double> conv_oracle(const std::vector<double>& in, int cin, int h, int w,
                                const std::vector<double>& wgt, int cout, int k,
                                const std::vector<double>& bias, int stride, int pad,
                                int oh, int ow) {
    std::vector<double> out(static_cast<std::size_t>(cout) * oh * ow, 0.0);
    for (int oc = 0; oc < cout; ++oc) {
        for (int i = 0; i < oh; ++i) {
            for (int j = 0; j < ow; ++j) {
                double acc = bias[oc];
                for (int ic = 0; ic < cin; ++ic) {
                    for (int ki = 0; ki < k; ++ki) {
                        for (int kj = 0; kj < k; ++kj) {
                            int ih = i * stride + ki - pad;
                            int iw = j * stride + kj - pad;
                            if (ih < 0 || ih >= h || iw < 0 || iw >= w) continue;
                            acc += wgt[((static_cast<std::size_t>(oc) * cin + ic) * k + ki) * k + kj] *
                                   in[(static_cast<std::size_t>(ic) * h + ih) * w + iw];
                        }
                    }
                }
                out[(static_cast<std::size_t>(oc) * oh + i) * ow + j] = acc;
            }
        }
    }
    return out;
}

std::vector<double> to_doubles(const Tensor& t) {
    return std::vector<double>(t.data(), t.data() + t.size());
}

Tensor random_tensor(std::vector<int> shape, SplitMix64& rng, float lo = -1.0f, float hi = 1.0f) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.size(); ++i) {
        t[i] = static_cast<float>(rng.uniform(lo, hi));
    }
    return t;
}

// J(x) = sum_i coef[i] * conv(x)[i]; used to finite-difference the oracle.
double conv_weighted_sum(const std::vector<double>& in, int cin, int h, int w,
                         const std::vector<double>& wgt, int cout, int k,
                         const std::vector<double>& bias, int stride, int pad,
                         int oh, int ow, const std::vector<double>& coef) {
    std::vector<double> out = conv_oracle(in, cin, h, w, wgt, cout, k, bias, stride, pad, oh, ow);
    double j = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) j += coef[i] * out[i];
    return j;
}

} // namespace

TEST(Conv2d, OnesKernelCountsOverlap) {
    // 3x3 ones kernel over a 3x3 ones image with pad 1: each output counts the
    // in-bounds taps, so the center sees 9 and the corners see 4.
    Tensor in({1, 3, 3}, 1.0f);
    Tensor w({1, 1, 3, 3}, 1.0f);
    Tensor b({1}, 0.0f);
    Tensor out = conv2d_forward(in, w, b, 1, 1);
    EXPECT_EQ(out.shape(), (std::vector<int>{1, 3, 3}));
    EXPECT_EQ(out.at(0, 1, 1), 9.0f);
    EXPECT_EQ(out.at(0, 0, 0), 4.0f);
    EXPECT_EQ(out.at(0, 0, 2), 4.0f);
    EXPECT_EQ(out.at(0, 2, 0), 4.0f);
    EXPECT_EQ(out.at(0, 2, 2), 4.0f);
    EXPECT_EQ(out.at(0, 0, 1), 6.0f);
}

TEST(Conv2d, StrideTwoOutputExtent) {
    Tensor in({1, 5, 5}, 1.0f);
    Tensor w({1, 1, 3, 3}, 1.0f);
    Tensor b({1}, 0.0f);
    Tensor out = conv2d_forward(in, w, b, 2, 0);
    EXPECT_EQ(out.shape(), (std::vector<int>{1, 2, 2}));
}

TEST(Conv2d, BiasIsAdded) {
    Tensor in({1, 2, 2}, 0.0f);
    Tensor w({2, 1, 1, 1}, 1.0f);
    Tensor b({2}, std::vector<float>{0.5f, -1.0f});
    Tensor out = conv2d_forward(in, w, b, 1, 0);
    EXPECT_EQ(out.at(0, 0, 0), 0.5f);
    EXPECT_EQ(out.at(1, 1, 1), -1.0f);
}

TEST(Conv2d, MatchesNestedLoopOracle) {
    SplitMix64 rng(101);
    struct Case {
        int cin, h, w, cout, k, stride, pad;
    } cases[] = {
        {2, 5, 5, 3, 3, 1, 1},
        {3, 8, 6, 4, 3, 1, 0},
        {1, 7, 7, 2, 3, 2, 0},
        {2, 6, 6, 2, 2, 2, 1},
    };
    for (const Case& c : cases) {
        Tensor in = random_tensor({c.cin, c.h, c.w}, rng);
        Tensor w = random_tensor({c.cout, c.cin, c.k, c.k}, rng);
        Tensor b = random_tensor({c.cout}, rng);
        Tensor out = conv2d_forward(in, w, b, c.stride, c.pad);
        int oh = out.dim(1), ow = out.dim(2);
        std::vector<double> expect = conv_oracle(to_doubles(in), c.cin, c.h, c.w,
                                                 to_doubles(w), c.cout, c.k,
                                                 to_doubles(b), c.stride, c.pad, oh, ow);
        for (std::int64_t i = 0; i < out.size(); ++i) {
            EXPECT_NEAR(out[i], expect[static_cast<std::size_t>(i)], 1e-5);
        }
    }
}

TEST(Conv2d, BackwardMatchesFiniteDifferencesOfOracle) {
    SplitMix64 rng(202);
    struct Case {
        int cin, h, w, cout, k, stride, pad;
    } cases[] = {
        {2, 5, 5, 3, 3, 1, 1},
        {1, 7, 7, 2, 3, 2, 0},
    };
    for (const Case& c : cases) {
        Tensor in = random_tensor({c.cin, c.h, c.w}, rng);
        Tensor w = random_tensor({c.cout, c.cin, c.k, c.k}, rng);
        Tensor out_probe = conv2d_forward(in, w, Tensor({c.cout}), c.stride, c.pad);
        int oh = out_probe.dim(1), ow = out_probe.dim(2);
        Tensor gout = random_tensor({c.cout, oh, ow}, rng);

        ConvGrads grads = conv2d_backward(in, w, gout, c.stride, c.pad);

        std::vector<double> din = to_doubles(in);
        std::vector<double> dw = to_doubles(w);
        std::vector<double> db(static_cast<std::size_t>(c.cout), 0.0);
        std::vector<double> coef = to_doubles(gout);
        const double eps = 1e-4;
        auto eval = [&]() {
            return conv_weighted_sum(din, c.cin, c.h, c.w, dw, c.cout, c.k, db,
                                     c.stride, c.pad, oh, ow, coef);
        };
        for (std::size_t i = 0; i < din.size(); ++i) {
            double orig = din[i];
            din[i] = orig + eps;
            double up = eval();
            din[i] = orig - eps;
            double down = eval();
            din[i] = orig;
            EXPECT_NEAR(grads.input[static_cast<std::int64_t>(i)], (up - down) / (2 * eps), 1e-4);
        }
        for (std::size_t i = 0; i < dw.size(); ++i) {
            double orig = dw[i];
            dw[i] = orig + eps;
            double up = eval();
            dw[i] = orig - eps;
            double down = eval();
            dw[i] = orig;
            EXPECT_NEAR(grads.weight[static_cast<std::int64_t>(i)], (up - down) / (2 * eps), 1e-4);
        }
        for (std::size_t i = 0; i < db.size(); ++i) {
            double orig = db[i];
            db[i] = orig + eps;
            double up = eval();
            db[i] = orig - eps;
            double down = eval();
            db[i] = orig;
            EXPECT_NEAR(grads.bias[static_cast<std::int64_t>(i)], (up - down) / (2 * eps), 1e-4);
        }
    }
}

TEST(Conv2d, ShapeErrors) {
    Tensor in({2, 4, 4});
    Tensor w({3, 5, 3, 3}); // channel mismatch
    Tensor b({3});
    EXPECT_THROW(conv2d_forward(in, w, b, 1, 1), ShapeError);
    Tensor w2({3, 2, 7, 7}); // kernel larger than padded input
    EXPECT_THROW(conv2d_forward(in, w2, b, 1, 1), ShapeError);
    Tensor w3({3, 2, 3, 3});
    EXPECT_THROW(conv2d_forward(in, w3, b, 2, 0), ShapeError); // (4-3) % 2 != 0
}

TEST(MaxPool, ForwardPicksWindowMax) {
    Tensor in({1, 2, 2}, std::vector<float>{1, 2, 3, 4});
    Tensor out = max_pool2d_forward(in, 2, 2);
    EXPECT_EQ(out.shape(), (std::vector<int>{1, 1, 1}));
    EXPECT_EQ(out[0], 4.0f);
}

TEST(MaxPool, FourByFourGrid) {
    std::vector<float> v(16);
    for (int i = 0; i < 16; ++i) v[static_cast<std::size_t>(i)] = static_cast<float>(i);
    Tensor in({1, 4, 4}, v);
    Tensor out = max_pool2d_forward(in, 2, 2);
    EXPECT_EQ(out.shape(), (std::vector<int>{1, 2, 2}));
    EXPECT_EQ(out.at(0, 0, 0), 5.0f);
    EXPECT_EQ(out.at(0, 0, 1), 7.0f);
    EXPECT_EQ(out.at(0, 1, 0), 13.0f);
    EXPECT_EQ(out.at(0, 1, 1), 15.0f);
}

TEST(MaxPool, TieRoutesToFirstRowMajor) {
    Tensor in({1, 2, 2}, std::vector<float>{5, 5, 5, 5});
    Tensor gout({1, 1, 1}, std::vector<float>{1});
    Tensor gin = max_pool2d_backward(in, gout, 2, 2);
    EXPECT_EQ(gin.at(0, 0, 0), 1.0f);
    EXPECT_EQ(gin.at(0, 0, 1), 0.0f);
    EXPECT_EQ(gin.at(0, 1, 0), 0.0f);
    EXPECT_EQ(gin.at(0, 1, 1), 0.0f);
}

TEST(MaxPool, OverlappingWindowsAccumulate) {
    // kernel 2 stride 1 on 3x3: the global max feeds all windows containing it.
    Tensor in({1, 3, 3}, std::vector<float>{0, 1, 2, 3, 9, 4, 5, 6, 7});
    Tensor gout({1, 2, 2}, 1.0f);
    Tensor gin = max_pool2d_backward(in, gout, 2, 1);
    EXPECT_EQ(gin.at(0, 1, 1), 4.0f); // 9 wins every window
    EXPECT_EQ(tensor_sum(gin), 4.0);
}

TEST(MaxPool, BackwardMatchesWindowScanOracle) {
    SplitMix64 rng(303);
    // Distinct values so no window has ties.
    std::vector<int> order(36);
    for (int i = 0; i < 36; ++i) order[static_cast<std::size_t>(i)] = i;
    shuffle(order, rng);
    Tensor in({1, 6, 6});
    for (int i = 0; i < 36; ++i) in[i] = static_cast<float>(order[static_cast<std::size_t>(i)]);
    Tensor gout = random_tensor({1, 3, 3}, rng);
    Tensor gin = max_pool2d_backward(in, gout, 2, 2);
    // Oracle: scan each window, find argmax, route gradient.
    Tensor expect({1, 6, 6});
    for (int oh = 0; oh < 3; ++oh) {
        for (int ow = 0; ow < 3; ++ow) {
            int bi = 0, bj = 0;
            float best = -1e30f;
            for (int i = 0; i < 2; ++i) {
                for (int j = 0; j < 2; ++j) {
                    float v = in.at(0, oh * 2 + i, ow * 2 + j);
                    if (v > best) {
                        best = v;
                        bi = i;
                        bj = j;
                    }
                }
            }
            expect.at(0, oh * 2 + bi, ow * 2 + bj) += gout.at(0, oh, ow);
        }
    }
    for (std::int64_t i = 0; i < gin.size(); ++i) EXPECT_EQ(gin[i], expect[i]);
}

TEST(MaxPool, IndivisibleExtentsThrow) {
    Tensor in({1, 5, 4});
    EXPECT_THROW(max_pool2d_forward(in, 2, 2), ShapeError);
}

TEST(Relu, ForwardClampsNegatives) {
    Tensor in({3}, std::vector<float>{-1, 0, 2});
    Tensor out = relu_forward(in);
    EXPECT_EQ(out[0], 0.0f);
    EXPECT_EQ(out[1], 0.0f);
    EXPECT_EQ(out[2], 2.0f);
}

TEST(Relu, GradientAtZeroIsZero) {
    Tensor in({3}, std::vector<float>{-1, 0, 2});
    Tensor gout({3}, 1.0f);
    Tensor gin = relu_backward(in, gout);
    EXPECT_EQ(gin[0], 0.0f);
    EXPECT_EQ(gin[1], 0.0f);
    EXPECT_EQ(gin[2], 1.0f);
}

TEST(GlobalAvgPool, MeanPerChannel) {
    Tensor in({1, 2, 2}, std::vector<float>{1, 2, 3, 4});
    Tensor out = global_avg_pool_forward(in);
    EXPECT_EQ(out.shape(), (std::vector<int>{1}));
    EXPECT_EQ(out[0], 2.5f);
}

TEST(GlobalAvgPool, BackwardSpreadsEvenly) {
    Tensor gout({1}, std::vector<float>{1.0f});
    Tensor gin = global_avg_pool_backward({1, 2, 2}, gout);
    for (std::int64_t i = 0; i < gin.size(); ++i) EXPECT_EQ(gin[i], 0.25f);
}

TEST(GlobalAvgPool, TwoChannels) {
    Tensor in({2, 1, 2}, std::vector<float>{2, 4, -1, 1});
    Tensor out = global_avg_pool_forward(in);
    EXPECT_EQ(out[0], 3.0f);
    EXPECT_EQ(out[1], 0.0f);
}

TEST(Dense, HandComputedForward) {
    Tensor x({2}, std::vector<float>{2, 3});
    Tensor w({1, 2}, std::vector<float>{1, 1});
    Tensor b({1}, std::vector<float>{1});
    Tensor y = dense_forward(x, w, b);
    EXPECT_EQ(y.shape(), (std::vector<int>{1}));
    EXPECT_EQ(y[0], 6.0f);
}

TEST(Dense, BackwardMatchesCentralFiniteDifferences) {
    SplitMix64 rng(404);
    const int n_in = 5, n_out = 3;
    Tensor x = random_tensor({n_in}, rng);
    Tensor w = random_tensor({n_out, n_in}, rng);
    Tensor b = random_tensor({n_out}, rng);
    Tensor coef = random_tensor({n_out}, rng);

    DenseGrads grads = dense_backward(x, w, coef);

    std::vector<double> dx = to_doubles(x), dw = to_doubles(w), db = to_doubles(b);
    auto eval = [&]() {
        double j = 0.0;
        for (int o = 0; o < n_out; ++o) {
            double acc = db[static_cast<std::size_t>(o)];
            for (int i = 0; i < n_in; ++i) {
                acc += dw[static_cast<std::size_t>(o * n_in + i)] * dx[static_cast<std::size_t>(i)];
            }
            j += coef[o] * acc;
        }
        return j;
    };
    const double eps = 1e-5;
    for (std::size_t i = 0; i < dx.size(); ++i) {
        double orig = dx[i];
        dx[i] = orig + eps;
        double up = eval();
        dx[i] = orig - eps;
        double down = eval();
        dx[i] = orig;
        EXPECT_NEAR(grads.input[static_cast<std::int64_t>(i)], (up - down) / (2 * eps), 1e-4);
    }
    for (std::size_t i = 0; i < dw.size(); ++i) {
        double orig = dw[i];
        dw[i] = orig + eps;
        double up = eval();
        dw[i] = orig - eps;
        double down = eval();
        dw[i] = orig;
        EXPECT_NEAR(grads.weight[static_cast<std::int64_t>(i)], (up - down) / (2 * eps), 1e-4);
    }
    for (std::int64_t o = 0; o < n_out; ++o) EXPECT_NEAR(grads.bias[o], coef[o], 1e-6);
}

TEST(SoftmaxCrossEntropy, EqualLogits) {
    Tensor logits({2}, std::vector<float>{0, 0});
    EXPECT_NEAR(softmax_cross_entropy(logits, 0), std::log(2.0), 1e-6);
    EXPECT_NEAR(softmax_cross_entropy(logits, 1), std::log(2.0), 1e-6);
}

TEST(SoftmaxCrossEntropy, ConfidentCorrectIsNearZero) {
    Tensor logits({2}, std::vector<float>{10, -10});
    float loss = softmax_cross_entropy(logits, 0);
    EXPECT_NEAR(loss, 2.061154e-9, 1e-12);
}

TEST(SoftmaxCrossEntropy, StableUnderLargeLogits) {
    Tensor logits({2}, std::vector<float>{1000, 999});
    float loss = softmax_cross_entropy(logits, 0);
    EXPECT_TRUE(std::isfinite(loss));
    EXPECT_NEAR(loss, std::log(1.0 + std::exp(-1.0)), 1e-6);
}

TEST(SoftmaxCrossEntropy, GradientIsSoftmaxMinusOneHot) {
    Tensor logits({2}, std::vector<float>{1, -1});
    Tensor grad = softmax_cross_entropy_grad(logits, 0);
    double p0 = 1.0 / (1.0 + std::exp(-2.0));
    EXPECT_NEAR(grad[0], p0 - 1.0, 1e-6);
    EXPECT_NEAR(grad[1], 1.0 - p0, 1e-6);
}

TEST(SoftmaxCrossEntropy, GradientMatchesFiniteDifferences) {
    SplitMix64 rng(505);
    Tensor logits = random_tensor({2}, rng, -2.0f, 2.0f);
    Tensor grad = softmax_cross_entropy_grad(logits, 1);
    const double eps = 1e-4;
    for (int i = 0; i < 2; ++i) {
        Tensor up = logits, down = logits;
        up[i] += static_cast<float>(eps);
        down[i] -= static_cast<float>(eps);
        double fd = (softmax_cross_entropy(up, 1) - softmax_cross_entropy(down, 1)) / (2 * eps);
        EXPECT_NEAR(grad[i], fd, 1e-3);
    }
}

TEST(SoftmaxCrossEntropy, LabelOutOfRangeThrows) {
    Tensor logits({2}, std::vector<float>{0, 0});
    EXPECT_THROW(softmax_cross_entropy(logits, 2), ArgumentError);
    EXPECT_THROW(softmax_cross_entropy(logits, -1), ArgumentError);
    EXPECT_THROW(softmax_cross_entropy_grad(logits, 5), ArgumentError);
}

TEST(Softmax, SumsToOne) {
    Tensor logits({2}, std::vector<float>{3, -1});
    Tensor p = softmax(logits);
    EXPECT_NEAR(p[0] + p[1], 1.0, 1e-6);
    EXPECT_GT(p[0], p[1]);
}
