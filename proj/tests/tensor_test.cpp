#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "srocr/random.hpp"
#include "srocr/tensor_ops.hpp"

namespace srocr::tensor {
namespace {

template <typename T = float>
BasicTensor<T> random_tensor(Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Rng rng(seed);
    BasicTensor<T> t(s);
    for (auto& v : t.data()) v = static_cast<T>(lo + (hi - lo) * rng.uniform());
    return t;
}

// Direct loop oracle: accumulate over input channel, then kernel row, then
// kernel column, reading zero outside the input; bias added last.
Tensor conv_oracle(const Tensor& x, const Tensor& w, const Tensor* b, const ConvSpec& s) {
    const auto& xs = x.shape();
    const std::int64_t oh = (xs.h + 2 * s.padding - s.kernel_size) / s.stride + 1;
    const std::int64_t ow = (xs.w + 2 * s.padding - s.kernel_size) / s.stride + 1;
    Tensor out(Shape{xs.n, s.out_channels, oh, ow});
    for (std::int64_t n = 0; n < xs.n; ++n)
        for (std::int64_t oc = 0; oc < s.out_channels; ++oc)
            for (std::int64_t oy = 0; oy < oh; ++oy)
                for (std::int64_t ox = 0; ox < ow; ++ox) {
                    float acc = 0.0f;
                    for (std::int64_t ic = 0; ic < s.in_channels; ++ic)
                        for (std::int64_t ky = 0; ky < s.kernel_size; ++ky)
                            for (std::int64_t kx = 0; kx < s.kernel_size; ++kx) {
                                const std::int64_t iy = oy * s.stride - s.padding + ky;
                                const std::int64_t ix = ox * s.stride - s.padding + kx;
                                if (iy < 0 || ix < 0 || iy >= xs.h || ix >= xs.w) continue;
                                acc += w.at(oc, ic, ky, kx) * x.at(n, ic, iy, ix);
                            }
                    out.at(n, oc, oy, ox) = b ? acc + (*b)[static_cast<std::size_t>(oc)] : acc;
                }
    return out;
}

TEST(Conv2d, IdentityKernelReturnsInput) {
    const Tensor x = random_tensor(Shape{1, 1, 3, 3}, 1);
    const Tensor k(Shape{1, 1, 1, 1}, 1.0f);
    const Tensor y = conv2d(x, k, nullptr, ConvSpec{1, 1, 1, 1, 0, false});
    EXPECT_EQ(y, x);
}

TEST(Conv2d, AllOnesKernelSumsElements) {
    const Tensor x(Shape{1, 1, 2, 2}, {1, 2, 3, 4});
    const Tensor k(Shape{1, 1, 2, 2}, 1.0f);
    const Tensor y = conv2d(x, k, nullptr, ConvSpec{1, 1, 2, 1, 0, false});
    ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
    EXPECT_EQ(y[0], 10.0f);
}

TEST(Conv2d, MatchesLoopOracleBitExactly) {
    const Tensor x = random_tensor(Shape{1, 3, 8, 8}, 2);
    const ConvSpec spec{3, 4, 3, 1, 1, true};
    const Tensor w = random_tensor(spec.weight_shape(), 3);
    const Tensor b = random_tensor(Shape::vector(4), 4);
    EXPECT_EQ(conv2d(x, w, &b, spec), conv_oracle(x, w, &b, spec));
}

TEST(Conv2d, StridedAndPaddedVariantsMatchOracle) {
    for (const ConvSpec spec : {ConvSpec{2, 3, 3, 2, 1, true}, ConvSpec{2, 3, 5, 1, 2, false},
                                ConvSpec{2, 2, 3, 3, 0, true}, ConvSpec{2, 1, 4, 2, 3, true}}) {
        const Tensor x = random_tensor(Shape{2, 2, 9, 7}, 5);
        const Tensor w = random_tensor(spec.weight_shape(), 6);
        const Tensor b = random_tensor(Shape::vector(spec.out_channels), 7);
        const Tensor* bias = spec.bias ? &b : nullptr;
        EXPECT_EQ(conv2d(x, w, bias, spec), conv_oracle(x, w, bias, spec))
            << "k=" << spec.kernel_size << " s=" << spec.stride << " p=" << spec.padding;
    }
}

TEST(Conv2d, OutputShapeFormula) {
    const Tensor x(Shape{2, 3, 10, 7});
    const ConvSpec spec{3, 5, 3, 2, 1, false};
    const Tensor y = conv2d(x, Tensor(spec.weight_shape()), nullptr, spec);
    EXPECT_EQ(y.shape(), (Shape{2, 5, 5, 4}));
}

TEST(Conv2d, RejectsShapeMismatch) {
    const ConvSpec spec{3, 4, 3, 1, 1, false};
    EXPECT_THROW(conv2d(Tensor(Shape{1, 2, 8, 8}), Tensor(spec.weight_shape()), nullptr, spec), ShapeError);
    EXPECT_THROW(conv2d(Tensor(Shape{1, 3, 8, 8}), Tensor(Shape{4, 3, 2, 2}), nullptr, spec), ShapeError);
    const ConvSpec biased{3, 4, 3, 1, 1, true};
    const Tensor short_bias(Shape::vector(3));
    EXPECT_THROW(conv2d(Tensor(Shape{1, 3, 8, 8}), Tensor(biased.weight_shape()), &short_bias, biased), ShapeError);
    EXPECT_THROW(conv2d(Tensor(Shape{1, 3, 8, 8}), Tensor(biased.weight_shape()), nullptr, biased), ShapeError);
}

TEST(Conv2d, RejectsInvalidSpec) {
    EXPECT_THROW((ConvSpec{1, 1, 0, 1, 0, false}.validate()), ShapeError);
    EXPECT_THROW((ConvSpec{1, 1, 3, 0, 0, false}.validate()), ShapeError);
    EXPECT_THROW((ConvSpec{1, 1, 3, 1, -1, false}.validate()), ShapeError);
}

TEST(Conv2d, LinearInInputWithoutBias) {
    const ConvSpec spec{3, 4, 3, 1, 1, false};
    const Tensor w = random_tensor(spec.weight_shape(), 8);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Tensor x = random_tensor(Shape{1, 3, 6, 6}, 100 + seed);
        const double alpha = 0.25 + static_cast<double>(seed);
        const Tensor lhs = conv2d(scale(x, alpha), w, nullptr, spec);
        const Tensor rhs = scale(conv2d(x, w, nullptr, spec), alpha);
        // Rounding error is bounded by the magnitude of the summed terms
        // (27 products of values in [-1, 1]), not by the result.
        for (std::size_t i = 0; i < lhs.size(); ++i) EXPECT_NEAR(lhs[i], rhs[i], 27 * alpha * 1e-6);
    }
}

TEST(Activation, DefinitionPoints) {
    const Tensor x(Shape::vector(1), {-2.0f});
    EXPECT_EQ(activation(Activation::prelu(0.25), x)[0], -0.5f);
    EXPECT_EQ(activation(Activation::sigmoid(), Tensor(Shape::vector(1), {0.0f}))[0], 0.5f);
    EXPECT_EQ(activation(Activation::relu(), x)[0], 0.0f);
}

TEST(Activation, LeakyReluMatchesScalarOracle) {
    const Tensor x = random_tensor(Shape{2, 3, 5, 5}, 9, -3, 3);
    const Tensor y = activation(Activation::leaky_relu(0.2), x);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const float v = x[i];
        EXPECT_EQ(y[i], v < 0 ? 0.2f * v : v);
    }
}

TEST(Activation, RangeProperties) {
    const Tensor x = random_tensor(Shape{1, 4, 16, 16}, 10, -60, 60);
    for (const float v : activation(Activation::relu(), x).data()) EXPECT_GE(v, 0.0f);
    for (const float v : activation(Activation::sigmoid(), x).data()) {
        EXPECT_GT(v, 0.0f);
        EXPECT_LT(v, 1.0f);
    }
    const Tensor extreme(Shape::vector(2), {-1000.0f, 1000.0f});
    const Tensor s = activation(Activation::sigmoid(), extreme);
    EXPECT_GT(s[0], 0.0f);
    EXPECT_LT(s[1], 1.0f);
}

TEST(Activation, RejectsNonFinite) {
    const Tensor x(Shape::vector(2), {1.0f, std::nanf("")});
    EXPECT_THROW(activation(Activation::relu(), x), DomainError);
    EXPECT_THROW(activation(Activation::prelu(std::nan("")), Tensor(Shape::vector(1))), DomainError);
}

TEST(BatchNorm, IdentityAndAffine) {
    const Tensor x = random_tensor(Shape{2, 3, 4, 4}, 11);
    const Tensor ones(Shape::vector(3), 1.0f), zeros(Shape::vector(3), 0.0f);
    EXPECT_EQ(batch_norm_infer(x, ones, zeros, zeros, ones, 0.0), x);

    const Tensor v(Shape{1, 1, 1, 1}, {3.0f});
    const Tensor g(Shape::vector(1), {2.0f}), b(Shape::vector(1), {1.0f});
    const Tensor m(Shape::vector(1), {0.0f}), var(Shape::vector(1), {1.0f});
    EXPECT_EQ(batch_norm_infer(v, g, b, m, var, 0.0)[0], 7.0f);
}

TEST(BatchNorm, MatchesPerElementOracle) {
    const Tensor x = random_tensor(Shape{2, 3, 4, 5}, 12);
    const Tensor g = random_tensor(Shape::vector(3), 13);
    const Tensor b = random_tensor(Shape::vector(3), 14);
    const Tensor m = random_tensor(Shape::vector(3), 15);
    const Tensor var = random_tensor(Shape::vector(3), 16, 0.1, 2.0);
    const Tensor y = batch_norm_infer(x, g, b, m, var, 1e-5);
    for (std::int64_t n = 0; n < 2; ++n)
        for (std::int64_t c = 0; c < 3; ++c)
            for (std::int64_t h = 0; h < 4; ++h)
                for (std::int64_t w = 0; w < 5; ++w) {
                    const auto ci = static_cast<std::size_t>(c);
                    const float expect = (x.at(n, c, h, w) - m[ci]) / std::sqrt(var[ci] + 1e-5f) * g[ci] + b[ci];
                    EXPECT_EQ(y.at(n, c, h, w), expect);
                }
}

TEST(BatchNorm, RejectsLengthMismatch) {
    const Tensor x(Shape{1, 3, 2, 2});
    const Tensor v3(Shape::vector(3), 1.0f), v2(Shape::vector(2), 1.0f);
    EXPECT_THROW(batch_norm_infer(x, v2, v3, v3, v3), ShapeError);
    EXPECT_THROW(batch_norm_infer(x, v3, v3, v3, v2), ShapeError);
}

TEST(PixelShuffle, DefinitionalLayout) {
    const Tensor x(Shape{1, 4, 1, 1}, {1, 2, 3, 4});
    const Tensor y = pixel_shuffle(x, 2);
    ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
    EXPECT_EQ(y.values(), (std::vector<float>{1, 2, 3, 4}));
}

TEST(PixelShuffle, MatchesIndexFormula) {
    const Tensor x = random_tensor(Shape{1, 8, 2, 2}, 17);
    const Tensor y = pixel_shuffle(x, 2);
    ASSERT_EQ(y.shape(), (Shape{1, 2, 4, 4}));
    for (std::int64_t c = 0; c < 2; ++c)
        for (std::int64_t oy = 0; oy < 4; ++oy)
            for (std::int64_t ox = 0; ox < 4; ++ox) {
                const std::int64_t src_c = c * 4 + (oy % 2) * 2 + (ox % 2);
                EXPECT_EQ(y.at(0, c, oy, ox), x.at(0, src_c, oy / 2, ox / 2));
            }
}

TEST(PixelShuffle, InverseAndMultisetPreserved) {
    for (const std::int64_t r : {2, 3}) {
        const Tensor x = random_tensor(Shape{2, 2 * r * r, 3, 4}, 18 + static_cast<std::uint64_t>(r));
        const Tensor y = pixel_shuffle(x, r);
        EXPECT_EQ(pixel_unshuffle(y, r), x);
        std::vector<float> a = x.values(), b = y.values();
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        EXPECT_EQ(a, b);
    }
}

TEST(PixelShuffle, RejectsIndivisibleChannels) {
    EXPECT_THROW(pixel_shuffle(Tensor(Shape{1, 6, 2, 2}), 2), ShapeError);
}

TEST(ElementwiseAdd, IdentityCommutativityAndOracle) {
    const Tensor a = random_tensor(Shape{1, 2, 3, 3}, 20);
    const Tensor b = random_tensor(Shape{1, 2, 3, 3}, 21);
    EXPECT_EQ(elementwise_add(a, Tensor(a.shape())), a);
    EXPECT_EQ(elementwise_add(a, b), elementwise_add(b, a));
    const Tensor s = elementwise_add(a, b);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(s[i], a[i] + b[i]);
    EXPECT_THROW(elementwise_add(a, Tensor(Shape{1, 2, 3, 4})), ShapeError);
}

TEST(Dense, IdentityAndDotProduct) {
    const Tensor x(Shape{1, 3, 1, 1}, {1, 2, 3});
    Tensor eye(Shape::matrix(3, 3));
    for (int i = 0; i < 3; ++i) eye.at(0, 0, i, i) = 1.0f;
    const Tensor y = dense(x, eye, Tensor(Shape::vector(3)));
    EXPECT_EQ(y.values(), x.values());

    const Tensor x2(Shape{1, 2, 1, 1}, {1, 1});
    const Tensor w(Shape::matrix(2, 1), {2, 3});
    const Tensor b(Shape::vector(1), {1});
    EXPECT_EQ(dense(x2, w, b)[0], 6.0f);
}

TEST(Dense, DiscriminatorHeadMatchesLoopOracle) {
    const Tensor x = random_tensor(Shape{2, 1024, 1, 1}, 22);
    const Tensor w = random_tensor(Shape::matrix(1024, 1), 23);
    const Tensor b = random_tensor(Shape::vector(1), 24);
    const Tensor y = dense(x, w, b);
    for (std::int64_t n = 0; n < 2; ++n) {
        float acc = 0.0f;
        for (std::int64_t i = 0; i < 1024; ++i) acc += x[static_cast<std::size_t>(n * 1024 + i)] * w[static_cast<std::size_t>(i)];
        EXPECT_EQ(y[static_cast<std::size_t>(n)], acc + b[0]);
    }
    EXPECT_THROW(dense(Tensor(Shape{1, 3, 1, 1}), w, b), ShapeError);
}

TEST(Determinism, RepeatedCallsAreBitIdentical) {
    const Tensor x = random_tensor(Shape{1, 3, 8, 8}, 25);
    const ConvSpec spec = conv3x3(3, 5);
    const Tensor w = random_tensor(spec.weight_shape(), 26);
    const Tensor b = random_tensor(Shape::vector(5), 27);
    EXPECT_EQ(conv2d(x, w, &b, spec), conv2d(x, w, &b, spec));
    EXPECT_EQ(activation(Activation::sigmoid(), x), activation(Activation::sigmoid(), x));
}

// Finite-difference checks of the backward companions in double precision.
double loss_of(const TensorD& y, const TensorD& probe) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * probe[i];
    return s;
}

template <typename F>
double central_difference(TensorD& target, std::size_t i, F&& f) {
    const double h = 1e-6;
    const double keep = target[i];
    target[i] = keep + h;
    const double up = f();
    target[i] = keep - h;
    const double down = f();
    target[i] = keep;
    return (up - down) / (2 * h);
}

TEST(Backward, ConvGradientsMatchFiniteDifferences) {
    const ConvSpec spec{2, 3, 3, 2, 1, true};
    TensorD x = random_tensor<double>(Shape{2, 2, 7, 6}, 30);
    TensorD w = random_tensor<double>(spec.weight_shape(), 31);
    TensorD b = random_tensor<double>(Shape::vector(3), 32);
    const TensorD probe = random_tensor<double>(conv2d(x, w, &b, spec).shape(), 33);
    const auto g = conv2d_backward(x, w, spec, probe);
    auto f = [&] { return loss_of(conv2d(x, w, &b, spec), probe); };
    for (std::size_t i = 0; i < x.size(); i += 7) EXPECT_NEAR(g.input[i], central_difference(x, i, f), 1e-7);
    for (std::size_t i = 0; i < w.size(); i += 3) EXPECT_NEAR(g.weights[i], central_difference(w, i, f), 1e-7);
    for (std::size_t i = 0; i < b.size(); ++i) EXPECT_NEAR(g.bias[i], central_difference(b, i, f), 1e-7);
}

TEST(Backward, DenseBatchNormAndActivationGradients) {
    TensorD x = random_tensor<double>(Shape{2, 3, 2, 2}, 40);
    TensorD w = random_tensor<double>(Shape::matrix(12, 4), 41);
    TensorD b = random_tensor<double>(Shape::vector(4), 42);
    const TensorD probe = random_tensor<double>(Shape{2, 4, 1, 1}, 43);
    const auto dg = dense_backward(x, w, probe);
    auto fd = [&] { return loss_of(dense(x, w, b), probe); };
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(dg.input[i], central_difference(x, i, fd), 1e-7);
    for (std::size_t i = 0; i < w.size(); i += 5) EXPECT_NEAR(dg.weights[i], central_difference(w, i, fd), 1e-7);
    for (std::size_t i = 0; i < b.size(); ++i) EXPECT_NEAR(dg.bias[i], central_difference(b, i, fd), 1e-7);

    TensorD gamma = random_tensor<double>(Shape::vector(3), 44);
    TensorD beta = random_tensor<double>(Shape::vector(3), 45);
    const TensorD mean = random_tensor<double>(Shape::vector(3), 46);
    const TensorD var = random_tensor<double>(Shape::vector(3), 47, 0.5, 2.0);
    const TensorD bprobe = random_tensor<double>(x.shape(), 48);
    const auto bg = batch_norm_infer_backward(x, gamma, mean, var, 1e-5, bprobe);
    auto fb = [&] { return loss_of(batch_norm_infer(x, gamma, beta, mean, var, 1e-5), bprobe); };
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(bg.input[i], central_difference(x, i, fb), 1e-7);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_NEAR(bg.gamma[i], central_difference(gamma, i, fb), 1e-7);
        EXPECT_NEAR(bg.beta[i], central_difference(beta, i, fb), 1e-7);
    }

    const TensorD aprobe = random_tensor<double>(x.shape(), 49);
    for (const Activation act : {Activation::prelu(0.3), Activation::sigmoid(), Activation::leaky_relu(0.2)}) {
        const auto ag = activation_backward(act, x, aprobe);
        auto fa = [&] { return loss_of(activation(act, x), aprobe); };
        for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(ag.input[i], central_difference(x, i, fa), 1e-6);
    }
    // Slope gradient of PReLU: d/da sum(probe * prelu_a(x)) = sum over x<0 of probe*x.
    double expect = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] < 0) expect += aprobe[i] * x[i];
    EXPECT_NEAR(activation_backward(Activation::prelu(0.3), x, aprobe).slope, expect, 1e-12);
}

TEST(ChannelOps, ConcatThenSliceRoundTrips) {
    const Tensor a = random_tensor(Shape{2, 2, 3, 3}, 50);
    const Tensor b = random_tensor(Shape{2, 3, 3, 3}, 51);
    const Tensor c = concat_channels<float>({&a, &b});
    EXPECT_EQ(c.shape(), (Shape{2, 5, 3, 3}));
    EXPECT_EQ(slice_channels(c, 0, 2), a);
    EXPECT_EQ(slice_channels(c, 2, 3), b);
}

}  // namespace
}  // namespace srocr::tensor
