#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "ad1d/nn/layers.hpp"

using namespace ad1d::nn;

namespace {

Tensor1D<double> from(std::vector<double> v, int channels = 1) {
    Tensor1D<double> t(1, channels, static_cast<int>(v.size()) / channels);
    t.values = std::move(v);
    return t;
}

// Straightforward zero-padded cross-correlation used as the reference.
std::vector<double> naive_conv(const Tensor1D<double>& in, const ConvParams<double>& p) {
    const int L = in.length, K = p.kernel_size, pad = p.zero_pad;
    const int Lout = (L + 2 * pad - K) / p.stride + 1;
    std::vector<double> out;
    for (int b = 0; b < in.batch; ++b)
        for (int o = 0; o < p.out_channels; ++o)
            for (int x = 0; x < Lout; ++x) {
                double acc = p.bias.value.empty() ? 0.0 : p.bias.value[o];
                for (int i = 0; i < p.in_channels; ++i)
                    for (int k = 0; k < K; ++k) {
                        const int src = x * p.stride + k - pad;
                        if (src >= 0 && src < L)
                            acc += p.weights.value[(o * p.in_channels + i) * K + k] * in.at(b, i, src);
                    }
                out.push_back(acc);
            }
    return out;
}

}  // namespace

TEST_CASE("conv1d identity kernel") {
    auto p = make_conv<double>(1, 1, 3, 1, false);
    p.weights.value = {0, 1, 0};
    Tensor1D<double> y;
    conv1d_forward(from({1, 2, 3}), p, y);
    CHECK(y.values == std::vector<double>{1, 2, 3});
}

TEST_CASE("conv1d box kernel with stride 2") {
    auto p = make_conv<double>(1, 1, 3, 2, false);
    p.weights.value = {1, 1, 1};
    Tensor1D<double> y;
    conv1d_forward(from({1, 2, 3, 4}), p, y);
    CHECK(y.values == std::vector<double>{3, 9});
}

TEST_CASE("conv1d zero input gives the bias") {
    auto p = make_conv<double>(2, 3, 3, 1, true);
    p.bias.value = {0.5, -1.0, 2.0};
    for (auto& w : p.weights.value) w = 0.3;
    Tensor1D<double> x(1, 2, 5), y;
    conv1d_forward(x, p, y);
    for (int o = 0; o < 3; ++o)
        for (double v : y.row(0, o)) CHECK(v == p.bias.value[o]);
}

TEST_CASE("conv1d matches the naive reference on random shapes") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    for (int k : {1, 3})
        for (int s : {1, 2})
            for (int L : {1, 2, 7, 16}) {
                auto p = make_conv<double>(3, 2, k, s, s == 2);
                for (auto& w : p.weights.value) w = nd(rng);
                for (auto& w : p.bias.value) w = nd(rng);
                Tensor1D<double> x(2, 3, L), y;
                for (auto& v : x.values) v = nd(rng);
                conv1d_forward(x, p, y);
                const auto ref = naive_conv(x, p);
                REQUIRE(y.values.size() == ref.size());
                for (std::size_t i = 0; i < ref.size(); ++i) CHECK(y.values[i] == doctest::Approx(ref[i]).epsilon(1e-12));
            }
}

TEST_CASE("conv1d parameter validation") {
    CHECK_THROWS_AS(make_conv<float>(1, 1, 5, 1, false), ad1d::ConfigError);
    CHECK_THROWS_AS(make_conv<float>(1, 1, 3, 3, false), ad1d::ConfigError);
    const auto p = make_conv<float>(2, 4, 3, 2, false);
    CHECK(p.zero_pad == 1);
    CHECK(p.weights.value.size() == 24);
    CHECK(p.bias.value.empty());
    CHECK(p.weights.decay);
}

TEST_CASE("batchnorm constant channel normalizes to zero") {
    auto p = make_batchnorm<double>(1);
    Tensor1D<double> y;
    BatchNormCache<double> cache;
    batchnorm_forward(from({4, 4, 4, 4}), p, Phase::Train, y, cache);
    for (double v : y.values) CHECK(v == 0.0);
}

TEST_CASE("batchnorm two values map to -1 and +1") {
    auto p = make_batchnorm<double>(1);
    p.epsilon = 1e-12;
    Tensor1D<double> y;
    BatchNormCache<double> cache;
    batchnorm_forward(from({1, 3}), p, Phase::Train, y, cache);
    CHECK(y.values[0] == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(y.values[1] == doctest::Approx(1.0).epsilon(1e-9));
    // running = 0.9 * running + 0.1 * batch; batch mean 2, biased variance 1
    CHECK(p.running_mean.value[0] == doctest::Approx(0.2));
    CHECK(p.running_var.value[0] == doctest::Approx(1.0));
}

TEST_CASE("batchnorm inference with unit statistics is the identity") {
    auto p = make_batchnorm<double>(2);
    p.epsilon = 0.0;
    const auto x = from({1, -2, 3, 0.5, 7, -8}, 2);
    Tensor1D<double> y;
    BatchNormCache<double> cache;
    batchnorm_forward(x, p, Phase::Infer, y, cache);
    CHECK(y.values == x.values);
}

TEST_CASE("leaky relu") {
    Tensor1D<double> y;
    leaky_relu_forward(from({2.0, -2.0, 0.0}), 0.1, y);
    CHECK(y.values[0] == 2.0);
    CHECK(y.values[1] == doctest::Approx(-0.2));
    CHECK(y.values[2] == 0.0);
    CHECK(kDefaultLeakySlope == 0.1);
}

TEST_CASE("shortcut adds and splits gradients") {
    auto a = from({1, 2}), b = from({3, 4});
    Tensor1D<double> y;
    shortcut_forward(a, b, y);
    CHECK(y.values == std::vector<double>{4, 6});
    shortcut_forward(a, from({0, 0}), y);
    CHECK(y.values == a.values);
    a.enable_grad();
    b.enable_grad();
    y.grad = {0.5, -1.5};
    shortcut_backward(a, b, y);
    CHECK(a.grad == y.grad);
    CHECK(b.grad == y.grad);
}

TEST_CASE("route concatenates channels and splits gradients") {
    Tensor1D<double> a(1, 4, 13), b(1, 8, 13), y;
    for (std::size_t i = 0; i < a.size(); ++i) a.values[i] = static_cast<double>(i);
    for (std::size_t i = 0; i < b.size(); ++i) b.values[i] = 100.0 + static_cast<double>(i);
    const std::vector<const Tensor1D<double>*> srcs{&a, &b};
    route_forward<double>(srcs, y);
    CHECK(y.channels == 12);
    CHECK(y.length == 13);
    CHECK(y.at(0, 3, 12) == a.at(0, 3, 12));
    CHECK(y.at(0, 4, 0) == b.at(0, 0, 0));

    y.enable_grad();
    for (std::size_t i = 0; i < y.size(); ++i) y.grad[i] = static_cast<double>(i);
    a.enable_grad();
    b.enable_grad();
    const std::vector<Tensor1D<double>*> back{&a, &b};
    route_backward<double>(back, y);
    std::vector<double> joined(a.grad);
    joined.insert(joined.end(), b.grad.begin(), b.grad.end());
    CHECK(joined == y.grad);

    const std::vector<const Tensor1D<double>*> one{&a};
    route_forward<double>(one, y);
    CHECK(y.values == a.values);
}

TEST_CASE("nearest upsampling and its adjoint") {
    auto x = from({1, 2});
    Tensor1D<double> y;
    upsample_forward(x, 2, y);
    CHECK(y.values == std::vector<double>{1, 1, 2, 2});
    Tensor1D<double> x13(1, 3, 13);
    upsample_forward(x13, 2, y);
    CHECK(y.length == 26);
    upsample_forward(x, 2, y);
    y.grad = {1, 2, 3, 4};
    x.enable_grad();
    upsample_backward(x, y);
    CHECK(x.grad == std::vector<double>{3, 7});
}

TEST_CASE("sigmoid and softmax") {
    CHECK(sigmoid(0.0) == 0.5);
    CHECK(sigmoid(std::log(3.0)) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(sigmoid(-800.0) >= 0.0);
    CHECK(sigmoid(800.0) <= 1.0);
    std::vector<double> v(5, 0.0);
    softmax(std::span<double>(v));
    for (double p : v) CHECK(p == doctest::Approx(0.2));
    std::vector<double> big{1000.0, 1000.0};
    softmax(std::span<double>(big));
    CHECK(big[0] == doctest::Approx(0.5));
}
