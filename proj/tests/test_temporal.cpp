#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "stdhl/gradcheck.hpp"
#include "stdhl/rng.hpp"
#include "stdhl/temporal.hpp"

using namespace stdhl;

namespace {

Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Tensor::from(std::move(v), std::move(shape));
}

void set_all(Tensor& t, double v) {
    for (auto& x : t.data()) x = v;
}

}  // namespace

TEST_CASE("grouped forward: per-node kernels act independently") {
    Rng rng(1);
    GroupedTemporalLayer layer(2, 1, 1, 1, 1, ConvMode::kCausal, Activation::kIdentity, rng);
    set_all(layer.kernel(0), 1.0);
    set_all(layer.kernel(1), 2.0);
    set_all(layer.bias(0), 0.0);
    set_all(layer.bias(1), 0.0);
    Tensor x = Tensor::full({1, 2, 5}, 1.0);
    Tensor y = layer.forward(x);
    for (std::int64_t t = 0; t < 5; ++t) {
        CHECK(y(0, 0, t) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(y(0, 1, t) == doctest::Approx(2.0).epsilon(1e-12));
    }
}

TEST_CASE("grouped forward: causal mode never reads the future (exhaustive)") {
    Rng rng(2);
    const std::int64_t n = 3, tl = 8;
    GroupedTemporalLayer layer(n, 2, 2, 3, 1, ConvMode::kCausal, Activation::kReLU, rng);
    Tensor x = random_tensor(rng, {2, n, tl});
    Tensor base = layer.forward(x);
    for (std::int64_t node = 0; node < n; ++node) {
        for (std::int64_t tp = 0; tp < tl; ++tp) {
            Tensor x2 = x.detached_copy();
            x2.data()[static_cast<std::size_t>((1 * n + node) * tl + tp)] += 2.5;
            Tensor y2 = layer.forward(x2);
            for (std::int64_t c = 0; c < 2; ++c)
                for (std::int64_t i = 0; i < n; ++i)
                    for (std::int64_t t = 0; t < tp; ++t)
                        CHECK(y2(c, i, t) == base(c, i, t));  // bit-identical
        }
    }
}

TEST_CASE("grouped forward: non-causal mode does use future samples") {
    Rng rng(3);
    const std::int64_t n = 3, tl = 8;
    GroupedTemporalLayer layer(n, 1, 1, 3, 1, ConvMode::kNonCausal, Activation::kIdentity, rng);
    Tensor x = random_tensor(rng, {1, n, tl});
    Tensor base = layer.forward(x);
    Tensor x2 = x.detached_copy();
    x2.data()[static_cast<std::size_t>((0 * n + 0) * tl + 4)] += 1.0;
    Tensor y2 = layer.forward(x2);
    CHECK(y2(0, 0, 3) != base(0, 0, 3));
}

TEST_CASE("grouped forward: zero kernels and biases give zero under ReLU") {
    Rng rng(4);
    GroupedTemporalLayer layer(2, 2, 3, 2, 2, ConvMode::kCausal, Activation::kReLU, rng);
    for (std::int64_t i = 0; i < 2; ++i) {
        set_all(layer.kernel(i), 0.0);
        set_all(layer.bias(i), 0.0);
    }
    Tensor x = random_tensor(rng, {2, 2, 6});
    Tensor y = layer.forward(x);
    for (double v : y.data()) CHECK(v == 0.0);
}

TEST_CASE("group isolation: perturbing one node leaves the others bit-identical") {
    Rng rng(5);
    const std::int64_t n = 4, tl = 7;
    GroupedTemporalLayer layer(n, 2, 3, 3, 2, ConvMode::kNonCausal, Activation::kReLU, rng);
    Tensor x = random_tensor(rng, {2, n, tl});
    Tensor base = layer.forward(x);
    for (std::int64_t node = 0; node < n; ++node) {
        Tensor x2 = x.detached_copy();
        for (std::int64_t t = 0; t < tl; ++t)
            x2.data()[static_cast<std::size_t>((0 * n + node) * tl + t)] += 1.7;
        Tensor y2 = layer.forward(x2);
        for (std::int64_t c = 0; c < 3; ++c)
            for (std::int64_t i = 0; i < n; ++i) {
                if (i == node) continue;
                for (std::int64_t t = 0; t < tl; ++t) CHECK(y2(c, i, t) == base(c, i, t));
            }
    }
}

TEST_CASE("output keeps the input time extent; node-count mismatch rejected") {
    Rng rng(6);
    for (auto mode : {ConvMode::kCausal, ConvMode::kNonCausal}) {
        GroupedTemporalLayer layer(3, 2, 4, 3, 2, mode, Activation::kReLU, rng);
        Tensor x = random_tensor(rng, {2, 3, 9});
        Tensor y = layer.forward(x);
        CHECK(y.shape() == Shape{4, 3, 9});
        CHECK_THROWS_AS(layer.forward(random_tensor(rng, {2, 4, 9})), std::invalid_argument);
    }
    CHECK_THROWS_AS(
        GroupedTemporalLayer(3, 2, 4, 3, 0, ConvMode::kCausal, Activation::kReLU, rng),
        std::invalid_argument);
}

TEST_CASE("gradients of every per-node kernel and bias pass finite differences") {
    Rng rng(7);
    const std::int64_t n = 3, tl = 6;
    // tanh keeps the surface smooth for the check
    GroupedTemporalLayer layer(n, 2, 2, 3, 1, ConvMode::kCausal, Activation::kTanh, rng);
    Tensor x = random_tensor(rng, {2, n, tl});
    Tensor w = random_tensor(rng, {2, n, tl});
    auto f = [&] { return sum(mul(layer.forward(x), w)); };
    auto leaves = layer.parameters();
    leaves.push_back(x);
    CHECK(finite_diff_check_all(f, leaves) < 1e-4);
}
