#pragma once

#include <cmath>

#include "stdhl/rng.hpp"
#include "stdhl/tensor.hpp"

namespace stdhl {

inline Tensor uniform_leaf(Rng& rng, Shape shape, double lo, double hi) {
    std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Tensor::leaf(std::move(v), std::move(shape));
}

inline Tensor glorot_leaf(Rng& rng, Shape shape, std::int64_t fan_in, std::int64_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    return uniform_leaf(rng, std::move(shape), -limit, limit);
}

// Small nonzero bias init keeps pre-activations off exact kinks.
inline Tensor bias_leaf(Rng& rng, Shape shape) {
    return uniform_leaf(rng, std::move(shape), -0.05, 0.05);
}

inline Tensor copy_leaf(const Tensor& t) {
    return Tensor::leaf(std::vector<double>(t.data().begin(), t.data().end()), t.shape());
}

}  // namespace stdhl
