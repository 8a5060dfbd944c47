#include "stdhl/temporal.hpp"

#include <stdexcept>
#include <string>

#include "stdhl/init.hpp"

namespace stdhl {

GroupedTemporalLayer::GroupedTemporalLayer(std::int64_t n_nodes, std::int64_t in_channels,
                                           std::int64_t out_channels, std::int64_t kernel_width,
                                           std::int64_t dilation, ConvMode mode,
                                           Activation activation, Rng& rng)
    : n_nodes_(n_nodes),
      in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_width_(kernel_width),
      dilation_(dilation),
      mode_(mode),
      activation_(activation) {
    if (n_nodes < 1 || in_channels < 1 || out_channels < 1 || kernel_width < 1)
        throw std::invalid_argument("GroupedTemporalLayer: all extents must be >= 1");
    if (dilation < 1)
        throw std::invalid_argument("GroupedTemporalLayer: dilation must be >= 1, got " +
                                    std::to_string(dilation));
    const auto fan_in = in_channels * kernel_width;
    kernels_.reserve(static_cast<std::size_t>(n_nodes));
    biases_.reserve(static_cast<std::size_t>(n_nodes));
    for (std::int64_t i = 0; i < n_nodes; ++i) {
        kernels_.push_back(
            glorot_leaf(rng, {out_channels, in_channels, kernel_width}, fan_in, out_channels));
        biases_.push_back(bias_leaf(rng, {out_channels}));
    }
}

Tensor GroupedTemporalLayer::forward(const Tensor& x) const {
    if (x.ndim() != 3 || x.dim(0) != in_channels_ || x.dim(1) != n_nodes_)
        throw std::invalid_argument("GroupedTemporalLayer: expected input [" +
                                    std::to_string(in_channels_) + "," +
                                    std::to_string(n_nodes_) + ",T], got " +
                                    shape_str(x.shape()));
    const auto time_len = x.dim(2);
    std::vector<Tensor> per_node;
    per_node.reserve(static_cast<std::size_t>(n_nodes_));
    for (std::int64_t i = 0; i < n_nodes_; ++i) {
        Tensor xi = reshape(slice(x, 1, i, 1), {in_channels_, time_len});
        Tensor yi = conv1d(xi, kernels_[static_cast<std::size_t>(i)],
                           biases_[static_cast<std::size_t>(i)], dilation_, mode_);
        per_node.push_back(reshape(yi, {out_channels_, 1, time_len}));
    }
    return apply_activation(concat(per_node, 1), activation_);
}

std::vector<Tensor> GroupedTemporalLayer::parameters() const {
    std::vector<Tensor> ps;
    ps.reserve(kernels_.size() * 2);
    for (std::size_t i = 0; i < kernels_.size(); ++i) {
        ps.push_back(kernels_[i]);
        ps.push_back(biases_[i]);
    }
    return ps;
}

void GroupedTemporalLayer::copy_from(const GroupedTemporalLayer& other) {
    for (std::size_t i = 0; i < kernels_.size(); ++i) {
        kernels_[i] = copy_leaf(other.kernels_[i]);
        biases_[i] = copy_leaf(other.biases_[i]);
    }
}

}  // namespace stdhl
