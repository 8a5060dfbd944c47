#pragma once

#include <cstdint>
#include <vector>

#include "stdhl/rng.hpp"
#include "stdhl/tensor.hpp"

namespace stdhl {

// Dilated temporal convolution with one independent kernel per node: node i's
// output never sees node j's input. Output keeps the input time extent.
class GroupedTemporalLayer {
public:
    GroupedTemporalLayer(std::int64_t n_nodes, std::int64_t in_channels,
                         std::int64_t out_channels, std::int64_t kernel_width,
                         std::int64_t dilation, ConvMode mode, Activation activation, Rng& rng);

    // x: C×N×T -> C'×N×T
    Tensor forward(const Tensor& x) const;

    std::vector<Tensor> parameters() const;
    void copy_from(const GroupedTemporalLayer& other);

    std::int64_t n_nodes() const { return n_nodes_; }
    std::int64_t in_channels() const { return in_channels_; }
    std::int64_t out_channels() const { return out_channels_; }
    ConvMode mode() const { return mode_; }

    // direct access for tests that hand-craft kernels
    Tensor& kernel(std::int64_t node) { return kernels_[static_cast<std::size_t>(node)]; }
    Tensor& bias(std::int64_t node) { return biases_[static_cast<std::size_t>(node)]; }

private:
    std::int64_t n_nodes_, in_channels_, out_channels_, kernel_width_, dilation_;
    ConvMode mode_;
    Activation activation_;
    std::vector<Tensor> kernels_;  // N tensors of C'×C×ΔT
    std::vector<Tensor> biases_;   // N tensors of C'
};

}  // namespace stdhl
