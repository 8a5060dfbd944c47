#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "stdhl/hypergraph.hpp"
#include "stdhl/rng.hpp"
#include "stdhl/temporal.hpp"
#include "stdhl/tensor.hpp"

namespace stdhl {

// Position-wise score map followed by a softmax over the time axis; the
// weights multiply the input elementwise.
class AttentionFilter {
public:
    AttentionFilter(std::int64_t channels, Rng& rng);

    Tensor weights(const Tensor& x) const;  // C×N×T, sums to 1 over t
    Tensor forward(const Tensor& x) const;  // weights ⊙ x

    std::vector<Tensor> parameters() const;
    void copy_from(const AttentionFilter& other);

private:
    Tensor w_, b_;
};

using SpatialFactory = std::function<std::unique_ptr<SpatialLayer>(
    std::int64_t channels, std::int64_t time_len, Rng& rng)>;

// Attention filter, then n_blocks of (spatial mixing -> grouped temporal
// conv) with a residual around each block. Dilation doubles per block.
class SpatioTemporalEncoder {
public:
    SpatioTemporalEncoder(std::int64_t n_nodes, std::int64_t in_channels, std::int64_t hidden,
                          std::int64_t n_blocks, std::int64_t time_len, ConvMode mode,
                          const SpatialFactory& make_spatial, Rng& rng);

    Tensor forward(const Tensor& x) const;
    Tensor attention_out(const Tensor& x) const;
    // The block stack alone (input already filtered); exposed for causality tests.
    Tensor forward_blocks(const Tensor& x) const;

    SpatialLayer& spatial(std::size_t block) { return *blocks_[block].spatial; }
    const SpatialLayer& spatial(std::size_t block) const { return *blocks_[block].spatial; }
    GroupedTemporalLayer& tcn(std::size_t block) { return blocks_[block].tcn; }
    std::size_t n_blocks() const { return blocks_.size(); }

    std::vector<Tensor> parameters() const;
    std::vector<Tensor> buffers() const;
    void copy_from(const SpatioTemporalEncoder& other);

private:
    struct Block {
        std::unique_ptr<SpatialLayer> spatial;
        GroupedTemporalLayer tcn;
        Tensor proj_w, proj_b;  // residual channel projection, only when widths differ
    };
    AttentionFilter attention_;
    std::vector<Block> blocks_;
    std::int64_t in_channels_, hidden_;
};

// Per-farm, per-step quantile forecasts with an ordered level set. Values are
// non-decreasing in the level index and clipped to [0,1].
struct ForecastQuantiles {
    std::vector<double> levels;
    Tensor values;  // Q×N×T

    std::int64_t n_levels() const { return static_cast<std::int64_t>(levels.size()); }
    std::int64_t n_nodes() const { return values.dim(1); }
    std::int64_t horizon() const { return values.dim(2); }
    double value(std::int64_t q, std::int64_t n, std::int64_t t) const {
        return values(q, n, t);
    }

    // Sorts across the level axis (crossing fix) and clips to [0,1].
    static ForecastQuantiles from_raw(const Tensor& raw, std::vector<double> levels);
    // Deterministic forecast: the level closest to 0.5.
    Tensor median() const;
};

void check_quantile_levels(const std::vector<double>& levels);

// Pinball loss, mean over levels, nodes and steps. phi = u*(y-yhat) when
// y >= yhat, else (u-1)*(y-yhat). Graph-tracked (used as the training loss).
Tensor quantile_loss(const Tensor& y, const Tensor& raw_q, const std::vector<double>& levels);
double quantile_loss(const Tensor& y, const ForecastQuantiles& q);

// Channel adjustment, measured-stream time alignment onto the NWP clock,
// grouped temporal layers down to Q channels, per-node projection to the
// forecast horizon.
class ForecastDecoder {
public:
    ForecastDecoder(std::int64_t n_nodes, std::int64_t in_channels_each,
                    std::int64_t adjust_width, std::int64_t hidden, std::int64_t n_levels,
                    std::int64_t time_measured, std::int64_t time_nwp, std::int64_t horizon,
                    Rng& rng);

    // x_m: C×N×T', x_n: C×N×(T+2τ) -> raw quantile channels Q×N×T
    Tensor forward(const Tensor& x_m, const Tensor& x_n) const;

    std::vector<Tensor> parameters() const;
    void copy_from(const ForecastDecoder& other);

private:
    std::int64_t n_nodes_, time_measured_, time_nwp_, horizon_;
    Tensor adj_m_w_, adj_m_b_, adj_n_w_, adj_n_b_;
    Tensor align_p_, align_b_;  // per-node map T' -> T+2τ
    GroupedTemporalLayer g1_, g2_;
    Tensor proj_p_, proj_b_;  // per-node map T+2τ -> T
};

}  // namespace stdhl
