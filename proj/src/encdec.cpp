#include "stdhl/encdec.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "stdhl/init.hpp"

namespace stdhl {

// ---------------------------------------------------------------------------
// AttentionFilter
// ---------------------------------------------------------------------------

AttentionFilter::AttentionFilter(std::int64_t channels, Rng& rng) {
    w_ = glorot_leaf(rng, {channels, channels}, channels, channels);
    b_ = bias_leaf(rng, {channels});
}

Tensor AttentionFilter::weights(const Tensor& x) const {
    Tensor scores = tanh(channel_map(x, w_, b_));
    return softmax(scores, 2);
}

Tensor AttentionFilter::forward(const Tensor& x) const { return mul(weights(x), x); }

std::vector<Tensor> AttentionFilter::parameters() const { return {w_, b_}; }

void AttentionFilter::copy_from(const AttentionFilter& other) {
    w_ = copy_leaf(other.w_);
    b_ = copy_leaf(other.b_);
}

// ---------------------------------------------------------------------------
// SpatioTemporalEncoder
// ---------------------------------------------------------------------------

SpatioTemporalEncoder::SpatioTemporalEncoder(std::int64_t n_nodes, std::int64_t in_channels,
                                             std::int64_t hidden, std::int64_t n_blocks,
                                             std::int64_t time_len, ConvMode mode,
                                             const SpatialFactory& make_spatial, Rng& rng)
    : attention_(in_channels, rng), in_channels_(in_channels), hidden_(hidden) {
    if (n_blocks < 1) throw std::invalid_argument("SpatioTemporalEncoder: need n_blocks >= 1");
    std::int64_t ch = in_channels;
    std::int64_t dilation = 1;
    for (std::int64_t b = 0; b < n_blocks; ++b) {
        Block blk{make_spatial(ch, time_len, rng),
                  GroupedTemporalLayer(n_nodes, ch, hidden, 3, dilation, mode,
                                       Activation::kReLU, rng),
                  Tensor(), Tensor()};
        if (ch != hidden) {
            blk.proj_w = glorot_leaf(rng, {hidden, ch}, ch, hidden);
            blk.proj_b = bias_leaf(rng, {hidden});
        }
        blocks_.push_back(std::move(blk));
        ch = hidden;
        dilation *= 2;
    }
}

Tensor SpatioTemporalEncoder::attention_out(const Tensor& x) const {
    return attention_.forward(x);
}

Tensor SpatioTemporalEncoder::forward_blocks(const Tensor& x) const {
    Tensor h = x;
    for (const auto& blk : blocks_) {
        Tensor s = blk.spatial->forward(h);
        Tensor t = blk.tcn.forward(s);
        Tensor res = blk.proj_w.defined() ? channel_map(h, blk.proj_w, blk.proj_b) : h;
        h = add(t, res);
    }
    return h;
}

Tensor SpatioTemporalEncoder::forward(const Tensor& x) const {
    return forward_blocks(attention_out(x));
}

std::vector<Tensor> SpatioTemporalEncoder::parameters() const {
    std::vector<Tensor> ps = attention_.parameters();
    for (auto& blk : blocks_) {
        for (auto& p : blk.spatial->parameters()) ps.push_back(p);
        for (auto& p : blk.tcn.parameters()) ps.push_back(p);
        if (blk.proj_w.defined()) {
            ps.push_back(blk.proj_w);
            ps.push_back(blk.proj_b);
        }
    }
    return ps;
}

std::vector<Tensor> SpatioTemporalEncoder::buffers() const {
    std::vector<Tensor> bs;
    for (auto& blk : blocks_)
        for (auto& b : blk.spatial->buffers()) bs.push_back(b);
    return bs;
}

void SpatioTemporalEncoder::copy_from(const SpatioTemporalEncoder& other) {
    attention_.copy_from(other.attention_);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        blocks_[i].spatial = other.blocks_[i].spatial->clone();
        blocks_[i].tcn.copy_from(other.blocks_[i].tcn);
        if (blocks_[i].proj_w.defined()) {
            blocks_[i].proj_w = copy_leaf(other.blocks_[i].proj_w);
            blocks_[i].proj_b = copy_leaf(other.blocks_[i].proj_b);
        }
    }
}

// ---------------------------------------------------------------------------
// ForecastQuantiles / quantile loss
// ---------------------------------------------------------------------------

void check_quantile_levels(const std::vector<double>& levels) {
    if (levels.empty()) throw std::invalid_argument("quantile levels: empty set");
    for (std::size_t q = 0; q < levels.size(); ++q) {
        if (!(levels[q] > 0.0 && levels[q] < 1.0))
            throw std::invalid_argument("quantile levels: level " + std::to_string(levels[q]) +
                                        " outside (0,1)");
        if (q > 0 && !(levels[q] > levels[q - 1]))
            throw std::invalid_argument("quantile levels: not strictly increasing at index " +
                                        std::to_string(q));
    }
}

ForecastQuantiles ForecastQuantiles::from_raw(const Tensor& raw, std::vector<double> levels) {
    check_quantile_levels(levels);
    if (raw.ndim() != 3 || raw.dim(0) != static_cast<std::int64_t>(levels.size()))
        throw std::invalid_argument("ForecastQuantiles: raw shape " + shape_str(raw.shape()) +
                                    " does not match " + std::to_string(levels.size()) +
                                    " levels");
    const auto q = raw.dim(0), n = raw.dim(1), t = raw.dim(2);
    std::vector<double> vals(raw.data().begin(), raw.data().end());
    std::vector<double> column(static_cast<std::size_t>(q));
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t s = 0; s < t; ++s) {
            for (std::int64_t l = 0; l < q; ++l)
                column[static_cast<std::size_t>(l)] =
                    vals[static_cast<std::size_t>((l * n + i) * t + s)];
            std::sort(column.begin(), column.end());
            for (std::int64_t l = 0; l < q; ++l)
                vals[static_cast<std::size_t>((l * n + i) * t + s)] =
                    std::clamp(column[static_cast<std::size_t>(l)], 0.0, 1.0);
        }
    }
    ForecastQuantiles out;
    out.levels = std::move(levels);
    out.values = Tensor::from(std::move(vals), {q, n, t});
    return out;
}

Tensor ForecastQuantiles::median() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < levels.size(); ++i)
        if (std::abs(levels[i] - 0.5) < std::abs(levels[best] - 0.5)) best = i;
    return reshape(slice(values, 0, static_cast<std::int64_t>(best), 1),
                   {values.dim(1), values.dim(2)});
}

Tensor quantile_loss(const Tensor& y, const Tensor& raw_q, const std::vector<double>& levels) {
    check_quantile_levels(levels);
    const auto q = static_cast<std::int64_t>(levels.size());
    if (raw_q.ndim() != 3 || raw_q.dim(0) != q || y.ndim() != 2 || y.dim(0) != raw_q.dim(1) ||
        y.dim(1) != raw_q.dim(2))
        throw_shape_mismatch("quantile_loss", y.shape(), raw_q.shape());
    const auto n = y.dim(0), t = y.dim(1);
    Tensor acc;
    for (std::int64_t l = 0; l < q; ++l) {
        const double u = levels[static_cast<std::size_t>(l)];
        Tensor yq = reshape(slice(raw_q, 0, l, 1), {n, t});
        Tensor diff = sub(y, yq);
        // max(u*d, (u-1)*d) equals the pinball branches; ties give the y>=yhat branch
        Tensor phi = maximum(mul_scalar(diff, u), mul_scalar(diff, u - 1.0));
        Tensor s = sum(phi);
        acc = acc.defined() ? add(acc, s) : s;
    }
    return mul_scalar(acc, 1.0 / static_cast<double>(q * n * t));
}

double quantile_loss(const Tensor& y, const ForecastQuantiles& q) {
    return quantile_loss(y, q.values, q.levels).item();
}

// ---------------------------------------------------------------------------
// ForecastDecoder
// ---------------------------------------------------------------------------

ForecastDecoder::ForecastDecoder(std::int64_t n_nodes, std::int64_t in_channels_each,
                                 std::int64_t adjust_width, std::int64_t hidden,
                                 std::int64_t n_levels, std::int64_t time_measured,
                                 std::int64_t time_nwp, std::int64_t horizon, Rng& rng)
    : n_nodes_(n_nodes),
      time_measured_(time_measured),
      time_nwp_(time_nwp),
      horizon_(horizon),
      g1_(n_nodes, 2 * adjust_width, hidden, 3, 1, ConvMode::kNonCausal, Activation::kReLU, rng),
      g2_(n_nodes, hidden, n_levels, 3, 1, ConvMode::kNonCausal, Activation::kIdentity, rng) {
    adj_m_w_ = glorot_leaf(rng, {adjust_width, in_channels_each}, in_channels_each, adjust_width);
    adj_m_b_ = bias_leaf(rng, {adjust_width});
    adj_n_w_ = glorot_leaf(rng, {adjust_width, in_channels_each}, in_channels_each, adjust_width);
    adj_n_b_ = bias_leaf(rng, {adjust_width});
    align_p_ = glorot_leaf(rng, {n_nodes, time_measured, time_nwp}, time_measured, time_nwp);
    align_b_ = bias_leaf(rng, {n_nodes, time_nwp});
    proj_p_ = glorot_leaf(rng, {n_nodes, time_nwp, horizon}, time_nwp, horizon);
    proj_b_ = bias_leaf(rng, {n_nodes, horizon});
}

Tensor ForecastDecoder::forward(const Tensor& x_m, const Tensor& x_n) const {
    if (x_m.ndim() != 3 || x_n.ndim() != 3 || x_m.dim(1) != n_nodes_ || x_n.dim(1) != n_nodes_)
        throw std::invalid_argument("ForecastDecoder: node extent mismatch, got " +
                                    shape_str(x_m.shape()) + " and " + shape_str(x_n.shape()) +
                                    " for " + std::to_string(n_nodes_) + " nodes");
    if (x_m.dim(2) != time_measured_ || x_n.dim(2) != time_nwp_)
        throw std::invalid_argument("ForecastDecoder: time extents " + shape_str(x_m.shape()) +
                                    "/" + shape_str(x_n.shape()) + " do not match configured " +
                                    std::to_string(time_measured_) + "/" +
                                    std::to_string(time_nwp_));
    Tensor am = channel_map(x_m, adj_m_w_, adj_m_b_);
    Tensor an = channel_map(x_n, adj_n_w_, adj_n_b_);
    Tensor aligned_m = time_project(am, align_p_, align_b_);  // onto the NWP clock
    Tensor cat = concat({aligned_m, an}, 0);
    Tensor h = g1_.forward(cat);
    Tensor q = g2_.forward(h);
    return time_project(q, proj_p_, proj_b_);
}

std::vector<Tensor> ForecastDecoder::parameters() const {
    std::vector<Tensor> ps = {adj_m_w_, adj_m_b_, adj_n_w_, adj_n_b_,
                              align_p_, align_b_, proj_p_, proj_b_};
    for (auto& p : g1_.parameters()) ps.push_back(p);
    for (auto& p : g2_.parameters()) ps.push_back(p);
    return ps;
}

void ForecastDecoder::copy_from(const ForecastDecoder& other) {
    adj_m_w_ = copy_leaf(other.adj_m_w_);
    adj_m_b_ = copy_leaf(other.adj_m_b_);
    adj_n_w_ = copy_leaf(other.adj_n_w_);
    adj_n_b_ = copy_leaf(other.adj_n_b_);
    align_p_ = copy_leaf(other.align_p_);
    align_b_ = copy_leaf(other.align_b_);
    proj_p_ = copy_leaf(other.proj_p_);
    proj_b_ = copy_leaf(other.proj_b_);
    g1_.copy_from(other.g1_);
    g2_.copy_from(other.g2_);
}

}  // namespace stdhl
