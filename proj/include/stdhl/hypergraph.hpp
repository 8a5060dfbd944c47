#pragma once

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "stdhl/rng.hpp"
#include "stdhl/tensor.hpp"

namespace stdhl {

// Static hypergraph: binary incidence plus degree bookkeeping. Immutable
// after construction.
struct HypergraphStructure {
    std::int64_t n_nodes = 0;
    std::int64_t n_hyperedges = 0;
    std::vector<double> incidence;          // N×I, entries in {0,1}
    std::vector<double> weights;            // length I, positive
    std::vector<double> node_degrees;       // D_v(i,i) = sum_j W_j H(i,j)
    std::vector<double> hyperedge_degrees;  // D_e(j,j) = sum_i H(i,j)

    double h(std::int64_t i, std::int64_t j) const {
        return incidence[static_cast<std::size_t>(i * n_hyperedges + j)];
    }
};

// H(i,j)=1 iff node i is in hyperedge j; unit weights unless given.
HypergraphStructure incidence_from_hyperedges(
    std::int64_t n_nodes, const std::vector<std::vector<std::int64_t>>& hyperedges,
    std::vector<double> weights = {});

// L = I - D_v^{-1/2} H W D_e^{-1} Hᵀ D_v^{-1/2}; throws naming any zero-degree node.
Tensor normalized_laplacian(const HypergraphStructure& h);

// Two-stage operators of the static convolution.
Tensor hyperedge_gather_op(const HypergraphStructure& h);  // I×N: W D_e^{-1} Hᵀ D_v^{-1/2}
Tensor node_scatter_op(const HypergraphStructure& h);      // N×I: D_v^{-1/2} H
// Their product, the full node-to-node mixing operator (N×N).
Tensor static_operator(const HypergraphStructure& h);

// x'' = theta · D_v^{-1/2} H · (W D_e^{-1} Hᵀ D_v^{-1/2} x); theta optional (identity).
Tensor static_hyperconv(const Tensor& x, const HypergraphStructure& h,
                        const Tensor& theta = Tensor());

// Chebyshev recurrence T_0=1, T_1(a)=a, T_k = 2a T_{k-1} - T_{k-2}.
double chebyshev_eval(int k, double a);

// alpha-blended two-stage mixing: out = alpha * H_n (H_e x) + (1-alpha) x.
Tensor hyper_mix(const Tensor& h_e, const Tensor& h_n, const Tensor& alpha, const Tensor& x);

// Node-axis mixing layer used inside an encoder block. Forward must be pure
// (read-only on parameters) so frozen models can be evaluated concurrently.
class SpatialLayer {
public:
    virtual ~SpatialLayer() = default;
    virtual Tensor forward(const Tensor& x) const = 0;                 // C×N×T -> C×N×T
    virtual Tensor transfer_matrix(const Tensor& x) const = 0;         // effective N×N operator
    virtual std::vector<Tensor> parameters() const = 0;
    virtual std::vector<Tensor> buffers() const { return {}; }               // non-trainable state
    virtual std::unique_ptr<SpatialLayer> clone() const = 0;
};

// Input-conditioned incidence: node/hyperedge embeddings, softmax over
// negative embedding distances, self-loop blend via sigmoid(logit).
class DynamicHypergraphLayer final : public SpatialLayer {
public:
    DynamicHypergraphLayer(std::int64_t n_nodes, std::int64_t n_hyperedges,
                           std::int64_t in_channels, std::int64_t time_len,
                           std::int64_t embed_dim, Rng& rng);

    // (node embeddings N×D, hyperedge embeddings I×D)
    std::pair<Tensor, Tensor> embeddings(const Tensor& x) const;
    // (H_e I×N row-stochastic, H_n N×I row-stochastic)
    std::pair<Tensor, Tensor> incidence(const Tensor& x) const;
    static std::pair<Tensor, Tensor> incidence_from_embeddings(const Tensor& node_emb,
                                                               const Tensor& edge_emb);

    Tensor alpha() const;

    Tensor forward(const Tensor& x) const override;
    Tensor transfer_matrix(const Tensor& x) const override;
    std::vector<Tensor> parameters() const override;
    std::unique_ptr<SpatialLayer> clone() const override;

    std::int64_t n_nodes() const { return n_nodes_; }
    std::int64_t n_hyperedges() const { return n_hyperedges_; }

private:
    std::int64_t n_nodes_, n_hyperedges_, in_channels_, time_len_, embed_dim_;
    Tensor w_node_, b_node_;   // per-node feature encoder (C·T -> D)
    Tensor edge_base_;         // free I×D embedding table
    Tensor w_proj_, b_proj_;   // projection of the mean node embedding
    Tensor self_loop_logit_;   // alpha = sigmoid(logit)
};

// Pass-through layer for the "none" spatial configuration.
class IdentitySpatialLayer final : public SpatialLayer {
public:
    explicit IdentitySpatialLayer(std::int64_t n_nodes) : n_nodes_(n_nodes) {}
    Tensor forward(const Tensor& x) const override { return x; }
    Tensor transfer_matrix(const Tensor&) const override;
    std::vector<Tensor> parameters() const override { return {}; }
    std::unique_ptr<SpatialLayer> clone() const override {
        return std::make_unique<IdentitySpatialLayer>(n_nodes_);
    }

private:
    std::int64_t n_nodes_;
};

}  // namespace stdhl
