#include "stdhl/hypergraph.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "stdhl/init.hpp"

namespace stdhl {

HypergraphStructure incidence_from_hyperedges(
    std::int64_t n_nodes, const std::vector<std::vector<std::int64_t>>& hyperedges,
    std::vector<double> weights) {
    if (n_nodes < 1) throw std::invalid_argument("incidence_from_hyperedges: need n_nodes >= 1");
    HypergraphStructure g;
    g.n_nodes = n_nodes;
    g.n_hyperedges = static_cast<std::int64_t>(hyperedges.size());
    if (weights.empty()) weights.assign(hyperedges.size(), 1.0);
    if (static_cast<std::int64_t>(weights.size()) != g.n_hyperedges)
        throw std::invalid_argument("incidence_from_hyperedges: weight count " +
                                    std::to_string(weights.size()) + " != hyperedge count " +
                                    std::to_string(g.n_hyperedges));
    for (double w : weights)
        if (!(w > 0.0))
            throw std::invalid_argument("incidence_from_hyperedges: weights must be positive");
    g.weights = std::move(weights);
    g.incidence.assign(static_cast<std::size_t>(n_nodes * g.n_hyperedges), 0.0);
    for (std::int64_t j = 0; j < g.n_hyperedges; ++j) {
        const auto& e = hyperedges[static_cast<std::size_t>(j)];
        if (e.empty())
            throw std::invalid_argument("incidence_from_hyperedges: hyperedge " +
                                        std::to_string(j) + " is empty");
        for (auto v : e) {
            if (v < 0 || v >= n_nodes)
                throw std::invalid_argument("incidence_from_hyperedges: node index " +
                                            std::to_string(v) + " out of range [0," +
                                            std::to_string(n_nodes) + ") in hyperedge " +
                                            std::to_string(j));
            g.incidence[static_cast<std::size_t>(v * g.n_hyperedges + j)] = 1.0;
        }
    }
    g.node_degrees.assign(static_cast<std::size_t>(n_nodes), 0.0);
    g.hyperedge_degrees.assign(static_cast<std::size_t>(g.n_hyperedges), 0.0);
    for (std::int64_t i = 0; i < n_nodes; ++i)
        for (std::int64_t j = 0; j < g.n_hyperedges; ++j) {
            const double hij = g.h(i, j);
            g.node_degrees[static_cast<std::size_t>(i)] +=
                g.weights[static_cast<std::size_t>(j)] * hij;
            g.hyperedge_degrees[static_cast<std::size_t>(j)] += hij;
        }
    return g;
}

namespace {

void require_positive_degrees(const HypergraphStructure& g, const char* op) {
    for (std::int64_t i = 0; i < g.n_nodes; ++i)
        if (!(g.node_degrees[static_cast<std::size_t>(i)] > 0.0))
            throw std::invalid_argument(std::string(op) + ": node " + std::to_string(i) +
                                        " has zero degree (belongs to no hyperedge)");
}

}  // namespace

Tensor hyperedge_gather_op(const HypergraphStructure& g) {
    require_positive_degrees(g, "hyperedge_gather_op");
    const auto n = g.n_nodes, m = g.n_hyperedges;
    std::vector<double> op(static_cast<std::size_t>(m * n));
    for (std::int64_t j = 0; j < m; ++j) {
        const double wj = g.weights[static_cast<std::size_t>(j)];
        const double de = g.hyperedge_degrees[static_cast<std::size_t>(j)];
        for (std::int64_t i = 0; i < n; ++i)
            op[static_cast<std::size_t>(j * n + i)] =
                wj / de * g.h(i, j) / std::sqrt(g.node_degrees[static_cast<std::size_t>(i)]);
    }
    return Tensor::from(std::move(op), {m, n});
}

Tensor node_scatter_op(const HypergraphStructure& g) {
    require_positive_degrees(g, "node_scatter_op");
    const auto n = g.n_nodes, m = g.n_hyperedges;
    std::vector<double> op(static_cast<std::size_t>(n * m));
    for (std::int64_t i = 0; i < n; ++i) {
        const double dv = std::sqrt(g.node_degrees[static_cast<std::size_t>(i)]);
        for (std::int64_t j = 0; j < m; ++j)
            op[static_cast<std::size_t>(i * m + j)] = g.h(i, j) / dv;
    }
    return Tensor::from(std::move(op), {n, m});
}

Tensor static_operator(const HypergraphStructure& g) {
    return matmul(node_scatter_op(g), hyperedge_gather_op(g));
}

Tensor normalized_laplacian(const HypergraphStructure& g) {
    require_positive_degrees(g, "normalized_laplacian");
    Tensor mix = static_operator(g);
    const auto n = g.n_nodes;
    std::vector<double> l(static_cast<std::size_t>(n * n));
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < n; ++j)
            l[static_cast<std::size_t>(i * n + j)] = (i == j ? 1.0 : 0.0) - mix(i, j);
    return Tensor::from(std::move(l), {n, n});
}

Tensor static_hyperconv(const Tensor& x, const HypergraphStructure& g, const Tensor& theta) {
    if (x.ndim() != 2 || x.dim(0) != g.n_nodes)
        throw std::invalid_argument("static_hyperconv: expected x with " +
                                    std::to_string(g.n_nodes) + " rows, got " +
                                    shape_str(x.shape()));
    Tensor edge_feat = matmul(hyperedge_gather_op(g), x);   // I×T
    Tensor node_feat = matmul(node_scatter_op(g), edge_feat);  // N×T
    if (theta.defined()) node_feat = matmul(theta, node_feat);
    return node_feat;
}

double chebyshev_eval(int k, double a) {
    if (k < 0) throw std::invalid_argument("chebyshev_eval: order must be >= 0");
    if (k == 0) return 1.0;
    if (k == 1) return a;
    double tkm2 = 1.0, tkm1 = a;
    for (int i = 2; i <= k; ++i) {
        const double tk = 2.0 * a * tkm1 - tkm2;
        tkm2 = tkm1;
        tkm1 = tk;
    }
    return tkm1;
}

Tensor hyper_mix(const Tensor& h_e, const Tensor& h_n, const Tensor& alpha, const Tensor& x) {
    if (x.ndim() != 3 || h_e.ndim() != 2 || h_n.ndim() != 2 || h_e.dim(1) != x.dim(1) ||
        h_n.dim(0) != x.dim(1) || h_n.dim(1) != h_e.dim(0))
        throw_shape_mismatch("hyper_mix", h_e.shape(), x.shape());
    Tensor edge_feat = node_mix(h_e, x);   // C×I×T
    Tensor mixed = node_mix(h_n, edge_feat);  // C×N×T
    Tensor keep = sub(Tensor::scalar(1.0), alpha);
    return add(scale(mixed, alpha), scale(x, keep));
}

// ---------------------------------------------------------------------------
// DynamicHypergraphLayer
// ---------------------------------------------------------------------------

DynamicHypergraphLayer::DynamicHypergraphLayer(std::int64_t n_nodes, std::int64_t n_hyperedges,
                                               std::int64_t in_channels, std::int64_t time_len,
                                               std::int64_t embed_dim, Rng& rng)
    : n_nodes_(n_nodes),
      n_hyperedges_(n_hyperedges),
      in_channels_(in_channels),
      time_len_(time_len),
      embed_dim_(embed_dim) {
    if (n_nodes < 1 || n_hyperedges < 1 || in_channels < 1 || time_len < 1 || embed_dim < 1)
        throw std::invalid_argument("DynamicHypergraphLayer: all extents must be >= 1");
    const auto flat = in_channels * time_len;
    w_node_ = glorot_leaf(rng, {flat, embed_dim}, flat, embed_dim);
    b_node_ = bias_leaf(rng, {embed_dim});
    edge_base_ = glorot_leaf(rng, {n_hyperedges, embed_dim}, embed_dim, embed_dim);
    w_proj_ = glorot_leaf(rng, {embed_dim, embed_dim}, embed_dim, embed_dim);
    b_proj_ = bias_leaf(rng, {embed_dim});
    self_loop_logit_ = Tensor::leaf({0.0}, {1});
}

std::pair<Tensor, Tensor> DynamicHypergraphLayer::embeddings(const Tensor& x) const {
    if (x.ndim() != 3 || x.dim(0) != in_channels_ || x.dim(1) != n_nodes_ ||
        x.dim(2) != time_len_)
        throw std::invalid_argument("DynamicHypergraphLayer: expected input [" +
                                    std::to_string(in_channels_) + "," +
                                    std::to_string(n_nodes_) + "," + std::to_string(time_len_) +
                                    "], got " + shape_str(x.shape()));
    Tensor feats = reshape(permute(x, {1, 0, 2}), {n_nodes_, in_channels_ * time_len_});
    Tensor node_emb = add_rows(matmul(feats, w_node_), b_node_);
    Tensor mean_emb = mean_axis(node_emb, 0);  // {D}
    Tensor proj = add_rows(matmul(reshape(mean_emb, {1, embed_dim_}), w_proj_), b_proj_);
    Tensor edge_emb = add_rows(edge_base_, reshape(proj, {embed_dim_}));
    return {node_emb, edge_emb};
}

std::pair<Tensor, Tensor> DynamicHypergraphLayer::incidence_from_embeddings(
    const Tensor& node_emb, const Tensor& edge_emb) {
    Tensor dist = pairwise_distance(node_emb, edge_emb);  // N×I
    Tensor neg = mul_scalar(dist, -1.0);
    Tensor h_e = transpose(softmax(neg, 0));  // rows over nodes
    Tensor h_n = softmax(neg, 1);             // rows over hyperedges
    return {h_e, h_n};
}

std::pair<Tensor, Tensor> DynamicHypergraphLayer::incidence(const Tensor& x) const {
    auto [node_emb, edge_emb] = embeddings(x);
    return incidence_from_embeddings(node_emb, edge_emb);
}

Tensor DynamicHypergraphLayer::alpha() const { return sigmoid(self_loop_logit_); }

Tensor DynamicHypergraphLayer::forward(const Tensor& x) const {
    auto [h_e, h_n] = incidence(x);
    return hyper_mix(h_e, h_n, alpha(), x);
}

Tensor DynamicHypergraphLayer::transfer_matrix(const Tensor& x) const {
    auto [h_e, h_n] = incidence(x);
    Tensor mix = matmul(h_n.detached_copy(), h_e.detached_copy());  // N×N
    const double a = alpha().item();
    std::vector<double> m(static_cast<std::size_t>(n_nodes_ * n_nodes_));
    for (std::int64_t i = 0; i < n_nodes_; ++i)
        for (std::int64_t j = 0; j < n_nodes_; ++j)
            m[static_cast<std::size_t>(i * n_nodes_ + j)] =
                a * mix(i, j) + (i == j ? 1.0 - a : 0.0);
    return Tensor::from(std::move(m), {n_nodes_, n_nodes_});
}

std::vector<Tensor> DynamicHypergraphLayer::parameters() const {
    return {w_node_, b_node_, edge_base_, w_proj_, b_proj_, self_loop_logit_};
}

std::unique_ptr<SpatialLayer> DynamicHypergraphLayer::clone() const {
    Rng dummy(0);
    auto c = std::make_unique<DynamicHypergraphLayer>(n_nodes_, n_hyperedges_, in_channels_,
                                                      time_len_, embed_dim_, dummy);
    c->w_node_ = copy_leaf(w_node_);
    c->b_node_ = copy_leaf(b_node_);
    c->edge_base_ = copy_leaf(edge_base_);
    c->w_proj_ = copy_leaf(w_proj_);
    c->b_proj_ = copy_leaf(b_proj_);
    c->self_loop_logit_ = copy_leaf(self_loop_logit_);
    return c;
}

Tensor IdentitySpatialLayer::transfer_matrix(const Tensor&) const {
    std::vector<double> m(static_cast<std::size_t>(n_nodes_ * n_nodes_), 0.0);
    for (std::int64_t i = 0; i < n_nodes_; ++i) m[static_cast<std::size_t>(i * n_nodes_ + i)] = 1.0;
    return Tensor::from(std::move(m), {n_nodes_, n_nodes_});
}

}  // namespace stdhl
