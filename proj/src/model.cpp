#include "stdhl/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "stdhl/init.hpp"

namespace stdhl {

std::vector<double> default_quantile_levels() {
    std::vector<double> v;
    for (int i = 1; i <= 19; ++i) v.push_back(0.05 * i);
    return v;
}

std::string to_string(SpatialKind k) {
    switch (k) {
        case SpatialKind::kDynHypergraph: return "dyn-hypergraph";
        case SpatialKind::kStaticGraph: return "static-graph";
        case SpatialKind::kDynGraph: return "dyn-graph";
        case SpatialKind::kStaticHypergraph: return "static-hypergraph";
        case SpatialKind::kNone: return "none";
    }
    return "?";
}

SpatialKind spatial_kind_from_string(const std::string& s) {
    if (s == "dyn-hypergraph") return SpatialKind::kDynHypergraph;
    if (s == "static-graph") return SpatialKind::kStaticGraph;
    if (s == "dyn-graph") return SpatialKind::kDynGraph;
    if (s == "static-hypergraph") return SpatialKind::kStaticHypergraph;
    if (s == "none") return SpatialKind::kNone;
    throw std::invalid_argument("unknown spatial kind '" + s +
                                "' (dyn-hypergraph|static-graph|dyn-graph|static-hypergraph|none)");
}

// ---------------------------------------------------------------------------
// ModelConfig
// ---------------------------------------------------------------------------

void ModelConfig::validate() const {
    if (n_nodes < 1) throw std::invalid_argument("config: n_nodes must be >= 1");
    if (look_back < 1) throw std::invalid_argument("config: look_back must be >= 1");
    if (horizon < 1) throw std::invalid_argument("config: horizon must be >= 1");
    if (nwp_extension < 0) throw std::invalid_argument("config: nwp_extension must be >= 0");
    if (measured_features < 0) throw std::invalid_argument("config: measured_features must be >= 0");
    if (nwp_features < 1) throw std::invalid_argument("config: nwp_features must be >= 1");
    if (hidden < 1 || adjust_width < 1 || n_blocks < 1 || embed_dim < 1 || linear_hidden < 1)
        throw std::invalid_argument("config: widths and block count must be >= 1");
    if (hyperedges < 0) throw std::invalid_argument("config: hyperedges must be >= 0 (0 = auto)");
    check_quantile_levels(quantile_levels);
}

nlohmann::json ModelConfig::to_json() const {
    return {{"n_nodes", n_nodes},
            {"look_back", look_back},
            {"horizon", horizon},
            {"nwp_extension", nwp_extension},
            {"measured_features", measured_features},
            {"nwp_features", nwp_features},
            {"hidden", hidden},
            {"adjust_width", adjust_width},
            {"n_blocks", n_blocks},
            {"embed_dim", embed_dim},
            {"hyperedges", hyperedges},
            {"linear_hidden", linear_hidden},
            {"quantile_levels", quantile_levels},
            {"spatial", to_string(spatial)},
            {"pearson", pearson == PearsonMode::kClipNegative ? "clip" : "abs"},
            {"seed", seed}};
}

namespace {

void reject_unknown_keys(const nlohmann::json& j, const std::vector<std::string>& known,
                         const char* ctx) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw std::invalid_argument(std::string(ctx) + ": unknown key '" + it.key() + "'");
}

}  // namespace

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    reject_unknown_keys(j,
                        {"n_nodes", "look_back", "horizon", "nwp_extension", "measured_features",
                         "nwp_features", "hidden", "adjust_width", "n_blocks", "embed_dim",
                         "hyperedges", "linear_hidden", "quantile_levels", "spatial", "pearson",
                         "seed"},
                        "model config");
    ModelConfig c;
    if (j.contains("n_nodes")) c.n_nodes = j["n_nodes"].get<std::int64_t>();
    if (j.contains("look_back")) c.look_back = j["look_back"].get<std::int64_t>();
    if (j.contains("horizon")) c.horizon = j["horizon"].get<std::int64_t>();
    if (j.contains("nwp_extension")) c.nwp_extension = j["nwp_extension"].get<std::int64_t>();
    if (j.contains("measured_features"))
        c.measured_features = j["measured_features"].get<std::int64_t>();
    if (j.contains("nwp_features")) c.nwp_features = j["nwp_features"].get<std::int64_t>();
    if (j.contains("hidden")) c.hidden = j["hidden"].get<std::int64_t>();
    if (j.contains("adjust_width")) c.adjust_width = j["adjust_width"].get<std::int64_t>();
    if (j.contains("n_blocks")) c.n_blocks = j["n_blocks"].get<std::int64_t>();
    if (j.contains("embed_dim")) c.embed_dim = j["embed_dim"].get<std::int64_t>();
    if (j.contains("hyperedges")) c.hyperedges = j["hyperedges"].get<std::int64_t>();
    if (j.contains("linear_hidden")) c.linear_hidden = j["linear_hidden"].get<std::int64_t>();
    if (j.contains("quantile_levels"))
        c.quantile_levels = j["quantile_levels"].get<std::vector<double>>();
    if (j.contains("spatial")) c.spatial = spatial_kind_from_string(j["spatial"].get<std::string>());
    if (j.contains("pearson")) {
        const auto p = j["pearson"].get<std::string>();
        if (p == "clip") c.pearson = PearsonMode::kClipNegative;
        else if (p == "abs") c.pearson = PearsonMode::kAbsolute;
        else throw std::invalid_argument("model config: pearson must be 'clip' or 'abs'");
    }
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Forecaster base
// ---------------------------------------------------------------------------

void Forecaster::check_input(const Tensor& measured, const Tensor& nwp) const {
    const auto& c = config();
    const Shape want_m{c.measured_channels(), c.n_nodes, c.look_back};
    const Shape want_n{c.nwp_features, c.n_nodes, c.nwp_window()};
    if (measured.shape() != want_m)
        throw std::invalid_argument(kind() + ": measured window expected " + shape_str(want_m) +
                                    ", got " + shape_str(measured.shape()));
    if (nwp.shape() != want_n)
        throw std::invalid_argument(kind() + ": nwp window expected " + shape_str(want_n) +
                                    ", got " + shape_str(nwp.shape()));
}

ForecastQuantiles Forecaster::forecast(const Tensor& measured, const Tensor& nwp) const {
    return ForecastQuantiles::from_raw(forward_raw(measured, nwp), config().quantile_levels);
}

ForecastQuantiles Forecaster::forecast(const WindowSample& w) const {
    return forecast(w.measured, w.nwp);
}

Tensor Forecaster::loss(const WindowSample& w) const {
    return quantile_loss(w.target, forward_raw(w.measured, w.nwp), config().quantile_levels);
}

Tensor Forecaster::transfer_matrix(const WindowSample&) const {
    throw std::invalid_argument("model kind '" + kind() + "' has no spatial operator");
}

void Forecaster::copy_state_from(const Forecaster& other) {
    auto dst_p = parameters();
    auto src_p = other.parameters();
    if (dst_p.size() != src_p.size())
        throw std::invalid_argument("copy_state_from: parameter count mismatch");
    for (std::size_t i = 0; i < dst_p.size(); ++i) {
        if (dst_p[i].shape() != src_p[i].shape())
            throw_shape_mismatch("copy_state_from", dst_p[i].shape(), src_p[i].shape());
        std::copy(src_p[i].data().begin(), src_p[i].data().end(), dst_p[i].data().begin());
    }
    auto dst_b = buffers();
    auto src_b = other.buffers();
    if (dst_b.size() != src_b.size())
        throw std::invalid_argument("copy_state_from: buffer count mismatch");
    for (std::size_t i = 0; i < dst_b.size(); ++i) {
        if (dst_b[i].shape() != src_b[i].shape())
            throw_shape_mismatch("copy_state_from", dst_b[i].shape(), src_b[i].shape());
        std::copy(src_b[i].data().begin(), src_b[i].data().end(), dst_b[i].data().begin());
    }
}

// ---------------------------------------------------------------------------
// STSGL: Pearson operator
// ---------------------------------------------------------------------------

Tensor pearson_operator(const Tensor& history, PearsonMode mode) {
    if (history.ndim() != 2 || history.dim(1) < 2)
        throw std::invalid_argument("pearson_operator: need an N×T history with T >= 2, got " +
                                    shape_str(history.shape()));
    const auto n = history.dim(0), t = history.dim(1);
    std::vector<double> mean(static_cast<std::size_t>(n), 0.0), sd(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        double m = 0.0;
        for (std::int64_t s = 0; s < t; ++s) m += history(i, s);
        m /= static_cast<double>(t);
        mean[static_cast<std::size_t>(i)] = m;
        double v = 0.0;
        for (std::int64_t s = 0; s < t; ++s) {
            const double d = history(i, s) - m;
            v += d * d;
        }
        sd[static_cast<std::size_t>(i)] = std::sqrt(v / static_cast<double>(t));
    }
    std::vector<double> adj(static_cast<std::size_t>(n * n), 0.0);
    for (std::int64_t i = 0; i < n; ++i) {
        adj[static_cast<std::size_t>(i * n + i)] = 1.0;
        for (std::int64_t j = i + 1; j < n; ++j) {
            double r = 0.0;
            const double si = sd[static_cast<std::size_t>(i)], sj = sd[static_cast<std::size_t>(j)];
            if (si > 0.0 && sj > 0.0) {
                double cov = 0.0;
                for (std::int64_t s = 0; s < t; ++s)
                    cov += (history(i, s) - mean[static_cast<std::size_t>(i)]) *
                           (history(j, s) - mean[static_cast<std::size_t>(j)]);
                r = cov / (static_cast<double>(t) * si * sj);
            }
            const double a = mode == PearsonMode::kAbsolute ? std::abs(r) : std::max(0.0, r);
            adj[static_cast<std::size_t>(i * n + j)] = a;
            adj[static_cast<std::size_t>(j * n + i)] = a;
        }
    }
    std::vector<double> deg(static_cast<std::size_t>(n), 0.0);
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < n; ++j)
            deg[static_cast<std::size_t>(i)] += adj[static_cast<std::size_t>(i * n + j)];
    std::vector<double> op(static_cast<std::size_t>(n * n));
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < n; ++j)
            op[static_cast<std::size_t>(i * n + j)] =
                adj[static_cast<std::size_t>(i * n + j)] /
                std::sqrt(deg[static_cast<std::size_t>(i)] * deg[static_cast<std::size_t>(j)]);
    return Tensor::from(std::move(op), {n, n});
}

StaticGraphLayer::StaticGraphLayer(Tensor op) : op_(std::move(op)) {
    if (op_.ndim() != 2 || op_.dim(0) != op_.dim(1))
        throw std::invalid_argument("StaticGraphLayer: operator must be square, got " +
                                    shape_str(op_.shape()));
}

Tensor StaticGraphLayer::forward(const Tensor& x) const { return node_mix(op_, x); }

Tensor StaticGraphLayer::transfer_matrix(const Tensor&) const { return op_.detached_copy(); }

std::unique_ptr<SpatialLayer> StaticGraphLayer::clone() const {
    return std::make_unique<StaticGraphLayer>(op_.detached_copy());
}

// ---------------------------------------------------------------------------
// STDGL: dense network producing a row-stochastic operator
// ---------------------------------------------------------------------------

namespace {
constexpr std::int64_t kDynGraphHidden = 64;
}

DynamicGraphLayer::DynamicGraphLayer(std::int64_t n_nodes, std::int64_t in_channels,
                                     std::int64_t time_len, Rng& rng)
    : n_nodes_(n_nodes), in_channels_(in_channels), time_len_(time_len) {
    const auto flat = in_channels * n_nodes * time_len;
    w1_ = glorot_leaf(rng, {flat, kDynGraphHidden}, flat, kDynGraphHidden);
    b1_ = bias_leaf(rng, {kDynGraphHidden});
    w2_ = glorot_leaf(rng, {kDynGraphHidden, n_nodes * n_nodes}, kDynGraphHidden,
                      n_nodes * n_nodes);
    b2_ = bias_leaf(rng, {n_nodes * n_nodes});
}

Tensor DynamicGraphLayer::operator_matrix(const Tensor& x) const {
    if (x.ndim() != 3 || x.dim(0) != in_channels_ || x.dim(1) != n_nodes_ ||
        x.dim(2) != time_len_)
        throw std::invalid_argument("DynamicGraphLayer: expected input [" +
                                    std::to_string(in_channels_) + "," + std::to_string(n_nodes_) +
                                    "," + std::to_string(time_len_) + "], got " +
                                    shape_str(x.shape()));
    Tensor flat = reshape(x, {1, in_channels_ * n_nodes_ * time_len_});
    Tensor h = relu(add_rows(matmul(flat, w1_), b1_));
    Tensor logits = add_rows(matmul(h, w2_), b2_);
    return softmax(reshape(logits, {n_nodes_, n_nodes_}), 1);
}

Tensor DynamicGraphLayer::forward(const Tensor& x) const {
    return node_mix(operator_matrix(x), x);
}

Tensor DynamicGraphLayer::transfer_matrix(const Tensor& x) const {
    return operator_matrix(x).detached_copy();
}

std::vector<Tensor> DynamicGraphLayer::parameters() const { return {w1_, b1_, w2_, b2_}; }

std::unique_ptr<SpatialLayer> DynamicGraphLayer::clone() const {
    Rng dummy(0);
    auto c = std::make_unique<DynamicGraphLayer>(n_nodes_, in_channels_, time_len_, dummy);
    c->w1_ = copy_leaf(w1_);
    c->b1_ = copy_leaf(b1_);
    c->w2_ = copy_leaf(w2_);
    c->b2_ = copy_leaf(b2_);
    return c;
}

// ---------------------------------------------------------------------------
// STSHL: Gaussian-mixture hyperedges
// ---------------------------------------------------------------------------

HypergraphStructure gmm_incidence(const Tensor& history, std::int64_t n_components,
                                  std::uint64_t seed) {
    if (history.ndim() != 2)
        throw std::invalid_argument("gmm_incidence: history must be N×T, got " +
                                    shape_str(history.shape()));
    const auto n = history.dim(0), d = history.dim(1);
    if (n_components < 1 || n_components > n)
        throw std::invalid_argument("gmm_incidence: need 1 <= components <= " + std::to_string(n) +
                                    ", got " + std::to_string(n_components));
    const auto k = n_components;
    const auto un = static_cast<std::size_t>(n);
    const auto uk = static_cast<std::size_t>(k);
    const auto ud = static_cast<std::size_t>(d);
    constexpr double kVarFloor = 1e-6;
    Rng rng(seed);

    auto x = [&](std::int64_t i, std::int64_t j) { return history(i, j); };

    // k-means++ seeding
    std::vector<double> means(uk * ud);
    std::vector<std::int64_t> chosen;
    chosen.push_back(rng.next_below(n));
    while (static_cast<std::int64_t>(chosen.size()) < k) {
        std::vector<double> dist2(un, 1e300);
        for (std::int64_t i = 0; i < n; ++i)
            for (auto c : chosen) {
                double s = 0.0;
                for (std::int64_t j = 0; j < d; ++j) {
                    const double diff = x(i, j) - x(c, j);
                    s += diff * diff;
                }
                dist2[static_cast<std::size_t>(i)] =
                    std::min(dist2[static_cast<std::size_t>(i)], s);
            }
        double total = 0.0;
        for (double v : dist2) total += v;
        std::int64_t pick = 0;
        if (total <= 0.0) {
            pick = rng.next_below(n);
        } else {
            double r = rng.uniform() * total;
            for (std::int64_t i = 0; i < n; ++i) {
                r -= dist2[static_cast<std::size_t>(i)];
                if (r <= 0.0) {
                    pick = i;
                    break;
                }
            }
        }
        chosen.push_back(pick);
    }
    for (std::int64_t c = 0; c < k; ++c)
        for (std::int64_t j = 0; j < d; ++j)
            means[static_cast<std::size_t>(c * d + j)] = x(chosen[static_cast<std::size_t>(c)], j);

    // Lloyd iterations
    std::vector<std::int64_t> assign(un, 0);
    for (int iter = 0; iter < 20; ++iter) {
        for (std::int64_t i = 0; i < n; ++i) {
            double best = 1e300;
            std::int64_t bc = 0;
            for (std::int64_t c = 0; c < k; ++c) {
                double s = 0.0;
                for (std::int64_t j = 0; j < d; ++j) {
                    const double diff = x(i, j) - means[static_cast<std::size_t>(c * d + j)];
                    s += diff * diff;
                }
                if (s < best) {
                    best = s;
                    bc = c;
                }
            }
            assign[static_cast<std::size_t>(i)] = bc;
        }
        for (std::int64_t c = 0; c < k; ++c) {
            std::int64_t cnt = 0;
            std::vector<double> acc(ud, 0.0);
            for (std::int64_t i = 0; i < n; ++i)
                if (assign[static_cast<std::size_t>(i)] == c) {
                    ++cnt;
                    for (std::int64_t j = 0; j < d; ++j)
                        acc[static_cast<std::size_t>(j)] += x(i, j);
                }
            if (cnt > 0)
                for (std::int64_t j = 0; j < d; ++j)
                    means[static_cast<std::size_t>(c * d + j)] =
                        acc[static_cast<std::size_t>(j)] / static_cast<double>(cnt);
        }
    }

    // EM with diagonal covariance
    std::vector<double> pi(uk, 1.0 / static_cast<double>(k));
    std::vector<double> var(uk * ud, 0.0);
    for (std::int64_t c = 0; c < k; ++c) {
        std::int64_t cnt = 0;
        for (std::int64_t i = 0; i < n; ++i)
            if (assign[static_cast<std::size_t>(i)] == c) {
                ++cnt;
                for (std::int64_t j = 0; j < d; ++j) {
                    const double diff = x(i, j) - means[static_cast<std::size_t>(c * d + j)];
                    var[static_cast<std::size_t>(c * d + j)] += diff * diff;
                }
            }
        for (std::int64_t j = 0; j < d; ++j) {
            auto& v = var[static_cast<std::size_t>(c * d + j)];
            v = cnt > 0 ? v / static_cast<double>(cnt) : 1.0;
            v = std::max(v, kVarFloor);
        }
        pi[static_cast<std::size_t>(c)] =
            std::max(1e-9, static_cast<double>(cnt) / static_cast<double>(n));
    }

    std::vector<double> resp(un * uk, 0.0);
    double prev_ll = -1e300;
    constexpr double kLog2Pi = 1.8378770664093453;
    for (int iter = 0; iter < 100; ++iter) {
        double ll = 0.0;
        for (std::int64_t i = 0; i < n; ++i) {
            std::vector<double> lr(uk);
            double mx = -1e300;
            for (std::int64_t c = 0; c < k; ++c) {
                double lp = std::log(pi[static_cast<std::size_t>(c)]);
                for (std::int64_t j = 0; j < d; ++j) {
                    const double v = var[static_cast<std::size_t>(c * d + j)];
                    const double diff = x(i, j) - means[static_cast<std::size_t>(c * d + j)];
                    lp += -0.5 * (kLog2Pi + std::log(v) + diff * diff / v);
                }
                lr[static_cast<std::size_t>(c)] = lp;
                mx = std::max(mx, lp);
            }
            double z = 0.0;
            for (std::int64_t c = 0; c < k; ++c)
                z += std::exp(lr[static_cast<std::size_t>(c)] - mx);
            ll += mx + std::log(z);
            for (std::int64_t c = 0; c < k; ++c)
                resp[static_cast<std::size_t>(i * k + c)] =
                    std::exp(lr[static_cast<std::size_t>(c)] - mx) / z;
        }
        // M step
        for (std::int64_t c = 0; c < k; ++c) {
            double nk = 0.0;
            for (std::int64_t i = 0; i < n; ++i) nk += resp[static_cast<std::size_t>(i * k + c)];
            if (nk < 1e-12) continue;  // leave a starved component where it is
            for (std::int64_t j = 0; j < d; ++j) {
                double m = 0.0;
                for (std::int64_t i = 0; i < n; ++i)
                    m += resp[static_cast<std::size_t>(i * k + c)] * x(i, j);
                means[static_cast<std::size_t>(c * d + j)] = m / nk;
            }
            for (std::int64_t j = 0; j < d; ++j) {
                double v = 0.0;
                for (std::int64_t i = 0; i < n; ++i) {
                    const double diff = x(i, j) - means[static_cast<std::size_t>(c * d + j)];
                    v += resp[static_cast<std::size_t>(i * k + c)] * diff * diff;
                }
                var[static_cast<std::size_t>(c * d + j)] = std::max(v / nk, kVarFloor);
            }
            pi[static_cast<std::size_t>(c)] = std::max(1e-9, nk / static_cast<double>(n));
        }
        double psum = 0.0;
        for (double p : pi) psum += p;
        for (auto& p : pi) p /= psum;
        if (iter > 0 && std::abs(ll - prev_ll) / (std::abs(prev_ll) + 1e-12) < 1e-6) {
            prev_ll = ll;
            break;
        }
        prev_ll = ll;
    }

    // membership: responsibility above the uniform level
    const double threshold = 1.0 / static_cast<double>(k);
    std::vector<std::vector<std::int64_t>> edges(uk);
    std::vector<bool> covered(un, false);
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t c = 0; c < k; ++c)
            if (resp[static_cast<std::size_t>(i * k + c)] > threshold) {
                edges[static_cast<std::size_t>(c)].push_back(i);
                covered[static_cast<std::size_t>(i)] = true;
            }
    for (std::int64_t i = 0; i < n; ++i) {
        if (covered[static_cast<std::size_t>(i)]) continue;
        std::int64_t best = 0;
        for (std::int64_t c = 1; c < k; ++c)
            if (resp[static_cast<std::size_t>(i * k + c)] >
                resp[static_cast<std::size_t>(i * k + best)])
                best = c;
        edges[static_cast<std::size_t>(best)].push_back(i);
    }
    for (std::int64_t c = 0; c < k; ++c) {
        auto& e = edges[static_cast<std::size_t>(c)];
        if (!e.empty()) continue;
        std::int64_t best = 0;  // most responsible node keeps the edge non-empty
        for (std::int64_t i = 1; i < n; ++i)
            if (resp[static_cast<std::size_t>(i * k + c)] >
                resp[static_cast<std::size_t>(best * k + c)])
                best = i;
        e.push_back(best);
    }
    return incidence_from_hyperedges(n, edges);  // unit weights
}

StaticHypergraphLayer::StaticHypergraphLayer(Tensor gather, Tensor scatter)
    : gather_(std::move(gather)), scatter_(std::move(scatter)) {
    if (gather_.ndim() != 2 || scatter_.ndim() != 2 || gather_.dim(0) != scatter_.dim(1) ||
        gather_.dim(1) != scatter_.dim(0))
        throw_shape_mismatch("StaticHypergraphLayer", gather_.shape(), scatter_.shape());
}

StaticHypergraphLayer StaticHypergraphLayer::from_structure(const HypergraphStructure& g) {
    return StaticHypergraphLayer(hyperedge_gather_op(g), node_scatter_op(g));
}

Tensor StaticHypergraphLayer::forward(const Tensor& x) const {
    return node_mix(scatter_, node_mix(gather_, x));
}

Tensor StaticHypergraphLayer::transfer_matrix(const Tensor&) const {
    return matmul(scatter_.detached_copy(), gather_.detached_copy());
}

std::unique_ptr<SpatialLayer> StaticHypergraphLayer::clone() const {
    return std::make_unique<StaticHypergraphLayer>(gather_.detached_copy(),
                                                   scatter_.detached_copy());
}

// ---------------------------------------------------------------------------
// StdhlModel
// ---------------------------------------------------------------------------

StdhlModel::StdhlModel(ModelConfig cfg, const std::optional<Tensor>& history) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(cfg_.seed);
    const auto n = cfg_.n_nodes;
    const auto n_edges = cfg_.effective_hyperedges();

    Tensor static_op, gather, scatter;
    if (cfg_.spatial == SpatialKind::kStaticGraph) {
        if (history) {
            static_op = pearson_operator(*history, cfg_.pearson);
        } else {
            static_op = Tensor::zeros({n, n});  // placeholder until a checkpoint fills it
            for (std::int64_t i = 0; i < n; ++i)
                static_op.data()[static_cast<std::size_t>(i * n + i)] = 1.0;
        }
    } else if (cfg_.spatial == SpatialKind::kStaticHypergraph) {
        if (history) {
            HypergraphStructure g = gmm_incidence(*history, n_edges, cfg_.seed);
            gather = hyperedge_gather_op(g);
            scatter = node_scatter_op(g);
        } else {
            gather = Tensor::full({n_edges, n}, 1.0 / static_cast<double>(n));
            scatter = Tensor::full({n, n_edges}, 1.0);
        }
    }

    SpatialFactory factory = [&](std::int64_t channels, std::int64_t time_len,
                                 Rng& r) -> std::unique_ptr<SpatialLayer> {
        switch (cfg_.spatial) {
            case SpatialKind::kDynHypergraph:
                return std::make_unique<DynamicHypergraphLayer>(n, n_edges, channels, time_len,
                                                                cfg_.embed_dim, r);
            case SpatialKind::kStaticGraph:
                return std::make_unique<StaticGraphLayer>(static_op.detached_copy());
            case SpatialKind::kDynGraph:
                return std::make_unique<DynamicGraphLayer>(n, channels, time_len, r);
            case SpatialKind::kStaticHypergraph:
                return std::make_unique<StaticHypergraphLayer>(gather.detached_copy(),
                                                               scatter.detached_copy());
            case SpatialKind::kNone:
                return std::make_unique<IdentitySpatialLayer>(n);
        }
        throw std::logic_error("unreachable spatial kind");
    };

    enc_m_ = std::make_unique<SpatioTemporalEncoder>(n, cfg_.measured_channels(), cfg_.hidden,
                                                     cfg_.n_blocks, cfg_.look_back,
                                                     ConvMode::kCausal, factory, rng);
    enc_n_ = std::make_unique<SpatioTemporalEncoder>(n, cfg_.nwp_features, cfg_.hidden,
                                                     cfg_.n_blocks, cfg_.nwp_window(),
                                                     ConvMode::kNonCausal, factory, rng);
    dec_ = std::make_unique<ForecastDecoder>(n, cfg_.hidden, cfg_.adjust_width, cfg_.hidden,
                                             cfg_.n_levels(), cfg_.look_back, cfg_.nwp_window(),
                                             cfg_.horizon, rng);
}

std::string StdhlModel::kind() const {
    switch (cfg_.spatial) {
        case SpatialKind::kStaticGraph: return "stsgl";
        case SpatialKind::kDynGraph: return "stdgl";
        case SpatialKind::kStaticHypergraph: return "stshl";
        default: return "stdhl";
    }
}

Tensor StdhlModel::forward_raw(const Tensor& measured, const Tensor& nwp) const {
    check_input(measured, nwp);
    Tensor xm = enc_m_->forward(measured);
    Tensor xn = enc_n_->forward(nwp);
    return dec_->forward(xm, xn);
}

std::vector<Tensor> StdhlModel::parameters() const {
    std::vector<Tensor> ps = enc_m_->parameters();
    for (auto& p : enc_n_->parameters()) ps.push_back(p);
    for (auto& p : dec_->parameters()) ps.push_back(p);
    return ps;
}

std::vector<Tensor> StdhlModel::buffers() const {
    std::vector<Tensor> bs = enc_m_->buffers();
    for (auto& b : enc_n_->buffers()) bs.push_back(b);
    return bs;
}

std::unique_ptr<Forecaster> StdhlModel::clone() const {
    auto c = std::make_unique<StdhlModel>(cfg_, std::nullopt);
    c->copy_state_from(*this);
    return c;
}

Tensor StdhlModel::transfer_matrix(const WindowSample& w) const {
    Tensor filtered = enc_m_->attention_out(w.measured);
    return enc_m_->spatial(0).transfer_matrix(filtered);
}

// ---------------------------------------------------------------------------
// LinearModel
// ---------------------------------------------------------------------------

LinearModel::LinearModel(ModelConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(cfg_.seed);
    const auto in_dim = cfg_.measured_channels() * cfg_.n_nodes * cfg_.look_back +
                        cfg_.nwp_features * cfg_.n_nodes * cfg_.nwp_window();
    const auto h = cfg_.linear_hidden;
    const auto out_dim = cfg_.n_levels() * cfg_.n_nodes * cfg_.horizon;
    w1_ = glorot_leaf(rng, {in_dim, h}, in_dim, h);
    b1_ = bias_leaf(rng, {h});
    w2_ = glorot_leaf(rng, {h, h}, h, h);
    b2_ = bias_leaf(rng, {h});
    w3_ = glorot_leaf(rng, {h, out_dim}, h, out_dim);
    b3_ = bias_leaf(rng, {out_dim});
}

Tensor LinearModel::forward_raw(const Tensor& measured, const Tensor& nwp) const {
    check_input(measured, nwp);
    Tensor flat = concat({reshape(measured, {1, measured.numel()}),
                          reshape(nwp, {1, nwp.numel()})},
                         1);
    Tensor h1 = relu(add_rows(matmul(flat, w1_), b1_));
    Tensor h2 = relu(add_rows(matmul(h1, w2_), b2_));
    Tensor out = add_rows(matmul(h2, w3_), b3_);
    return reshape(out, {cfg_.n_levels(), cfg_.n_nodes, cfg_.horizon});
}

std::vector<Tensor> LinearModel::parameters() const { return {w1_, b1_, w2_, b2_, w3_, b3_}; }

std::unique_ptr<Forecaster> LinearModel::clone() const {
    auto c = std::make_unique<LinearModel>(cfg_);
    c->copy_state_from(*this);
    return c;
}

// ---------------------------------------------------------------------------
// baselines
// ---------------------------------------------------------------------------

Tensor persistence_forecast(const Tensor& y_hist, std::int64_t horizon) {
    if (y_hist.ndim() != 2 || y_hist.dim(1) < 1)
        throw std::invalid_argument("persistence_forecast: empty history " +
                                    shape_str(y_hist.shape()));
    if (horizon < 1) throw std::invalid_argument("persistence_forecast: horizon must be >= 1");
    const auto n = y_hist.dim(0), t_hist = y_hist.dim(1);
    Tensor out = Tensor::zeros({n, horizon});
    for (std::int64_t i = 0; i < n; ++i) {
        const double last = y_hist(i, t_hist - 1);
        for (std::int64_t h = 0; h < horizon; ++h)
            out.data()[static_cast<std::size_t>(i * horizon + h)] = last;
    }
    return out;
}

PersistenceModel::PersistenceModel(ModelConfig cfg) : cfg_(cfg) { cfg_.validate(); }

Tensor PersistenceModel::forward_raw(const Tensor& measured, const Tensor& nwp) const {
    check_input(measured, nwp);
    Tensor hist = reshape(slice(measured, 0, 0, 1), {cfg_.n_nodes, cfg_.look_back});
    Tensor point = persistence_forecast(hist, cfg_.horizon);
    std::vector<Tensor> levels(static_cast<std::size_t>(cfg_.n_levels()),
                               reshape(point, {1, cfg_.n_nodes, cfg_.horizon}));
    return concat(levels, 0);
}

std::unique_ptr<Forecaster> PersistenceModel::clone() const {
    return std::make_unique<PersistenceModel>(cfg_);
}

Tensor mechanism_forecast(const Tensor& nwp_speed100, const PowerCurve& curve) {
    Tensor out = Tensor::zeros(nwp_speed100.shape());
    for (std::int64_t i = 0; i < nwp_speed100.numel(); ++i) {
        const double s = nwp_speed100.data()[static_cast<std::size_t>(i)];
        if (s < 0.0)
            throw std::invalid_argument("mechanism_forecast: negative wind speed " +
                                        std::to_string(s));
        out.data()[static_cast<std::size_t>(i)] = curve.power(s);
    }
    return out;
}

MechanismModel::MechanismModel(ModelConfig cfg, PowerCurve curve)
    : cfg_(cfg), curve_(std::move(curve)) {
    cfg_.validate();
}

Tensor MechanismModel::forward_raw(const Tensor& measured, const Tensor& nwp) const {
    check_input(measured, nwp);
    const auto n = cfg_.n_nodes, t = cfg_.horizon, ext = cfg_.nwp_extension;
    Tensor speeds = Tensor::zeros({n, t});
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t h = 0; h < t; ++h)
            speeds.data()[static_cast<std::size_t>(i * t + h)] =
                nwp(kSpeed100Channel, i, ext + h);
    Tensor point = mechanism_forecast(speeds, curve_);
    std::vector<Tensor> levels(static_cast<std::size_t>(cfg_.n_levels()),
                               reshape(point, {1, n, t}));
    return concat(levels, 0);
}

std::unique_ptr<Forecaster> MechanismModel::clone() const {
    return std::make_unique<MechanismModel>(cfg_, curve_);
}

// ---------------------------------------------------------------------------
// factory
// ---------------------------------------------------------------------------

const std::vector<std::string> kTrainableModelNames = {"stdhl", "stsgl", "stdgl", "stshl",
                                                       "linear"};
const std::vector<std::string> kBaselineModelNames = {"persistence", "mechanism"};

std::unique_ptr<Forecaster> make_forecaster(const std::string& name, ModelConfig cfg,
                                            const std::optional<Tensor>& history,
                                            const PowerCurve* curve) {
    if (name == "stdhl") {
        if (cfg.spatial == SpatialKind::kStaticGraph ||
            cfg.spatial == SpatialKind::kDynGraph ||
            cfg.spatial == SpatialKind::kStaticHypergraph)
            cfg.spatial = SpatialKind::kDynHypergraph;
        return std::make_unique<StdhlModel>(cfg, history);
    }
    if (name == "stsgl") {
        cfg.spatial = SpatialKind::kStaticGraph;
        return std::make_unique<StdhlModel>(cfg, history);
    }
    if (name == "stdgl") {
        cfg.spatial = SpatialKind::kDynGraph;
        return std::make_unique<StdhlModel>(cfg, history);
    }
    if (name == "stshl") {
        cfg.spatial = SpatialKind::kStaticHypergraph;
        return std::make_unique<StdhlModel>(cfg, history);
    }
    if (name == "linear") return std::make_unique<LinearModel>(cfg);
    if (name == "persistence") return std::make_unique<PersistenceModel>(cfg);
    if (name == "mechanism")
        return std::make_unique<MechanismModel>(cfg,
                                                curve ? *curve : PowerCurve::default_ge15());
    std::string valid;
    for (const auto& m : kTrainableModelNames) valid += m + " ";
    for (const auto& m : kBaselineModelNames) valid += m + " ";
    throw std::invalid_argument("unknown model '" + name + "'; valid names: " + valid);
}

}  // namespace stdhl
