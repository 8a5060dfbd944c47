#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "stdhl/gradcheck.hpp"
#include "stdhl/hypergraph.hpp"
#include "stdhl/rng.hpp"
#include "stdhl/tensor.hpp"

using namespace stdhl;

namespace {

Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Tensor::from(std::move(v), std::move(shape));
}

// dense symmetric eigenvalues via cyclic Jacobi rotations (test oracle)
std::vector<double> sym_eigenvalues(std::vector<double> a, std::int64_t n) {
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::int64_t p = 0; p < n; ++p)
            for (std::int64_t q = p + 1; q < n; ++q) off += std::abs(a[p * n + q]);
        if (off < 1e-13) break;
        for (std::int64_t p = 0; p < n; ++p) {
            for (std::int64_t q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (std::abs(apq) < 1e-300) continue;
                const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::int64_t k = 0; k < n; ++k) {
                    const double akp = a[k * n + p], akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (std::int64_t k = 0; k < n; ++k) {
                    const double apk = a[p * n + k], aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> ev(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) ev[static_cast<std::size_t>(i)] = a[i * n + i];
    return ev;
}

HypergraphStructure random_pairwise_graph(Rng& rng, std::int64_t n) {
    // connected-ish random graph as a pair list: a spanning chain plus extras
    std::vector<std::vector<std::int64_t>> edges;
    for (std::int64_t i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1});
    for (int extra = 0; extra < 3; ++extra) {
        const auto a = rng.next_below(n);
        const auto b = rng.next_below(n);
        if (a != b) edges.push_back({std::min(a, b), std::max(a, b)});
    }
    return incidence_from_hyperedges(n, edges);
}

// independent graph-side evaluation of the pairwise-reduced operator:
// op = 1/2 * D^{-1/2} (A + D) D^{-1/2} with multiplicity adjacency A
std::vector<double> graph_conv_oracle(const HypergraphStructure& g, const Tensor& x) {
    const auto n = g.n_nodes;
    std::vector<double> adj(static_cast<std::size_t>(n * n), 0.0);
    std::vector<double> deg(static_cast<std::size_t>(n), 0.0);
    for (std::int64_t j = 0; j < g.n_hyperedges; ++j) {
        std::vector<std::int64_t> members;
        for (std::int64_t i = 0; i < n; ++i)
            if (g.h(i, j) > 0.5) members.push_back(i);
        REQUIRE(members.size() == 2);
        adj[members[0] * n + members[1]] += 1.0;
        adj[members[1] * n + members[0]] += 1.0;
        deg[static_cast<std::size_t>(members[0])] += 1.0;
        deg[static_cast<std::size_t>(members[1])] += 1.0;
    }
    const auto t = x.dim(1);
    std::vector<double> out(static_cast<std::size_t>(n * t), 0.0);
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t k = 0; k < n; ++k) {
            const double a = adj[i * n + k] + (i == k ? deg[static_cast<std::size_t>(i)] : 0.0);
            if (a == 0.0) continue;
            const double w = 0.5 * a / std::sqrt(deg[static_cast<std::size_t>(i)] *
                                                 deg[static_cast<std::size_t>(k)]);
            for (std::int64_t s = 0; s < t; ++s) out[i * t + s] += w * x(k, s);
        }
    }
    return out;
}

}  // namespace

TEST_CASE("incidence_from_hyperedges: membership pattern and degrees") {
    // 7 nodes, first hyperedge {v1, v2, v7} plus two fillers covering the rest
    auto g = incidence_from_hyperedges(7, {{0, 1, 6}, {2, 3, 4}, {4, 5}});
    for (std::int64_t i = 0; i < 7; ++i)
        CHECK(g.h(i, 0) == ((i == 0 || i == 1 || i == 6) ? 1.0 : 0.0));
    CHECK(g.hyperedge_degrees[0] == 3.0);

    // a node in exactly one unit-weight hyperedge has degree 1
    CHECK(g.node_degrees[0] == 1.0);
    CHECK(g.node_degrees[4] == 2.0);

    // every hyperedge a node pair: structurally a plain graph edge list
    auto pairs = incidence_from_hyperedges(3, {{0, 1}, {1, 2}});
    for (std::int64_t j = 0; j < pairs.n_hyperedges; ++j)
        CHECK(pairs.hyperedge_degrees[static_cast<std::size_t>(j)] == 2.0);

    CHECK_THROWS_AS(incidence_from_hyperedges(3, {{0}, {}}), std::invalid_argument);
    CHECK_THROWS_AS(incidence_from_hyperedges(3, {{0, 3}}), std::invalid_argument);
}

TEST_CASE("normalized_laplacian: two-node hand value") {
    auto g = incidence_from_hyperedges(2, {{0, 1}});
    Tensor l = normalized_laplacian(g);
    CHECK(l(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(l(0, 1) == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(l(1, 0) == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(l(1, 1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("normalized_laplacian: pairwise path equals half the graph Laplacian") {
    auto g = incidence_from_hyperedges(3, {{0, 1}, {1, 2}});
    Tensor l = normalized_laplacian(g);
    // independently coded normalized graph Laplacian of the 3-node path
    const double deg[3] = {1, 2, 1};
    const double adj[3][3] = {{0, 1, 0}, {1, 0, 1}, {0, 1, 0}};
    for (std::int64_t i = 0; i < 3; ++i)
        for (std::int64_t j = 0; j < 3; ++j) {
            const double lg = (i == j ? 1.0 : 0.0) - adj[i][j] / std::sqrt(deg[i] * deg[j]);
            CHECK(l(i, j) == doctest::Approx(0.5 * lg).epsilon(1e-10));
        }
}

TEST_CASE("normalized_laplacian: symmetry, spectrum in [0,2], zero-degree error") {
    Rng rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        const std::int64_t n = 5;
        std::vector<std::vector<std::int64_t>> edges;
        for (int e = 0; e < 4; ++e) {
            std::vector<std::int64_t> ed;
            for (std::int64_t i = 0; i < n; ++i)
                if (rng.uniform() < 0.5) ed.push_back(i);
            if (ed.size() < 2) ed = {rng.next_below(n), (rng.next_below(n - 1) + 1 + trial) % n};
            edges.push_back(ed);
        }
        edges.push_back({0, 1, 2, 3, 4});  // keep all degrees positive
        auto g = incidence_from_hyperedges(n, edges);
        Tensor l = normalized_laplacian(g);
        double asym = 0.0;
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t j = 0; j < n; ++j) asym = std::max(asym, std::abs(l(i, j) - l(j, i)));
        CHECK(asym <= 1e-12);
        auto ev = sym_eigenvalues(std::vector<double>(l.data().begin(), l.data().end()), n);
        for (double e : ev) {
            CHECK(e >= -1e-9);
            CHECK(e <= 2.0 + 1e-9);
        }
    }

    auto lonely = incidence_from_hyperedges(3, {{0, 1}});  // node 2 uncovered
    try {
        normalized_laplacian(lonely);
        FAIL("expected zero-degree error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("node 2") != std::string::npos);
    }
}

TEST_CASE("static_hyperconv: full-mixing hyperedge gives a rank-1 pattern") {
    Rng rng(4);
    const std::int64_t n = 4, t = 3;
    auto g = incidence_from_hyperedges(n, {{0, 1, 2, 3}});
    Tensor x = random_tensor(rng, {n, t});
    Tensor y = static_hyperconv(x, g);
    for (std::int64_t i = 1; i < n; ++i)
        for (std::int64_t s = 0; s < t; ++s)
            CHECK(y(i, s) == doctest::Approx(y(0, s)).epsilon(1e-12));
}

TEST_CASE("static_hyperconv: two-stage composition equals the one-shot product") {
    Rng rng(5);
    for (int trial = 0; trial < 6; ++trial) {
        const std::int64_t n = 5, t = 4;
        std::vector<std::vector<std::int64_t>> edges;
        for (int e = 0; e < 3; ++e) {
            std::vector<std::int64_t> ed;
            for (std::int64_t i = 0; i < n; ++i)
                if (rng.uniform() < 0.6) ed.push_back(i);
            if (ed.empty()) ed.push_back(rng.next_below(n));
            edges.push_back(ed);
        }
        edges.push_back({0, 1, 2, 3, 4});
        std::vector<double> weights;
        for (std::size_t e = 0; e < edges.size(); ++e) weights.push_back(rng.uniform(0.5, 2.0));
        auto g = incidence_from_hyperedges(n, edges, weights);
        Tensor x = random_tensor(rng, {n, t});
        Tensor two_stage = static_hyperconv(x, g);

        // direct dense evaluation of Dv^-1/2 H W De^-1 H^T Dv^-1/2 x
        std::vector<double> direct(static_cast<std::size_t>(n * t), 0.0);
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t k = 0; k < n; ++k) {
                double m = 0.0;
                for (std::int64_t j = 0; j < g.n_hyperedges; ++j)
                    m += g.h(i, j) * g.weights[static_cast<std::size_t>(j)] /
                         g.hyperedge_degrees[static_cast<std::size_t>(j)] * g.h(k, j);
                m /= std::sqrt(g.node_degrees[static_cast<std::size_t>(i)] *
                               g.node_degrees[static_cast<std::size_t>(k)]);
                for (std::int64_t s = 0; s < t; ++s) direct[i * t + s] += m * x(k, s);
            }
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t s = 0; s < t; ++s)
                CHECK(two_stage(i, s) == doctest::Approx(direct[i * t + s]).epsilon(1e-10));
    }
}

TEST_CASE("static_hyperconv: zero input, theta application, gradient flow") {
    Rng rng(6);
    auto g = incidence_from_hyperedges(4, {{0, 1}, {1, 2, 3}, {0, 3}});
    Tensor zero = Tensor::zeros({4, 3});
    Tensor zero_out = static_hyperconv(zero, g);
    for (double v : zero_out.data()) CHECK(v == 0.0);

    Tensor x = random_tensor(rng, {4, 3});
    Tensor theta = random_tensor(rng, {4, 4});
    Tensor with_theta = static_hyperconv(x, g, theta);
    Tensor manual = matmul(theta, static_hyperconv(x, g));
    for (std::int64_t i = 0; i < with_theta.numel(); ++i)
        CHECK(with_theta.data()[static_cast<std::size_t>(i)] ==
              doctest::Approx(manual.data()[static_cast<std::size_t>(i)]).epsilon(1e-12));

    CHECK(finite_diff_check([&] { return sum(static_hyperconv(x, g)); }, x) < 1e-4);
    CHECK_THROWS_AS(static_hyperconv(random_tensor(rng, {3, 3}), g), std::invalid_argument);
}

TEST_CASE("hypergraph reduction: pairwise static_hyperconv matches a graph convolution") {
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        auto g = random_pairwise_graph(rng, 6);
        Tensor x = random_tensor(rng, {6, 5});
        Tensor hyper = static_hyperconv(x, g);
        auto graph = graph_conv_oracle(g, x);
        for (std::int64_t i = 0; i < hyper.numel(); ++i)
            CHECK(std::abs(hyper.data()[static_cast<std::size_t>(i)] -
                           graph[static_cast<std::size_t>(i)]) < 1e-8);
    }
}

TEST_CASE("chebyshev_eval: recurrence identities") {
    Rng rng(8);
    for (int i = 0; i < 5; ++i) CHECK(chebyshev_eval(0, rng.uniform(-3, 3)) == 1.0);
    CHECK(chebyshev_eval(2, 0.5) == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(chebyshev_eval(3, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
    // against the closed form on [-1,1]
    for (int trial = 0; trial < 20; ++trial) {
        const double a = rng.uniform(-1.0, 1.0);
        const int k = static_cast<int>(rng.next_below(8));
        CHECK(chebyshev_eval(k, a) ==
              doctest::Approx(std::cos(k * std::acos(a))).epsilon(1e-9));
    }
    CHECK_THROWS_AS(chebyshev_eval(-1, 0.0), std::invalid_argument);
}

TEST_CASE("dynamic_incidence: uniform rows for identical node embeddings") {
    Rng rng(9);
    const std::int64_t n = 5, edges = 3, c = 2, t = 4;
    DynamicHypergraphLayer layer(n, edges, c, t, 8, rng);
    // node-constant input -> identical per-node features -> identical embeddings
    std::vector<double> vals(static_cast<std::size_t>(c * n * t));
    for (std::int64_t ch = 0; ch < c; ++ch)
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t s = 0; s < t; ++s)
                vals[static_cast<std::size_t>((ch * n + i) * t + s)] =
                    0.3 * static_cast<double>(ch) + 0.1 * static_cast<double>(s);
    auto [h_e, h_n] = layer.incidence(Tensor::from(vals, {c, n, t}));
    for (std::int64_t e = 0; e < edges; ++e)
        for (std::int64_t i = 0; i < n; ++i)
            CHECK(h_e(e, i) == doctest::Approx(1.0 / n).epsilon(1e-9));
}

TEST_CASE("dynamic_incidence: rows sum to one; zero distance maximizes the entry") {
    Rng rng(10);
    const std::int64_t n = 5, edges = 3, c = 2, t = 4;
    DynamicHypergraphLayer layer(n, edges, c, t, 8, rng);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor x = random_tensor(rng, {c, n, t});
        auto [h_e, h_n] = layer.incidence(x);
        for (std::int64_t e = 0; e < edges; ++e) {
            double s = 0.0;
            for (std::int64_t i = 0; i < n; ++i) s += h_e(e, i);
            CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
        }
        for (std::int64_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::int64_t e = 0; e < edges; ++e) s += h_n(i, e);
            CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
        }
    }

    // move node 2's embedding onto hyperedge 1's embedding
    Tensor node_emb = random_tensor(rng, {n, 8});
    Tensor edge_emb = random_tensor(rng, {edges, 8});
    for (std::int64_t k = 0; k < 8; ++k)
        node_emb.data()[static_cast<std::size_t>(2 * 8 + k)] = edge_emb(1, k);
    auto [h_e, h_n] = DynamicHypergraphLayer::incidence_from_embeddings(node_emb, edge_emb);
    for (std::int64_t i = 0; i < n; ++i)
        if (i != 2) CHECK(h_e(1, 2) > h_e(1, i));
}

TEST_CASE("dynamic_hyperconv: alpha limits and constant preservation") {
    Rng rng(11);
    const std::int64_t n = 4, edges = 2, c = 3, t = 5;
    DynamicHypergraphLayer layer(n, edges, c, t, 6, rng);
    Tensor x = random_tensor(rng, {c, n, t});

    auto [h_e, h_n] = layer.incidence(x);

    // alpha -> 0: output approaches x
    Tensor near_zero = hyper_mix(h_e, h_n, sigmoid(Tensor::from({-20.0}, {1})), x);
    double xmax = 0.0;
    for (double v : x.data()) xmax = std::max(xmax, std::abs(v));
    for (std::int64_t i = 0; i < x.numel(); ++i)
        CHECK(std::abs(near_zero.data()[static_cast<std::size_t>(i)] -
                       x.data()[static_cast<std::size_t>(i)]) <= 1e-7 * xmax);

    // alpha -> 1: output approaches the dense product H_n (H_e x)
    Tensor near_one = hyper_mix(h_e, h_n, sigmoid(Tensor::from({20.0}, {1})), x);
    for (std::int64_t ch = 0; ch < c; ++ch)
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t s = 0; s < t; ++s) {
                double acc = 0.0;
                for (std::int64_t e = 0; e < edges; ++e) {
                    double edge_feat = 0.0;
                    for (std::int64_t k = 0; k < n; ++k) edge_feat += h_e(e, k) * x(ch, k, s);
                    acc += h_n(i, e) * edge_feat;
                }
                CHECK(std::abs(near_one(ch, i, s) - acc) <= 1e-7);
            }

    // node-constant signals are fixed points for any alpha
    std::vector<double> cv(static_cast<std::size_t>(c * n * t));
    for (std::int64_t ch = 0; ch < c; ++ch)
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t s = 0; s < t; ++s)
                cv[static_cast<std::size_t>((ch * n + i) * t + s)] =
                    0.7 * static_cast<double>(ch) - 0.2 * static_cast<double>(s);
    Tensor xc = Tensor::from(cv, {c, n, t});
    auto [he2, hn2] = layer.incidence(xc);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor alpha = Tensor::from({rng.uniform(0.05, 0.95)}, {1});
        Tensor out = hyper_mix(he2, hn2, alpha, xc);
        for (std::int64_t i = 0; i < out.numel(); ++i)
            CHECK(std::abs(out.data()[static_cast<std::size_t>(i)] -
                           xc.data()[static_cast<std::size_t>(i)]) <= 1e-10);
    }
}

TEST_CASE("dynamic_hyperconv: differentiable wrt input and all parameters") {
    Rng rng(12);
    const std::int64_t n = 3, edges = 2, c = 2, t = 3;
    DynamicHypergraphLayer layer(n, edges, c, t, 4, rng);
    Tensor x = random_tensor(rng, {c, n, t});
    Tensor w = random_tensor(rng, {c, n, t});
    auto f = [&] { return sum(mul(layer.forward(x), w)); };
    std::vector<Tensor> leaves = layer.parameters();
    leaves.push_back(x);
    CHECK(finite_diff_check_all(f, leaves) < 1e-4);
}

TEST_CASE("transfer_matrix: identity at alpha->0, stochastic rows, asymmetry") {
    Rng rng(13);
    const std::int64_t n = 5, edges = 3, c = 2, t = 4;
    DynamicHypergraphLayer layer(n, edges, c, t, 8, rng);
    Tensor x = random_tensor(rng, {c, n, t});

    // drive the self-loop logit far negative: alpha ~ 4e-18
    layer.parameters()[5].data()[0] = -40.0;
    Tensor id = layer.transfer_matrix(x);
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < n; ++j)
            CHECK(std::abs(id(i, j) - (i == j ? 1.0 : 0.0)) <= 1e-12);

    layer.parameters()[5].data()[0] = 0.4;
    Tensor m = layer.transfer_matrix(x);
    double asym = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::int64_t j = 0; j < n; ++j) {
            s += m(i, j);
            asym = std::max(asym, std::abs(m(i, j) - m(j, i)));
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK(asym > 0.0);
}
