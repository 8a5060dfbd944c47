#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stdhl/data.hpp"
#include "stdhl/encdec.hpp"
#include "stdhl/hypergraph.hpp"
#include "stdhl/power_curve.hpp"
#include "stdhl/tensor.hpp"

namespace stdhl {

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class SpatialKind { kDynHypergraph, kStaticGraph, kDynGraph, kStaticHypergraph, kNone };
enum class PearsonMode { kClipNegative, kAbsolute };

std::string to_string(SpatialKind k);
SpatialKind spatial_kind_from_string(const std::string& s);

std::vector<double> default_quantile_levels();  // 0.05, 0.10, ..., 0.95

struct ModelConfig {
    std::int64_t n_nodes = 10;
    std::int64_t look_back = 12;         // T'
    std::int64_t horizon = 4;            // T
    std::int64_t nwp_extension = 4;      // τ
    std::int64_t measured_features = 6;  // F' (0 = power-only measured window)
    std::int64_t nwp_features = 6;       // F
    std::int64_t hidden = 32;
    std::int64_t adjust_width = 32;
    std::int64_t n_blocks = 2;
    std::int64_t embed_dim = 16;
    std::int64_t hyperedges = 0;  // 0 -> ceil(N/2)
    std::int64_t linear_hidden = 256;
    std::vector<double> quantile_levels = default_quantile_levels();
    SpatialKind spatial = SpatialKind::kDynHypergraph;
    PearsonMode pearson = PearsonMode::kClipNegative;
    std::uint64_t seed = 1;

    std::int64_t measured_channels() const { return 1 + measured_features; }
    std::int64_t nwp_window() const { return horizon + 2 * nwp_extension; }
    std::int64_t n_levels() const { return static_cast<std::int64_t>(quantile_levels.size()); }
    std::int64_t effective_hyperedges() const {
        return hyperedges > 0 ? hyperedges : (n_nodes + 1) / 2;
    }

    void validate() const;
    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);  // unknown keys rejected
};

// Shared contract of the trainable models and the two reference baselines:
// same input tensors, same output shape, same loss.
class Forecaster {
public:
    virtual ~Forecaster() = default;

    virtual std::string kind() const = 0;
    virtual const ModelConfig& config() const = 0;
    virtual bool trainable() const { return true; }

    // measured (1+F')×N×T', nwp F×N×(T+2τ) -> raw quantile channels Q×N×T
    virtual Tensor forward_raw(const Tensor& measured, const Tensor& nwp) const = 0;

    ForecastQuantiles forecast(const Tensor& measured, const Tensor& nwp) const;
    ForecastQuantiles forecast(const WindowSample& w) const;
    Tensor loss(const WindowSample& w) const;  // quantile loss on the raw outputs

    virtual std::vector<Tensor> parameters() const { return {}; }
    virtual std::vector<Tensor> buffers() const { return {}; }
    virtual std::unique_ptr<Forecaster> clone() const = 0;

    // First spatial layer of the measured encoder applied to one window, as
    // an effective node-to-node operator. Models without a spatial layer throw.
    virtual Tensor transfer_matrix(const WindowSample& w) const;

    void check_input(const Tensor& measured, const Tensor& nwp) const;
    void copy_state_from(const Forecaster& other);
};

// ---- spatial layer variants (swapped into the same encoder skeleton) ----

// Fixed operator from pairwise Pearson correlation of node history.
Tensor pearson_operator(const Tensor& history, PearsonMode mode);

class StaticGraphLayer final : public SpatialLayer {
public:
    explicit StaticGraphLayer(Tensor op);
    Tensor forward(const Tensor& x) const override;
    Tensor transfer_matrix(const Tensor& x) const override;
    std::vector<Tensor> parameters() const override { return {}; }
    std::vector<Tensor> buffers() const override { return {op_}; }
    std::unique_ptr<SpatialLayer> clone() const override;

private:
    Tensor op_;  // N×N, non-trainable
};

class DynamicGraphLayer final : public SpatialLayer {
public:
    DynamicGraphLayer(std::int64_t n_nodes, std::int64_t in_channels, std::int64_t time_len,
                      Rng& rng);
    Tensor operator_matrix(const Tensor& x) const;  // N×N row-stochastic
    Tensor forward(const Tensor& x) const override;
    Tensor transfer_matrix(const Tensor& x) const override;
    std::vector<Tensor> parameters() const override;
    std::unique_ptr<SpatialLayer> clone() const override;

private:
    std::int64_t n_nodes_, in_channels_, time_len_;
    Tensor w1_, b1_, w2_, b2_;
};

// Gaussian-mixture clustering of per-node history vectors into hyperedges.
// Diagonal covariance EM (k-means init, covariance floor 1e-6); membership
// where responsibility > 1/I, argmax repair keeps nodes covered and edges
// non-empty.
HypergraphStructure gmm_incidence(const Tensor& history, std::int64_t n_components,
                                  std::uint64_t seed);

class StaticHypergraphLayer final : public SpatialLayer {
public:
    StaticHypergraphLayer(Tensor gather, Tensor scatter);
    static StaticHypergraphLayer from_structure(const HypergraphStructure& g);
    Tensor forward(const Tensor& x) const override;
    Tensor transfer_matrix(const Tensor& x) const override;
    std::vector<Tensor> parameters() const override { return {}; }
    std::vector<Tensor> buffers() const override { return {gather_, scatter_}; }
    std::unique_ptr<SpatialLayer> clone() const override;

private:
    Tensor gather_;   // I×N
    Tensor scatter_;  // N×I
};

// ---- models ----

// STDHL skeleton; the spatial kind in the config also yields the STSGL,
// STDGL and STSHL variants (only the spatial layer changes).
class StdhlModel final : public Forecaster {
public:
    StdhlModel(ModelConfig cfg, const std::optional<Tensor>& history);

    std::string kind() const override;
    const ModelConfig& config() const override { return cfg_; }
    Tensor forward_raw(const Tensor& measured, const Tensor& nwp) const override;
    std::vector<Tensor> parameters() const override;
    std::vector<Tensor> buffers() const override;
    std::unique_ptr<Forecaster> clone() const override;
    Tensor transfer_matrix(const WindowSample& w) const override;

    SpatioTemporalEncoder& measured_encoder() { return *enc_m_; }
    SpatioTemporalEncoder& nwp_encoder() { return *enc_n_; }
    ForecastDecoder& decoder() { return *dec_; }

private:
    ModelConfig cfg_;
    std::unique_ptr<SpatioTemporalEncoder> enc_m_, enc_n_;
    std::unique_ptr<ForecastDecoder> dec_;
};

// Three dense layers over all flattened covariates.
class LinearModel final : public Forecaster {
public:
    explicit LinearModel(ModelConfig cfg);
    std::string kind() const override { return "linear"; }
    const ModelConfig& config() const override { return cfg_; }
    Tensor forward_raw(const Tensor& measured, const Tensor& nwp) const override;
    std::vector<Tensor> parameters() const override;
    std::unique_ptr<Forecaster> clone() const override;

private:
    ModelConfig cfg_;
    Tensor w1_, b1_, w2_, b2_, w3_, b3_;
};

// y(t0+h) = y(t0) for all h.
Tensor persistence_forecast(const Tensor& y_hist, std::int64_t horizon);

class PersistenceModel final : public Forecaster {
public:
    explicit PersistenceModel(ModelConfig cfg);
    std::string kind() const override { return "persistence"; }
    const ModelConfig& config() const override { return cfg_; }
    bool trainable() const override { return false; }
    Tensor forward_raw(const Tensor& measured, const Tensor& nwp) const override;
    std::unique_ptr<Forecaster> clone() const override;

private:
    ModelConfig cfg_;
};

// Per-unit power from NWP 100 m wind speed through the turbine curve.
// Expects raw (unnormalized) NWP windows.
Tensor mechanism_forecast(const Tensor& nwp_speed100, const PowerCurve& curve);

class MechanismModel final : public Forecaster {
public:
    MechanismModel(ModelConfig cfg, PowerCurve curve);
    std::string kind() const override { return "mechanism"; }
    const ModelConfig& config() const override { return cfg_; }
    bool trainable() const override { return false; }
    Tensor forward_raw(const Tensor& measured, const Tensor& nwp) const override;
    std::unique_ptr<Forecaster> clone() const override;
    const PowerCurve& curve() const { return curve_; }

private:
    ModelConfig cfg_;
    PowerCurve curve_;
};

extern const std::vector<std::string> kTrainableModelNames;  // stdhl stsgl stdgl stshl linear
extern const std::vector<std::string> kBaselineModelNames;   // persistence mechanism

// history: N×T_hist training power, required substance for stsgl/stshl
// (placeholder operators are installed when absent, e.g. before a checkpoint
// load overwrites the buffers). curve: required by "mechanism".
std::unique_ptr<Forecaster> make_forecaster(const std::string& name, ModelConfig cfg,
                                            const std::optional<Tensor>& history = std::nullopt,
                                            const PowerCurve* curve = nullptr);

}  // namespace stdhl
