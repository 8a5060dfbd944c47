#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stdhl/data.hpp"
#include "stdhl/metrics.hpp"
#include "stdhl/model.hpp"

namespace stdhl {

struct TrainConfig {
    double learning_rate = 1e-3;
    std::int64_t batch_size = 64;
    std::int64_t max_epochs = 100;
    std::int64_t patience = 10;  // epochs without validation improvement
    double clip_norm = 5.0;      // global gradient norm clip
    std::uint64_t seed = 1;

    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochStats {
    std::int64_t epoch;
    double train_loss;
    double val_pinball;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    std::int64_t best_epoch = -1;
    double best_val = 0.0;

    std::string to_csv() const;  // epoch,train_loss,val_pinball
};

// Adam with bias correction on the quantile loss; seeded mini-batch shuffle,
// early stopping on validation pinball, best-epoch parameters restored.
// Batch gradients are summed over fixed 8-sample chunks in chunk order, so
// results do not depend on the number of worker threads.
TrainHistory train(Forecaster& model, const std::vector<WindowSample>& train_samples,
                   const std::vector<WindowSample>& val_samples, const TrainConfig& cfg);

// Mean quantile loss over samples (forward only).
double mean_pinball(const Forecaster& model, const std::vector<WindowSample>& samples);

EvaluationReport evaluate(const Forecaster& model, const std::vector<WindowSample>& samples,
                          int crps_samples = 100, std::uint64_t crps_seed = 2024);

}  // namespace stdhl
