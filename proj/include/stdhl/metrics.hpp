#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "stdhl/encdec.hpp"
#include "stdhl/tensor.hpp"

namespace stdhl {

double mae(std::span<const double> y, std::span<const double> yhat);
double rmse(std::span<const double> y, std::span<const double> yhat);
double mae(const Tensor& y, const Tensor& yhat);
double rmse(const Tensor& y, const Tensor& yhat);

// China grid-code scores on the fourth-hour slice.
double accuracy_rate(std::span<const double> y4, std::span<const double> yhat4);  // (1-RMSE)*100
double pass_rate(std::span<const double> y4, std::span<const double> yhat4);  // |err|<0.25 share

// Mean pinball score over all levels, farms and steps.
double pinball(const std::vector<Tensor>& targets, const std::vector<ForecastQuantiles>& qs);

// Sample-based CRPS: E|S-y| - 0.5 E|S-S'| with S drawn by inverse-CDF through
// the piecewise-linear quantile function (flat tails). Fixed seed, shared
// uniform draws across cells. Quantiles must be monotone per cell.
double crps(const std::vector<Tensor>& targets, const std::vector<ForecastQuantiles>& qs,
            int n_samples = 100, std::uint64_t seed = 2024);

double relative_improvement_percent(double better, double reference);

struct EvaluationReport {
    double mae = 0, rmse = 0, ar = 0, pp = 0, crps = 0, ps = 0;
    std::vector<double> per_horizon_mae;  // index h-1 = h-hour-ahead MAE
    std::int64_t n_samples = 0;
    std::uint64_t crps_seed = 0;

    nlohmann::json to_json() const;
    static std::string csv_header();  // MAE,RMSE,AR,PP,CRPS,PS
    std::string csv_row() const;
    std::string per_horizon_csv() const;
};

// Aggregate report over matched (target, quantile forecast) pairs. The
// deterministic forecast is the median level; AR/PP use the fourth hour
// (the last step when the horizon is shorter).
EvaluationReport build_report(const std::vector<Tensor>& targets,
                              const std::vector<ForecastQuantiles>& forecasts,
                              int crps_samples = 100, std::uint64_t crps_seed = 2024);

}  // namespace stdhl
