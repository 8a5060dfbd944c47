#include "stdhl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "stdhl/rng.hpp"

namespace stdhl {

namespace {

void check_same_size(std::span<const double> a, std::span<const double> b, const char* op) {
    if (a.size() != b.size())
        throw std::invalid_argument(std::string(op) + ": size mismatch " +
                                    std::to_string(a.size()) + " vs " + std::to_string(b.size()));
}

}  // namespace

double mae(std::span<const double> y, std::span<const double> yhat) {
    check_same_size(y, yhat, "mae");
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += std::abs(y[i] - yhat[i]);
    return acc / static_cast<double>(y.size());
}

double rmse(std::span<const double> y, std::span<const double> yhat) {
    check_same_size(y, yhat, "rmse");
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y[i] - yhat[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(y.size()));
}

double mae(const Tensor& y, const Tensor& yhat) {
    if (y.shape() != yhat.shape()) throw_shape_mismatch("mae", y.shape(), yhat.shape());
    return mae(y.data(), yhat.data());
}

double rmse(const Tensor& y, const Tensor& yhat) {
    if (y.shape() != yhat.shape()) throw_shape_mismatch("rmse", y.shape(), yhat.shape());
    return rmse(y.data(), yhat.data());
}

double accuracy_rate(std::span<const double> y4, std::span<const double> yhat4) {
    return (1.0 - rmse(y4, yhat4)) * 100.0;
}

double pass_rate(std::span<const double> y4, std::span<const double> yhat4) {
    check_same_size(y4, yhat4, "pass_rate");
    std::int64_t pass = 0;
    for (std::size_t i = 0; i < y4.size(); ++i)
        if (std::abs(y4[i] - yhat4[i]) < 0.25) ++pass;  // a tie at 0.25 counts as a fail
    return 100.0 * static_cast<double>(pass) / static_cast<double>(y4.size());
}

double pinball(const std::vector<Tensor>& targets, const std::vector<ForecastQuantiles>& qs) {
    if (targets.size() != qs.size() || targets.empty())
        throw std::invalid_argument("pinball: need matching non-empty target/forecast lists");
    // Joint accumulation in element order; at the single level 0.5 this makes
    // the score exactly half the MAE, bit for bit.
    double acc = 0.0;
    std::int64_t count = 0;
    for (std::size_t s = 0; s < targets.size(); ++s) {
        const auto& q = qs[s];
        const auto& y = targets[s];
        const auto n = q.n_nodes(), t = q.horizon(), nl = q.n_levels();
        if (y.ndim() != 2 || y.dim(0) != n || y.dim(1) != t)
            throw_shape_mismatch("pinball", y.shape(), q.values.shape());
        for (std::int64_t l = 0; l < nl; ++l) {
            const double u = q.levels[static_cast<std::size_t>(l)];
            for (std::int64_t i = 0; i < n; ++i) {
                for (std::int64_t st = 0; st < t; ++st) {
                    const double d = y(i, st) - q.value(l, i, st);
                    acc += d >= 0.0 ? u * d : (u - 1.0) * d;
                    ++count;
                }
            }
        }
    }
    return acc / static_cast<double>(count);
}

namespace {

// piecewise-linear inverse CDF with flat tails beyond the outer levels
double inverse_cdf(const std::vector<double>& levels, const double* cell_values,
                   std::int64_t stride, double u) {
    const auto q = levels.size();
    if (u <= levels.front()) return cell_values[0];
    if (u >= levels.back()) return cell_values[static_cast<std::int64_t>(q - 1) * stride];
    std::size_t hi = 1;
    while (hi < q && levels[hi] < u) ++hi;
    const double u0 = levels[hi - 1], u1 = levels[hi];
    const double v0 = cell_values[static_cast<std::int64_t>(hi - 1) * stride];
    const double v1 = cell_values[static_cast<std::int64_t>(hi) * stride];
    return v0 + (v1 - v0) * (u - u0) / (u1 - u0);
}

}  // namespace

double crps(const std::vector<Tensor>& targets, const std::vector<ForecastQuantiles>& qs,
            int n_samples, std::uint64_t seed) {
    if (targets.size() != qs.size() || targets.empty())
        throw std::invalid_argument("crps: need matching non-empty target/forecast lists");
    if (n_samples < 2) throw std::invalid_argument("crps: need n_samples >= 2");

    // Shared sorted uniforms; the inverse CDF is monotone, so per-cell samples
    // come out already sorted.
    Rng rng(seed);
    std::vector<double> us(static_cast<std::size_t>(n_samples));
    for (auto& u : us) u = rng.uniform();
    std::sort(us.begin(), us.end());
    const auto m = static_cast<double>(n_samples);

    double acc = 0.0;
    std::int64_t cells = 0;
    std::vector<double> samples(static_cast<std::size_t>(n_samples));
    for (std::size_t si = 0; si < targets.size(); ++si) {
        const auto& q = qs[si];
        const auto& y = targets[si];
        const auto n = q.n_nodes(), t = q.horizon(), nl = q.n_levels();
        if (y.ndim() != 2 || y.dim(0) != n || y.dim(1) != t)
            throw_shape_mismatch("crps", y.shape(), q.values.shape());
        const double* vals = q.values.data().data();
        const auto stride = n * t;
        for (std::int64_t i = 0; i < n; ++i) {
            for (std::int64_t s = 0; s < t; ++s) {
                const double* cell = vals + i * t + s;
                for (std::int64_t l = 1; l < nl; ++l)
                    if (cell[(l - 1) * stride] > cell[l * stride])
                        throw std::invalid_argument(
                            "crps: quantile values are not monotone; rearrange first");
                for (int k = 0; k < n_samples; ++k)
                    samples[static_cast<std::size_t>(k)] =
                        inverse_cdf(q.levels, cell, stride, us[static_cast<std::size_t>(k)]);
                const double yv = y(i, s);
                double term1 = 0.0;
                for (double v : samples) term1 += std::abs(v - yv);
                term1 /= m;
                // E|S-S'| over ordered pairs, via the sorted-sample identity
                double gini = 0.0;
                for (int k = 0; k < n_samples; ++k)
                    gini += (2.0 * k + 1.0 - m) * samples[static_cast<std::size_t>(k)];
                gini = 2.0 * gini / (m * (m - 1.0));
                acc += term1 - 0.5 * gini;
                ++cells;
            }
        }
    }
    return acc / static_cast<double>(cells);
}

double relative_improvement_percent(double better, double reference) {
    if (reference == 0.0)
        throw std::invalid_argument("relative_improvement_percent: reference is zero");
    return (reference - better) / reference * 100.0;
}

nlohmann::json EvaluationReport::to_json() const {
    return {{"mae", mae},
            {"rmse", rmse},
            {"ar", ar},
            {"pp", pp},
            {"crps", crps},
            {"ps", ps},
            {"per_horizon_mae", per_horizon_mae},
            {"n_samples", n_samples},
            {"crps_seed", crps_seed}};
}

std::string EvaluationReport::csv_header() { return "MAE,RMSE,AR,PP,CRPS,PS"; }

std::string EvaluationReport::csv_row() const {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.4f,%.4f,%.6f,%.6f", mae, rmse, ar, pp, crps, ps);
    return buf;
}

std::string EvaluationReport::per_horizon_csv() const {
    std::ostringstream os;
    os << "horizon,mae\n";
    for (std::size_t h = 0; h < per_horizon_mae.size(); ++h) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%zu,%.6f\n", h + 1, per_horizon_mae[h]);
        os << buf;
    }
    return os.str();
}

EvaluationReport build_report(const std::vector<Tensor>& targets,
                              const std::vector<ForecastQuantiles>& forecasts,
                              int crps_samples, std::uint64_t crps_seed) {
    if (targets.size() != forecasts.size() || targets.empty())
        throw std::invalid_argument("build_report: need matching non-empty lists");
    const auto horizon = forecasts[0].horizon();
    const auto h4 = std::min<std::int64_t>(4, horizon) - 1;  // fourth-hour slice

    std::vector<double> ys, yhats, y4, yhat4;
    std::vector<std::vector<double>> yh(static_cast<std::size_t>(horizon)),
        yhh(static_cast<std::size_t>(horizon));
    for (std::size_t s = 0; s < targets.size(); ++s) {
        Tensor med = forecasts[s].median();
        const auto& y = targets[s];
        if (y.shape() != med.shape()) throw_shape_mismatch("build_report", y.shape(), med.shape());
        const auto n = y.dim(0);
        for (std::int64_t i = 0; i < n; ++i) {
            for (std::int64_t t = 0; t < horizon; ++t) {
                ys.push_back(y(i, t));
                yhats.push_back(med(i, t));
                yh[static_cast<std::size_t>(t)].push_back(y(i, t));
                yhh[static_cast<std::size_t>(t)].push_back(med(i, t));
                if (t == h4) {
                    y4.push_back(y(i, t));
                    yhat4.push_back(med(i, t));
                }
            }
        }
    }

    EvaluationReport r;
    r.mae = mae(std::span<const double>(ys), yhats);
    r.rmse = rmse(std::span<const double>(ys), yhats);
    r.ar = accuracy_rate(std::span<const double>(y4), yhat4);
    r.pp = pass_rate(std::span<const double>(y4), yhat4);
    r.ps = pinball(targets, forecasts);
    r.crps = crps(targets, forecasts, crps_samples, crps_seed);
    for (std::int64_t t = 0; t < horizon; ++t)
        r.per_horizon_mae.push_back(mae(std::span<const double>(yh[static_cast<std::size_t>(t)]),
                                        yhh[static_cast<std::size_t>(t)]));
    r.n_samples = static_cast<std::int64_t>(targets.size());
    r.crps_seed = crps_seed;
    return r;
}

}  // namespace stdhl
