#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stdhl/power_curve.hpp"
#include "stdhl/tensor.hpp"

namespace stdhl {

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Timestamps are minutes since the civil epoch; the on-disk format is
// "YYYYMMDD HH:MM" at hourly resolution.
std::int64_t parse_timestamp(const std::string& s);
std::string format_timestamp(std::int64_t minutes);
constexpr std::int64_t kMinutesPerHour = 60;

struct FarmSeries {
    std::string farm_id;
    std::vector<std::int64_t> times;  // strictly increasing
    std::vector<double> power;        // per-unit, in [0,1]
    std::vector<double> u10, v10, u100, v100;

    std::int64_t size() const { return static_cast<std::int64_t>(times.size()); }
};

struct DataLoadResult {
    std::vector<FarmSeries> series;
    std::vector<std::string> row_errors;  // one entry per rejected row
    std::int64_t gap_count = 0;           // non-hourly jumps across all farms
};

// Schema: ZONEID,TIMESTAMP,TARGETVAR,U10,V10,U100,V100
DataLoadResult load_csv(const std::string& path);
void save_csv(const std::string& path, const std::vector<FarmSeries>& series);

struct WindFeatures {
    double speed, sin_dir, cos_dir;
};
// speed = sqrt(u^2+v^2); (0,0) maps to speed 0 with sin 0, cos 1
WindFeatures wind_features(double u, double v);

// NWP-derived channel layout used across the project.
constexpr std::int64_t kWindFeatureCount = 6;  // speed/sin/cos at 10 m and 100 m
constexpr std::int64_t kSpeed10Channel = 0;
constexpr std::int64_t kSpeed100Channel = 3;

struct WindowOptions {
    std::int64_t look_back = 12;   // T'
    std::int64_t horizon = 4;      // T
    std::int64_t extension = 4;    // τ
    std::int64_t stride = 1;
    bool power_only = false;       // measured window carries only the power channel
};

struct WindowSample {
    std::int64_t origin_time = 0;   // timestamp of t0
    std::int64_t origin_index = 0;  // index of t0 in the series
    Tensor measured;                // (1+F')×N×T'
    Tensor nwp;                     // F×N×(T+2τ)
    Tensor target;                  // N×T
};

struct WindowResult {
    std::vector<WindowSample> samples;  // ordered by origin
    std::int64_t dropped = 0;           // origins lost to gaps
};

WindowResult make_windows(const std::vector<FarmSeries>& series, const WindowOptions& opt);

struct SplitSamples {
    std::vector<WindowSample> train, val, test;
};
SplitSamples chronological_split(const std::vector<WindowSample>& samples, double f_train,
                                 double f_val, double f_test);

// Per-farm min-max statistics for the wind-speed channels, fitted on the
// training partition only and applied unchanged elsewhere.
class FeatureScaler {
public:
    static FeatureScaler identity(std::int64_t n_farms);
    static FeatureScaler fit(const std::vector<WindowSample>& train, bool power_only);
    void apply(WindowSample& sample, bool power_only) const;
    void apply_all(std::vector<WindowSample>& samples, bool power_only) const;
    bool is_identity() const { return identity_; }
    std::int64_t n_farms() const { return static_cast<std::int64_t>(min10_.size()); }

    nlohmann::json to_json() const;
    static FeatureScaler from_json(const nlohmann::json& j);

private:
    bool identity_ = true;
    std::vector<double> min10_, max10_, min100_, max100_;
};

struct SynthOptions {
    std::int64_t n_farms = 10;
    std::int64_t length = 8760;
    std::uint64_t seed = 1;
    std::vector<std::int64_t> lags;  // per-farm propagation lag; default: farm index
    double nwp_bias = 0.3;           // m/s offset on pseudo-NWP speeds
    std::int64_t nwp_lag = 2;        // timing error of the pseudo-NWP
    double noise = 0.03;             // measurement noise on power
};

// Latent regional signal with per-farm propagation lags; pseudo-NWP speeds
// are the power curve inverse of the (lagged, biased) clean signal, so the
// NWP stream carries the trend with a controllable timing error.
std::vector<FarmSeries> synth_dataset(const SynthOptions& opt, const PowerCurve& curve);

// Per-farm power over [0, end_index) as an N×T_hist tensor (history for the
// static spatial variants).
Tensor history_matrix(const std::vector<FarmSeries>& series, std::int64_t end_index);

std::vector<FarmSeries> select_farms(const std::vector<FarmSeries>& series,
                                     const std::vector<std::string>& ids);

}  // namespace stdhl
