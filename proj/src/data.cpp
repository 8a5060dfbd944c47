#include "stdhl/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "stdhl/rng.hpp"

namespace stdhl {

// ---------------------------------------------------------------------------
// timestamps ("YYYYMMDD HH:MM", hourly)
// ---------------------------------------------------------------------------

namespace {

std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const int yoe = y - era * 400;
    const int doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const int doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return static_cast<std::int64_t>(era) * 146097 + doe - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const int doe = static_cast<int>(z - era * 146097);
    const int yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const int mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y = static_cast<int>(yoe + era * 400) + (m <= 2 ? 1 : 0);
}

bool all_digits(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (c < '0' || c > '9') return false;
    return true;
}

}  // namespace

std::int64_t parse_timestamp(const std::string& s) {
    // "YYYYMMDD HH:MM"
    if (s.size() != 14 || s[8] != ' ' || s[11] != ':' || !all_digits(s.substr(0, 8)) ||
        !all_digits(s.substr(9, 2)) || !all_digits(s.substr(12, 2)))
        throw DataError("unparseable timestamp '" + s + "' (expected YYYYMMDD HH:MM)");
    const int y = std::stoi(s.substr(0, 4));
    const int m = std::stoi(s.substr(4, 2));
    const int d = std::stoi(s.substr(6, 2));
    const int hh = std::stoi(s.substr(9, 2));
    const int mm = std::stoi(s.substr(12, 2));
    if (m < 1 || m > 12 || d < 1 || d > 31 || hh > 23 || mm > 59)
        throw DataError("unparseable timestamp '" + s + "' (field out of range)");
    return (days_from_civil(y, m, d) * 24 + hh) * 60 + mm;
}

std::string format_timestamp(std::int64_t minutes) {
    const std::int64_t day = minutes >= 0 ? minutes / 1440 : (minutes - 1439) / 1440;
    const int rem = static_cast<int>(minutes - day * 1440);
    int y, m, d;
    civil_from_days(day, y, m, d);
    char buf[48];
    std::snprintf(buf, sizeof buf, "%04d%02d%02d %02d:%02d", y, m, d, rem / 60, rem % 60);
    return buf;
}

// ---------------------------------------------------------------------------
// CSV load/save
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kHeader = "ZONEID,TIMESTAMP,TARGETVAR,U10,V10,U100,V100";

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

double parse_field(const std::string& s, const char* name) {
    if (s.empty()) throw DataError(std::string("empty ") + name);
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size() || !std::isfinite(v))
        throw DataError(std::string("bad ") + name + " value '" + s + "'");
    return v;
}

}  // namespace

DataLoadResult load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open data file " + path);
    DataLoadResult result;

    std::string line;
    if (!std::getline(in, line)) return result;  // empty file -> empty list
    {
        auto cells = split_csv_line(line);
        std::ostringstream got;
        for (std::size_t i = 0; i < cells.size(); ++i) got << (i ? "," : "") << cells[i];
        if (got.str() != kHeader)
            throw DataError("unexpected header '" + got.str() + "', expected '" + kHeader + "'");
    }

    struct Row {
        std::int64_t time;
        double p, u10, v10, u100, v100;
    };
    std::map<std::string, std::vector<Row>> zones;
    std::vector<std::string> zone_order;
    std::int64_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto cells = split_csv_line(line);
        try {
            if (cells.size() != 7) throw DataError("expected 7 columns");
            Row r;
            r.time = parse_timestamp(cells[1]);
            const double p = parse_field(cells[2], "TARGETVAR");
            if (p < -0.01 || p > 1.01)
                throw DataError("power " + cells[2] + " outside tolerance [-0.01, 1.01]");
            r.p = std::clamp(p, 0.0, 1.0);
            r.u10 = parse_field(cells[3], "U10");
            r.v10 = parse_field(cells[4], "V10");
            r.u100 = parse_field(cells[5], "U100");
            r.v100 = parse_field(cells[6], "V100");
            if (zones.find(cells[0]) == zones.end()) zone_order.push_back(cells[0]);
            zones[cells[0]].push_back(r);
        } catch (const std::exception& e) {
            result.row_errors.push_back("line " + std::to_string(line_no) + ": " + e.what());
        }
    }

    // numeric zone ids sort numerically, anything else lexically
    std::sort(zone_order.begin(), zone_order.end(), [](const std::string& a, const std::string& b) {
        if (all_digits(a) && all_digits(b)) return std::stoll(a) < std::stoll(b);
        return a < b;
    });

    for (const auto& id : zone_order) {
        auto& rows = zones[id];
        std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.time < b.time; });
        FarmSeries s;
        s.farm_id = id;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (i > 0 && rows[i].time == rows[i - 1].time) {
                result.row_errors.push_back("zone " + id + ": duplicate timestamp " +
                                            format_timestamp(rows[i].time));
                continue;
            }
            if (!s.times.empty() && rows[i].time - s.times.back() != kMinutesPerHour)
                ++result.gap_count;
            s.times.push_back(rows[i].time);
            s.power.push_back(rows[i].p);
            s.u10.push_back(rows[i].u10);
            s.v10.push_back(rows[i].v10);
            s.u100.push_back(rows[i].u100);
            s.v100.push_back(rows[i].v100);
        }
        result.series.push_back(std::move(s));
    }
    return result;
}

void save_csv(const std::string& path, const std::vector<FarmSeries>& series) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write data file " + path);
    out << kHeader << '\n';
    char buf[160];
    for (const auto& s : series) {
        for (std::int64_t i = 0; i < s.size(); ++i) {
            const auto u = static_cast<std::size_t>(i);
            std::snprintf(buf, sizeof buf, "%s,%s,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                          s.farm_id.c_str(), format_timestamp(s.times[u]).c_str(), s.power[u],
                          s.u10[u], s.v10[u], s.u100[u], s.v100[u]);
            out << buf;
        }
    }
}

WindFeatures wind_features(double u, double v) {
    const double speed = std::sqrt(u * u + v * v);
    if (speed == 0.0) return {0.0, 0.0, 1.0};
    return {speed, v / speed, u / speed};
}

// ---------------------------------------------------------------------------
// windowing
// ---------------------------------------------------------------------------

namespace {

void fill_wind_channels(const FarmSeries& s, std::int64_t idx, double* speed10, double* sin10,
                        double* cos10, double* speed100, double* sin100, double* cos100) {
    const auto u = static_cast<std::size_t>(idx);
    const auto f10 = wind_features(s.u10[u], s.v10[u]);
    const auto f100 = wind_features(s.u100[u], s.v100[u]);
    *speed10 = f10.speed;
    *sin10 = f10.sin_dir;
    *cos10 = f10.cos_dir;
    *speed100 = f100.speed;
    *sin100 = f100.sin_dir;
    *cos100 = f100.cos_dir;
}

}  // namespace

WindowResult make_windows(const std::vector<FarmSeries>& series, const WindowOptions& opt) {
    if (series.empty()) return {};
    if (opt.look_back < 1 || opt.horizon < 1 || opt.extension < 0 || opt.stride < 1)
        throw std::invalid_argument("make_windows: need look_back>=1, horizon>=1, extension>=0, "
                                    "stride>=1");
    const auto n_farms = static_cast<std::int64_t>(series.size());
    for (const auto& s : series)
        if (s.times != series[0].times)
            throw DataError("make_windows: farm " + s.farm_id +
                            " timestamps are not aligned with farm " + series[0].farm_id);

    const auto len = series[0].size();
    const auto t_back = opt.look_back, t_fwd = opt.horizon, ext = opt.extension;
    const auto channels_m = opt.power_only ? std::int64_t{1} : 1 + kWindFeatureCount;
    const auto t_nwp = t_fwd + 2 * ext;

    // run[i]: the window [i-k, i] is hourly-contiguous for all k < run[i]
    std::vector<std::int64_t> run(static_cast<std::size_t>(len), 1);
    for (std::int64_t i = 1; i < len; ++i)
        if (series[0].times[static_cast<std::size_t>(i)] -
                series[0].times[static_cast<std::size_t>(i - 1)] ==
            kMinutesPerHour)
            run[static_cast<std::size_t>(i)] = run[static_cast<std::size_t>(i - 1)] + 1;

    WindowResult result;
    const std::int64_t lo = std::max(t_back, ext) - 1;  // 0-based index of the first usable t0
    for (std::int64_t i0 = lo; i0 + t_fwd + ext < len; i0 += opt.stride) {
        const std::int64_t last = i0 + t_fwd + ext;
        const std::int64_t span = last - (i0 - std::max(t_back, ext) + 1) + 1;
        if (run[static_cast<std::size_t>(last)] < span) {
            ++result.dropped;
            continue;
        }
        WindowSample w;
        w.origin_index = i0;
        w.origin_time = series[0].times[static_cast<std::size_t>(i0)];

        Tensor measured = Tensor::zeros({channels_m, n_farms, t_back});
        auto md = measured.data();
        for (std::int64_t n = 0; n < n_farms; ++n) {
            const auto& s = series[static_cast<std::size_t>(n)];
            for (std::int64_t t = 0; t < t_back; ++t) {
                const std::int64_t idx = i0 - t_back + 1 + t;
                md[static_cast<std::size_t>((0 * n_farms + n) * t_back + t)] =
                    s.power[static_cast<std::size_t>(idx)];
                if (!opt.power_only) {
                    double c[6];
                    fill_wind_channels(s, idx, &c[0], &c[1], &c[2], &c[3], &c[4], &c[5]);
                    for (std::int64_t f = 0; f < kWindFeatureCount; ++f)
                        md[static_cast<std::size_t>(((1 + f) * n_farms + n) * t_back + t)] = c[f];
                }
            }
        }
        w.measured = measured;

        Tensor nwp = Tensor::zeros({kWindFeatureCount, n_farms, t_nwp});
        auto nd = nwp.data();
        for (std::int64_t n = 0; n < n_farms; ++n) {
            const auto& s = series[static_cast<std::size_t>(n)];
            for (std::int64_t t = 0; t < t_nwp; ++t) {
                const std::int64_t idx = i0 - ext + 1 + t;
                double c[6];
                fill_wind_channels(s, idx, &c[0], &c[1], &c[2], &c[3], &c[4], &c[5]);
                for (std::int64_t f = 0; f < kWindFeatureCount; ++f)
                    nd[static_cast<std::size_t>((f * n_farms + n) * t_nwp + t)] = c[f];
            }
        }
        w.nwp = nwp;

        Tensor target = Tensor::zeros({n_farms, t_fwd});
        auto td = target.data();
        for (std::int64_t n = 0; n < n_farms; ++n)
            for (std::int64_t t = 0; t < t_fwd; ++t)
                td[static_cast<std::size_t>(n * t_fwd + t)] =
                    series[static_cast<std::size_t>(n)].power[static_cast<std::size_t>(i0 + 1 + t)];
        w.target = target;
        result.samples.push_back(std::move(w));
    }
    return result;
}

SplitSamples chronological_split(const std::vector<WindowSample>& samples, double f_train,
                                 double f_val, double f_test) {
    if (f_train < 0 || f_val < 0 || f_test < 0 || std::abs(f_train + f_val + f_test - 1.0) > 1e-9)
        throw std::invalid_argument("chronological_split: fractions must be >= 0 and sum to 1");
    const auto n = static_cast<std::int64_t>(samples.size());
    const auto n_train = static_cast<std::int64_t>(std::floor(static_cast<double>(n) * f_train));
    const auto n_val = static_cast<std::int64_t>(std::floor(static_cast<double>(n) * f_val));
    SplitSamples out;
    out.train.assign(samples.begin(), samples.begin() + n_train);
    out.val.assign(samples.begin() + n_train, samples.begin() + n_train + n_val);
    out.test.assign(samples.begin() + n_train + n_val, samples.end());
    return out;
}

// ---------------------------------------------------------------------------
// FeatureScaler
// ---------------------------------------------------------------------------

FeatureScaler FeatureScaler::identity(std::int64_t n_farms) {
    FeatureScaler s;
    s.identity_ = true;
    s.min10_.assign(static_cast<std::size_t>(n_farms), 0.0);
    s.max10_.assign(static_cast<std::size_t>(n_farms), 1.0);
    s.min100_ = s.min10_;
    s.max100_ = s.max10_;
    return s;
}

FeatureScaler FeatureScaler::fit(const std::vector<WindowSample>& train, bool /*power_only*/) {
    if (train.empty()) throw std::invalid_argument("FeatureScaler::fit: no training samples");
    const auto n_farms = train[0].nwp.dim(1);
    FeatureScaler s;
    s.identity_ = false;
    s.min10_.assign(static_cast<std::size_t>(n_farms), 1e300);
    s.max10_.assign(static_cast<std::size_t>(n_farms), -1e300);
    s.min100_ = s.min10_;
    s.max100_ = s.max10_;
    for (const auto& w : train) {
        const auto t_nwp = w.nwp.dim(2);
        for (std::int64_t n = 0; n < n_farms; ++n) {
            for (std::int64_t t = 0; t < t_nwp; ++t) {
                const double s10 = w.nwp(kSpeed10Channel, n, t);
                const double s100 = w.nwp(kSpeed100Channel, n, t);
                const auto u = static_cast<std::size_t>(n);
                s.min10_[u] = std::min(s.min10_[u], s10);
                s.max10_[u] = std::max(s.max10_[u], s10);
                s.min100_[u] = std::min(s.min100_[u], s100);
                s.max100_[u] = std::max(s.max100_[u], s100);
            }
        }
    }
    return s;
}

namespace {

double minmax_norm(double v, double lo, double hi) {
    if (hi <= lo) return 0.0;
    return (v - lo) / (hi - lo);
}

}  // namespace

void FeatureScaler::apply(WindowSample& w, bool power_only) const {
    if (identity_) return;
    const auto n_farms = w.nwp.dim(1);
    if (n_farms != static_cast<std::int64_t>(min10_.size()))
        throw std::invalid_argument("FeatureScaler: fitted for " + std::to_string(min10_.size()) +
                                    " farms, sample has " + std::to_string(n_farms));
    const auto t_nwp = w.nwp.dim(2);
    auto nd = w.nwp.data();
    for (std::int64_t n = 0; n < n_farms; ++n) {
        const auto u = static_cast<std::size_t>(n);
        for (std::int64_t t = 0; t < t_nwp; ++t) {
            auto& a = nd[static_cast<std::size_t>((kSpeed10Channel * n_farms + n) * t_nwp + t)];
            a = minmax_norm(a, min10_[u], max10_[u]);
            auto& b = nd[static_cast<std::size_t>((kSpeed100Channel * n_farms + n) * t_nwp + t)];
            b = minmax_norm(b, min100_[u], max100_[u]);
        }
    }
    if (!power_only) {
        const auto t_back = w.measured.dim(2);
        auto md = w.measured.data();
        for (std::int64_t n = 0; n < n_farms; ++n) {
            const auto u = static_cast<std::size_t>(n);
            for (std::int64_t t = 0; t < t_back; ++t) {
                auto& a = md[static_cast<std::size_t>(
                    ((1 + kSpeed10Channel) * n_farms + n) * t_back + t)];
                a = minmax_norm(a, min10_[u], max10_[u]);
                auto& b = md[static_cast<std::size_t>(
                    ((1 + kSpeed100Channel) * n_farms + n) * t_back + t)];
                b = minmax_norm(b, min100_[u], max100_[u]);
            }
        }
    }
}

void FeatureScaler::apply_all(std::vector<WindowSample>& samples, bool power_only) const {
    for (auto& s : samples) apply(s, power_only);
}

nlohmann::json FeatureScaler::to_json() const {
    return {{"identity", identity_}, {"min10", min10_},   {"max10", max10_},
            {"min100", min100_},     {"max100", max100_}};
}

FeatureScaler FeatureScaler::from_json(const nlohmann::json& j) {
    FeatureScaler s;
    s.identity_ = j.at("identity").get<bool>();
    s.min10_ = j.at("min10").get<std::vector<double>>();
    s.max10_ = j.at("max10").get<std::vector<double>>();
    s.min100_ = j.at("min100").get<std::vector<double>>();
    s.max100_ = j.at("max100").get<std::vector<double>>();
    return s;
}

// ---------------------------------------------------------------------------
// synthetic generator
// ---------------------------------------------------------------------------

std::vector<FarmSeries> synth_dataset(const SynthOptions& opt, const PowerCurve& curve) {
    if (opt.n_farms < 1 || opt.length < 4)
        throw std::invalid_argument("synth_dataset: need n_farms >= 1 and length >= 4");
    std::vector<std::int64_t> lags = opt.lags;
    if (lags.empty()) {
        lags.resize(static_cast<std::size_t>(opt.n_farms));
        for (std::int64_t i = 0; i < opt.n_farms; ++i) lags[static_cast<std::size_t>(i)] = i;
    }
    if (static_cast<std::int64_t>(lags.size()) != opt.n_farms)
        throw std::invalid_argument("synth_dataset: lag count must match farm count");
    for (auto l : lags)
        if (l < 0 || l >= opt.length)
            throw std::invalid_argument("synth_dataset: lags must lie in [0, length)");
    if (opt.nwp_lag < 0 || opt.nwp_lag >= opt.length)
        throw std::invalid_argument("synth_dataset: nwp_lag must lie in [0, length)");

    Rng rng(opt.seed);
    const auto len = static_cast<std::size_t>(opt.length);

    // regional latent: slow random walk plus a faster mean-reverting part,
    // lightly smoothed and squashed to (0,1)
    std::vector<double> slow(len), fast(len);
    double z = 0.0, f = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
        z += 0.2 * rng.normal();
        f = 0.78 * f + 0.5 * rng.normal();
        slow[t] = z;
        fast[t] = f;
    }
    auto standardize = [len](std::vector<double>& v) {
        double mu = 0.0;
        for (double x : v) mu += x;
        mu /= static_cast<double>(len);
        double var = 0.0;
        for (double x : v) var += (x - mu) * (x - mu);
        const double sd = std::sqrt(var / static_cast<double>(len) + 1e-12);
        for (auto& x : v) x = (x - mu) / sd;
    };
    standardize(slow);
    standardize(fast);
    std::vector<double> smooth(len);
    for (std::int64_t t = 0; t < opt.length; ++t) {
        double acc = 0.0;
        std::int64_t cnt = 0;
        for (std::int64_t k = -1; k <= 1; ++k) {
            const std::int64_t idx = std::clamp<std::int64_t>(t + k, 0, opt.length - 1);
            acc += 0.8 * slow[static_cast<std::size_t>(idx)] +
                   0.6 * fast[static_cast<std::size_t>(idx)];
            ++cnt;
        }
        smooth[static_cast<std::size_t>(t)] = acc / static_cast<double>(cnt);
    }
    std::vector<double> base(len);
    for (std::size_t t = 0; t < len; ++t)
        base[t] = 1.0 / (1.0 + std::exp(-1.2 * smooth[t]));

    // shared wind direction walk
    std::vector<double> theta(len);
    double th = rng.uniform(0.0, 6.283185307179586);
    for (auto& v : theta) {
        th += 0.05 * rng.normal();
        v = th;
    }

    const std::int64_t start = parse_timestamp("20120101 01:00");
    std::vector<FarmSeries> out;
    out.reserve(static_cast<std::size_t>(opt.n_farms));
    for (std::int64_t i = 0; i < opt.n_farms; ++i) {
        const std::int64_t lag = lags[static_cast<std::size_t>(i)];
        FarmSeries s;
        s.farm_id = std::to_string(i + 1);
        s.times.resize(len);
        s.power.resize(len);
        s.u10.resize(len);
        s.v10.resize(len);
        s.u100.resize(len);
        s.v100.resize(len);
        for (std::int64_t t = 0; t < opt.length; ++t) {
            const auto u = static_cast<std::size_t>(t);
            s.times[u] = start + t * kMinutesPerHour;
            const double clean = base[static_cast<std::size_t>(std::max<std::int64_t>(0, t - lag))];
            s.power[u] = std::clamp(clean + opt.noise * rng.normal(), 0.0, 1.0);
            // pseudo-NWP: invert the curve on the clean signal, delay, bias
            const double src = base[static_cast<std::size_t>(
                std::max<std::int64_t>(0, t - lag - opt.nwp_lag))];
            const double sp100 = std::max(0.0, curve.speed_for_power(src) + opt.nwp_bias);
            const double sp10 = 0.8 * sp100;
            const double c = std::cos(theta[u]), sn = std::sin(theta[u]);
            s.u100[u] = sp100 * c;
            s.v100[u] = sp100 * sn;
            s.u10[u] = sp10 * c;
            s.v10[u] = sp10 * sn;
        }
        out.push_back(std::move(s));
    }
    return out;
}

Tensor history_matrix(const std::vector<FarmSeries>& series, std::int64_t end_index) {
    if (series.empty()) throw std::invalid_argument("history_matrix: no series");
    const auto n = static_cast<std::int64_t>(series.size());
    const auto len = std::min<std::int64_t>(end_index, series[0].size());
    if (len < 2) throw std::invalid_argument("history_matrix: need at least 2 steps");
    Tensor h = Tensor::zeros({n, len});
    auto hd = h.data();
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t t = 0; t < len; ++t)
            hd[static_cast<std::size_t>(i * len + t)] =
                series[static_cast<std::size_t>(i)].power[static_cast<std::size_t>(t)];
    return h;
}

std::vector<FarmSeries> select_farms(const std::vector<FarmSeries>& series,
                                     const std::vector<std::string>& ids) {
    std::vector<FarmSeries> out;
    for (const auto& id : ids) {
        auto it = std::find_if(series.begin(), series.end(),
                               [&](const FarmSeries& s) { return s.farm_id == id; });
        if (it == series.end()) throw DataError("unknown farm id '" + id + "'");
        out.push_back(*it);
    }
    return out;
}

}  // namespace stdhl
