#include "stdhl/power_curve.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace stdhl {

PowerCurve::PowerCurve(std::vector<double> speeds, std::vector<double> powers)
    : speeds_(std::move(speeds)), powers_(std::move(powers)) {
    if (speeds_.size() < 2 || speeds_.size() != powers_.size())
        throw std::invalid_argument("PowerCurve: need >= 2 (speed, power) breakpoints");
    for (std::size_t i = 1; i < speeds_.size(); ++i)
        if (!(speeds_[i] > speeds_[i - 1]))
            throw std::invalid_argument("PowerCurve: breakpoint speeds must be strictly "
                                        "increasing (violated at index " + std::to_string(i) + ")");
    double mx = powers_[0];
    for (double p : powers_) {
        if (p < 0.0 || p > 1.0)
            throw std::invalid_argument("PowerCurve: per-unit power outside [0,1]");
        mx = std::max(mx, p);
    }
    rated_index_ = 0;
    while (powers_[rated_index_] < mx) ++rated_index_;
}

PowerCurve PowerCurve::default_ge15() {
    return PowerCurve(
        {3.5, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0, 13.0, 14.0, 25.0},
        {0.0, 0.043, 0.131, 0.250, 0.410, 0.590, 0.759, 0.886, 0.958, 0.988, 0.997, 1.0, 1.0});
}

PowerCurve PowerCurve::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("PowerCurve: cannot open " + path);
    nlohmann::json j;
    in >> j;
    if (!j.contains("points") || !j["points"].is_array())
        throw std::invalid_argument("PowerCurve: file " + path + " lacks a \"points\" array");
    std::vector<double> s, p;
    for (const auto& pt : j["points"]) {
        s.push_back(pt.at(0).get<double>());
        p.push_back(pt.at(1).get<double>());
    }
    return PowerCurve(std::move(s), std::move(p));
}

void PowerCurve::save(const std::string& path) const {
    nlohmann::json pts = nlohmann::json::array();
    for (std::size_t i = 0; i < speeds_.size(); ++i)
        pts.push_back({speeds_[i], powers_[i]});
    nlohmann::json j;
    j["points"] = pts;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("PowerCurve: cannot write " + path);
    out << j.dump(2) << '\n';
}

double PowerCurve::power(double speed) const {
    if (speed < speeds_.front() || speed > speeds_.back()) return 0.0;
    auto hi = std::size_t{1};
    while (hi < speeds_.size() && speeds_[hi] < speed) ++hi;
    if (hi == speeds_.size()) return powers_.back();
    const double s0 = speeds_[hi - 1], s1 = speeds_[hi];
    const double p0 = powers_[hi - 1], p1 = powers_[hi];
    return p0 + (p1 - p0) * (speed - s0) / (s1 - s0);
}

double PowerCurve::speed_for_power(double p) const {
    if (p <= powers_.front()) return speeds_.front();
    if (p >= powers_[rated_index_]) return speeds_[rated_index_];
    std::size_t hi = 1;
    while (hi <= rated_index_ && powers_[hi] < p) ++hi;
    const double p0 = powers_[hi - 1], p1 = powers_[hi];
    const double s0 = speeds_[hi - 1], s1 = speeds_[hi];
    if (p1 == p0) return s0;
    return s0 + (s1 - s0) * (p - p0) / (p1 - p0);
}

}  // namespace stdhl
