#pragma once

#include <string>
#include <vector>

namespace stdhl {

// Piecewise-linear turbine power curve over (speed, per-unit power)
// breakpoints. Power is 0 below the first breakpoint (cut-in) and above the
// last (cut-out); the rated plateau is encoded by the breakpoints themselves.
class PowerCurve {
public:
    PowerCurve(std::vector<double> speeds, std::vector<double> powers);

    // GE 1.5 MW class curve; identical to the breakpoint file shipped with
    // the repo (data/ge_1500kw_curve.json), which takes precedence when set.
    static PowerCurve default_ge15();
    static PowerCurve load(const std::string& path);
    void save(const std::string& path) const;

    double power(double speed) const;
    // Inverse on the rising ramp; p<=0 gives cut-in speed, p>=1 rated speed.
    double speed_for_power(double p) const;

    const std::vector<double>& speeds() const { return speeds_; }
    const std::vector<double>& powers() const { return powers_; }

private:
    std::vector<double> speeds_, powers_;
    std::size_t rated_index_;  // first breakpoint reaching the maximum power
};

}  // namespace stdhl
