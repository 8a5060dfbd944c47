#include "stdhl/gradcheck.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace stdhl {

namespace {

double check_one(const std::function<Tensor()>& f, Tensor& leaf,
                 const std::vector<double>& analytic, double eps,
                 const std::vector<char>* skip) {
    double worst = 0.0;
    auto vals = leaf.data();
    for (std::size_t i = 0; i < vals.size(); ++i) {
        if (skip && (*skip)[i]) continue;
        const double saved = vals[i];
        vals[i] = saved + eps;
        const double up = f().item();
        vals[i] = saved - eps;
        const double dn = f().item();
        vals[i] = saved;
        const double numeric = (up - dn) / (2.0 * eps);
        const double rel = std::abs(analytic[i] - numeric) / (std::abs(numeric) + 1e-12);
        worst = std::max(worst, rel);
    }
    return worst;
}

}  // namespace

double finite_diff_check(const std::function<Tensor()>& f, Tensor leaf, double eps,
                         const std::vector<char>* skip) {
    if (eps <= 0.0) throw std::invalid_argument("finite_diff_check: eps must be positive");
    leaf.set_requires_grad(true);
    leaf.zero_grad();
    {
        Tape tape;
        Tape::Scope scope(tape);
        Tensor loss = f();
        tape.backward(loss);
    }
    std::vector<double> analytic(leaf.grad().begin(), leaf.grad().end());
    return check_one(f, leaf, analytic, eps, skip);
}

double finite_diff_check_all(const std::function<Tensor()>& f, std::vector<Tensor> leaves,
                             double eps) {
    if (eps <= 0.0) throw std::invalid_argument("finite_diff_check: eps must be positive");
    for (auto& l : leaves) {
        l.set_requires_grad(true);
        l.zero_grad();
    }
    {
        Tape tape;
        Tape::Scope scope(tape);
        Tensor loss = f();
        tape.backward(loss);
    }
    std::vector<std::vector<double>> analytic;
    analytic.reserve(leaves.size());
    for (auto& l : leaves) analytic.emplace_back(l.grad().begin(), l.grad().end());

    double worst = 0.0;
    for (std::size_t li = 0; li < leaves.size(); ++li)
        worst = std::max(worst, check_one(f, leaves[li], analytic[li], eps, nullptr));
    return worst;
}

}  // namespace stdhl
