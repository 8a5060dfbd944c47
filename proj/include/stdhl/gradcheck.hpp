#pragma once

#include <functional>
#include <vector>

#include "stdhl/tensor.hpp"

namespace stdhl {

// Central finite-difference check of reverse-mode gradients.
//
// f rebuilds the forward pass from the *current* values of the leaf tensors
// and returns a scalar; it must be deterministic. Returns the max over
// coordinates of |analytic - central| / (|central| + 1e-12). Coordinates
// where skip[i] != 0 are left out (used near loss kinks).
double finite_diff_check(const std::function<Tensor()>& f, Tensor leaf, double eps = 1e-5,
                         const std::vector<char>* skip = nullptr);

// Same check across several leaves (e.g. all parameters of a layer).
double finite_diff_check_all(const std::function<Tensor()>& f, std::vector<Tensor> leaves,
                             double eps = 1e-5);

}  // namespace stdhl
