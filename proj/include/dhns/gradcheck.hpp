#pragma once

#include <functional>
#include <span>

#include "dhns/types.hpp"

namespace dhns {

// Central finite differences of a scalar function with respect to the entries
// of `params`, which the function must read through. Each entry is restored
// after probing.
Vec numeric_gradient(const std::function<double()>& f, std::span<double> params, double h = 1e-5);

// ||a - b|| / max(||a||, ||b||, floor). The floor keeps an all-zero pair from
// dividing by zero.
double relative_error(const Vec& a, const Vec& b, double floor = 1e-8);

}  // namespace dhns
