#include "dhns/types.hpp"

#include <cmath>

namespace dhns {

DimensionError::DimensionError(const std::string& what, Eigen::Index expected, Eigen::Index actual)
    : Error(what + ": expected dimension " + std::to_string(expected) + ", got " +
            std::to_string(actual)) {}

void check_dim(const char* what, Eigen::Index expected, Eigen::Index actual) {
  if (expected != actual) throw DimensionError(what, expected, actual);
}

bool all_finite(const Vec& v) { return v.allFinite(); }
bool all_finite(const Mat& m) { return m.allFinite(); }

}  // namespace dhns
