#include "dhns/gradcheck.hpp"

#include <algorithm>

namespace dhns {

Vec numeric_gradient(const std::function<double()>& f, std::span<double> params, double h) {
  Vec g(static_cast<Eigen::Index>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    const double up = f();
    params[i] = saved - h;
    const double down = f();
    params[i] = saved;
    g[static_cast<Eigen::Index>(i)] = (up - down) / (2.0 * h);
  }
  return g;
}

double relative_error(const Vec& a, const Vec& b, double floor) {
  check_dim("relative_error", a.size(), b.size());
  const double scale = std::max({a.norm(), b.norm(), floor});
  return (a - b).norm() / scale;
}

}  // namespace dhns
