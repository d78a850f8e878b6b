#include "dhns/adam.hpp"

#include <cmath>

namespace dhns {

AdamState make_adam_state(const AdamOptions& options, const std::vector<TensorRef>& params) {
  AdamState s;
  s.options = options;
  for (const auto& p : params) {
    s.first_moment.emplace_back(p.values.size(), 0.0);
    s.second_moment.emplace_back(p.values.size(), 0.0);
  }
  return s;
}

void adam_step(AdamState& state, const std::vector<TensorRef>& params,
               const std::vector<TensorRef>& grads) {
  check_dim("adam parameter count", static_cast<Eigen::Index>(state.first_moment.size()),
            static_cast<Eigen::Index>(params.size()));
  check_dim("adam gradient count", static_cast<Eigen::Index>(params.size()),
            static_cast<Eigen::Index>(grads.size()));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto n = static_cast<Eigen::Index>(params[k].values.size());
    check_dim(("adam moments of " + params[k].name).c_str(),
              static_cast<Eigen::Index>(state.first_moment[k].size()), n);
    check_dim(("adam gradient of " + params[k].name).c_str(), n,
              static_cast<Eigen::Index>(grads[k].values.size()));
  }

  const AdamOptions& o = state.options;
  ++state.step;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    const auto p = params[k].values;
    const auto g = grads[k].values;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
  }
}

}  // namespace dhns
