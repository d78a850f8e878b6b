#include "dhns/diffusion.hpp"

#include <algorithm>
#include <cmath>

namespace dhns {

NoiseSchedule make_schedule_from_alpha(std::vector<double> alpha) {
  if (alpha.size() < 2) throw Error("noise schedule needs at least 2 steps");
  NoiseSchedule s;
  s.steps = static_cast<int>(alpha.size());
  double prod = 1.0;
  for (double a : alpha) {
    if (!(a > 0.0 && a < 1.0)) throw Error("noise schedule variance must lie in (0, 1)");
    s.beta.push_back(1.0 - a);
    prod *= 1.0 - a;
    s.beta_bar.push_back(prod);
  }
  s.alpha = std::move(alpha);
  return s;
}

NoiseSchedule make_schedule(int total_steps) {
  if (total_steps < 2)
    throw Error("diffusion steps must be at least 2, got " + std::to_string(total_steps));
  constexpr double lo = 1e-4;
  constexpr double hi = 0.02;
  std::vector<double> alpha(static_cast<std::size_t>(total_steps));
  for (int t = 1; t <= total_steps; ++t)
    alpha[static_cast<std::size_t>(t - 1)] =
        lo + (hi - lo) * static_cast<double>(t - 1) / static_cast<double>(total_steps - 1);
  return make_schedule_from_alpha(std::move(alpha));
}

Vec positional_embedding(int t, int dim) {
  if (dim <= 0 || dim % 2 != 0)
    throw Error("positional embedding width must be even and positive, got " + std::to_string(dim));
  if (t < 0) throw Error("positional embedding step must be non-negative");
  Vec pe(dim);
  for (int i = 0; 2 * i < dim; ++i) {
    const double angle = static_cast<double>(t) /
                         std::pow(1000.0, static_cast<double>(2 * i) / static_cast<double>(dim));
    pe[2 * i] = std::sin(angle);
    pe[2 * i + 1] = std::cos(angle);
  }
  return pe;
}

namespace {

void check_step(const NoiseSchedule& s, int t, int lowest) {
  if (t < lowest || t > s.steps)
    throw Error("time step " + std::to_string(t) + " outside [" + std::to_string(lowest) + ", " +
                std::to_string(s.steps) + "]");
}

}  // namespace

Vec forward_noise(const NoiseSchedule& s, const Vec& x0, int t, const Vec& eps) {
  check_step(s, t, 1);
  check_dim("forward_noise eps", x0.size(), eps.size());
  const double bb = s.beta_bar_at(t);
  return std::sqrt(bb) * x0 + std::sqrt(1.0 - bb) * eps;
}

double reverse_noise_coefficient(const NoiseSchedule& s, int t, const ReverseOptions& opt) {
  const double numerator = opt.paper_literal_reverse ? s.beta_at(t) : 1.0 - s.beta_at(t);
  return numerator / std::sqrt(1.0 - s.beta_bar_at(t));
}

double reverse_sigma(const NoiseSchedule& s, int t, const ReverseOptions& opt) {
  return opt.paper_literal_sigma ? s.alpha_at(t) : std::sqrt(s.alpha_at(t));
}

Vec reverse_step(const NoiseSchedule& s, const Vec& x_t, int t, const Vec& eps_hat, const Vec& z,
                 const ReverseOptions& opt) {
  check_step(s, t, 2);
  check_dim("reverse_step eps_hat", x_t.size(), eps_hat.size());
  check_dim("reverse_step z", x_t.size(), z.size());
  return (x_t - reverse_noise_coefficient(s, t, opt) * eps_hat) / std::sqrt(s.beta_at(t)) +
         reverse_sigma(s, t, opt) * z;
}

Vec reverse_final(const NoiseSchedule& s, const Vec& x_1, const Vec& eps_hat,
                  const ReverseOptions& opt) {
  check_dim("reverse_final eps_hat", x_1.size(), eps_hat.size());
  return (x_1 - reverse_noise_coefficient(s, 1, opt) * eps_hat) / std::sqrt(s.beta_at(1));
}

Denoiser Denoiser::zeros(int dim) {
  Denoiser d;
  d.dim = dim;
  for (auto& n : d.nets) n = MlpParams::zeros(3 * dim, 2 * dim, dim);
  return d;
}

Denoiser Denoiser::init(int dim, Rng& rng) {
  if (dim <= 0 || dim % 2 != 0) throw Error("denoiser width must be even and positive");
  Denoiser d;
  d.dim = dim;
  for (auto& n : d.nets) n = MlpParams::init(3 * dim, 2 * dim, dim, rng);
  return d;
}

Denoiser Denoiser::zeros_like() const {
  Denoiser g;
  g.dim = dim;
  for (std::size_t i = 0; i < nets.size(); ++i) g.nets[i] = nets[i].zeros_like();
  return g;
}

std::vector<TensorRef> Denoiser::tensors() {
  std::vector<TensorRef> all;
  for (Modality m : kModalities) {
    auto part = net(m).tensors("denoiser." + to_string(m) + ".");
    all.insert(all.end(), part.begin(), part.end());
  }
  return all;
}

Vec denoiser_input(const Vec& x_t, int t, const Vec& condition) {
  check_dim("denoiser condition", x_t.size(), condition.size());
  const auto d = x_t.size();
  Vec in(3 * d);
  in << x_t, positional_embedding(t, static_cast<int>(d)), condition;
  return in;
}

Vec predict_noise(const Denoiser& p, Modality m, const Vec& x_t, int t, const Vec& condition) {
  check_dim("predict_noise x_t", p.dim, x_t.size());
  return mlp_forward(p.net(m), denoiser_input(x_t, t, condition));
}

namespace {

// Stacks the denoiser inputs and targets of one modality across the batch.
void stack_modality(const NoiseSchedule& s, std::span<const DiffusionSample> batch, Modality m,
                    int dim, Mat& inputs, Mat& targets) {
  const auto k = static_cast<std::size_t>(m);
  inputs.resize(static_cast<Eigen::Index>(batch.size()), 3 * dim);
  targets.resize(static_cast<Eigen::Index>(batch.size()), dim);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& item = batch[i];
    check_dim("diffusion sample noise", dim, item.noise.size());
    check_dim("diffusion sample clean", dim, item.clean[k].size());
    const Vec noised = forward_noise(s, item.clean[k], item.t, item.noise);
    inputs.row(static_cast<Eigen::Index>(i)) =
        denoiser_input(noised, item.t, item.condition[k]).transpose();
    targets.row(static_cast<Eigen::Index>(i)) = item.noise.transpose();
  }
}

double loss_impl(const Denoiser& p, const NoiseSchedule& s, std::span<const DiffusionSample> batch,
                 Denoiser* grads, std::array<double, 3>* terms) {
  if (batch.empty()) throw Error("diffusion loss needs a non-empty batch");
  const double n = static_cast<double>(batch.size());
  double total = 0.0;
  Mat inputs, targets;
  for (Modality m : kModalities) {
    stack_modality(s, batch, m, p.dim, inputs, targets);
    const Mat residual = mlp_forward(p.net(m), inputs) - targets;
    const double term = residual.squaredNorm() / n;
    if (terms) (*terms)[static_cast<std::size_t>(m)] = term;
    total += term;
    if (grads) {
      const Mat out_grad = (2.0 / n) * residual;
      mlp_backward(p.net(m), inputs, out_grad, grads->net(m));
    }
  }
  return total;
}

}  // namespace

std::array<double, 3> diffusion_loss_terms(const Denoiser& p, const NoiseSchedule& s,
                                           std::span<const DiffusionSample> batch) {
  std::array<double, 3> terms{};
  loss_impl(p, s, batch, nullptr, &terms);
  return terms;
}

double diffusion_loss(const Denoiser& p, const NoiseSchedule& s,
                      std::span<const DiffusionSample> batch) {
  return loss_impl(p, s, batch, nullptr, nullptr);
}

double diffusion_loss_and_grad(const Denoiser& p, const NoiseSchedule& s,
                               std::span<const DiffusionSample> batch, Denoiser& grads,
                               std::array<double, 3>* terms) {
  return loss_impl(p, s, batch, &grads, terms);
}

std::vector<Mat> run_reverse_chains(const Denoiser& p, Modality m, const NoiseSchedule& s,
                                    const Mat& conditions, std::span<const int> steps,
                                    std::span<Rng> rngs, const ReverseOptions& opt) {
  if (steps.empty()) throw Error("reverse chain needs at least one step to harvest");
  for (int t : steps) check_step(s, t, 1);
  const Eigen::Index d = p.dim;
  const Eigen::Index batch = conditions.rows();
  check_dim("reverse chain condition width", d, conditions.cols());
  check_dim("reverse chain rng count", batch, static_cast<Eigen::Index>(rngs.size()));

  const MlpParams& net = p.net(m);
  const auto w_state = net.w1.leftCols(d);
  const auto w_time = net.w1.middleCols(d, d);
  const auto w_cond = net.w1.rightCols(d);

  // The condition's share of the hidden pre-activation is fixed along the chain.
  Mat fixed = conditions * w_cond.transpose();
  fixed.rowwise() += net.b1.transpose();

  Mat x(batch, d);
  for (Eigen::Index i = 0; i < batch; ++i) x.row(i) = rngs[static_cast<std::size_t>(i)].normal_vec(d).transpose();

  std::vector<Mat> harvested(steps.size());
  const auto harvest = [&](int t) {
    for (std::size_t k = 0; k < steps.size(); ++k)
      if (steps[k] == t) harvested[k] = x;
  };
  harvest(s.steps);

  const int lowest = *std::min_element(steps.begin(), steps.end());
  Mat z(batch, d);
  for (int t = s.steps; t > lowest; --t) {
    const Vec time_part = w_time * positional_embedding(t, static_cast<int>(d));
    Mat pre = x * w_state.transpose() + fixed;
    pre.rowwise() += time_part.transpose();
    const Mat eps_hat = mlp_forward_from_preactivation(net, pre);
    for (Eigen::Index i = 0; i < batch; ++i) z.row(i) = rngs[static_cast<std::size_t>(i)].normal_vec(d).transpose();
    const double coef = reverse_noise_coefficient(s, t, opt);
    const double scale = 1.0 / std::sqrt(s.beta_at(t));
    const double sigma = reverse_sigma(s, t, opt);
    x = (x - coef * eps_hat) * scale + sigma * z;
    harvest(t - 1);
  }
  return harvested;
}

}  // namespace dhns
