#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "dhns/kge.hpp"
#include "dhns/mlp.hpp"
#include "dhns/rng.hpp"
#include "dhns/types.hpp"

namespace dhns {

// Variance constants alpha_t (t = 1..T), beta_t = 1 - alpha_t and the
// cumulative product beta_bar_t = prod_{i <= t} beta_i. beta_bar_0 = 1.
struct NoiseSchedule {
  int steps = 0;
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<double> beta_bar;

  double alpha_at(int t) const { return alpha.at(static_cast<std::size_t>(t - 1)); }
  double beta_at(int t) const { return beta.at(static_cast<std::size_t>(t - 1)); }
  double beta_bar_at(int t) const {
    return t == 0 ? 1.0 : beta_bar.at(static_cast<std::size_t>(t - 1));
  }
};

// alpha_t rises linearly from 1e-4 (t = 1) to 0.02 (t = T).
NoiseSchedule make_schedule(int total_steps);
NoiseSchedule make_schedule_from_alpha(std::vector<double> alpha);

// [PE(t)]_{2i} = sin(t / 1000^{2i/d}), [PE(t)]_{2i+1} = cos(t / 1000^{2i/d}).
Vec positional_embedding(int t, int dim);

// sqrt(beta_bar_t) x0 + sqrt(1 - beta_bar_t) eps
Vec forward_noise(const NoiseSchedule& s, const Vec& x0, int t, const Vec& eps);

// The default reverse update is the standard DDPM posterior step
//
//   x_{t-1} = (x_t - (1 - beta_t) / sqrt(1 - beta_bar_t) * eps_hat) / sqrt(beta_t)
//             + sqrt(alpha_t) * z
//
// paper_literal_reverse swaps the (1 - beta_t) numerator for beta_t;
// paper_literal_sigma scales z by alpha_t instead of sqrt(alpha_t).
struct ReverseOptions {
  bool paper_literal_reverse = false;
  bool paper_literal_sigma = false;
};

double reverse_noise_coefficient(const NoiseSchedule& s, int t, const ReverseOptions& opt);
double reverse_sigma(const NoiseSchedule& s, int t, const ReverseOptions& opt);

Vec reverse_step(const NoiseSchedule& s, const Vec& x_t, int t, const Vec& eps_hat, const Vec& z,
                 const ReverseOptions& opt = {});

// Last step, t = 1, without added noise.
Vec reverse_final(const NoiseSchedule& s, const Vec& x_1, const Vec& eps_hat,
                  const ReverseOptions& opt = {});

// Three independent noise predictors, one per modality. Each maps
// concat(x_t, PE(t), condition) (width 3d) through a 2d-wide hidden layer to d
// outputs.
struct Denoiser {
  int dim = 0;
  std::array<MlpParams, 3> nets;

  static Denoiser init(int dim, Rng& rng);
  static Denoiser zeros(int dim);
  Denoiser zeros_like() const;

  MlpParams& net(Modality m) { return nets[static_cast<std::size_t>(m)]; }
  const MlpParams& net(Modality m) const { return nets[static_cast<std::size_t>(m)]; }

  // Named "denoiser.{struc,vis,text}.{w1,b1,w2,b2,gain,shift}".
  std::vector<TensorRef> tensors();
};

Vec denoiser_input(const Vec& x_t, int t, const Vec& condition);

// eps_hat = LayerNorm(MLP(x_t, PE(t), condition)) with the modality's network.
Vec predict_noise(const Denoiser& p, Modality m, const Vec& x_t, int t, const Vec& condition);

// One training item: a shared timestep and noise draw, with clean embedding
// and condition per modality (indexed by Modality).
struct DiffusionSample {
  int t = 1;
  Vec noise;
  std::array<Vec, 3> clean;
  std::array<Vec, 3> condition;
};

// Per-modality batch means of ||eps_hat - eps||^2.
std::array<double, 3> diffusion_loss_terms(const Denoiser& p, const NoiseSchedule& s,
                                           std::span<const DiffusionSample> batch);

// Sum of the three modality terms, averaged over the batch.
double diffusion_loss(const Denoiser& p, const NoiseSchedule& s,
                      std::span<const DiffusionSample> batch);

// As diffusion_loss; adds the gradient with respect to every denoiser
// parameter into `grads`.
double diffusion_loss_and_grad(const Denoiser& p, const NoiseSchedule& s,
                               std::span<const DiffusionSample> batch, Denoiser& grads,
                               std::array<double, 3>* terms = nullptr);

// Runs one reverse chain per row of `conditions`, starting from
// x_T ~ N(0, I) and stepping down to the smallest requested step. Returns the
// states at each entry of `steps` (same order), one B x d matrix per step.
// Row i draws all of its noise from rngs[i].
std::vector<Mat> run_reverse_chains(const Denoiser& p, Modality m, const NoiseSchedule& s,
                                    const Mat& conditions, std::span<const int> steps,
                                    std::span<Rng> rngs, const ReverseOptions& opt = {});

}  // namespace dhns
