#pragma once

#include <string>
#include <vector>

#include "dhns/rng.hpp"
#include "dhns/types.hpp"

namespace dhns {

enum class Activation { silu, identity };

// Variance epsilon of the output layer normalization.
inline constexpr double kLayerNormEps = 1e-5;

// One-hidden-layer perceptron followed by layer normalization:
//
//   y = LayerNorm(W2 * act(W1 * x + b1) + b2) * gain + shift
//
// act is SiLU (x * sigmoid(x)) unless a test asks for identity.
struct MlpParams {
  Mat w1;  // hidden x input
  Vec b1;
  Mat w2;  // output x hidden
  Vec b2;
  Vec gain;
  Vec shift;
  Activation activation = Activation::silu;

  Eigen::Index input_dim() const { return w1.cols(); }
  Eigen::Index hidden_dim() const { return w1.rows(); }
  Eigen::Index output_dim() const { return w2.rows(); }

  // Weights and biases zero, gain one, shift zero.
  static MlpParams zeros(Eigen::Index input, Eigen::Index hidden, Eigen::Index output,
                         Activation act = Activation::silu);
  // Weights and biases uniform in +-1/sqrt(fan_in); gain one, shift zero.
  static MlpParams init(Eigen::Index input, Eigen::Index hidden, Eigen::Index output, Rng& rng,
                        Activation act = Activation::silu);

  // Same shapes, every entry zero. Used as a gradient accumulator.
  MlpParams zeros_like() const;

  void validate() const;
  std::vector<TensorRef> tensors(const std::string& prefix);
};

Vec mlp_forward(const MlpParams& p, const Vec& input);

// Batched forward; one item per row.
Mat mlp_forward(const MlpParams& p, const Mat& inputs);

// Forward pass starting from hidden pre-activations (W1 * x + b1, one row per
// item). Lets callers precompute the part of W1 * x that stays fixed across
// calls.
Mat mlp_forward_from_preactivation(const MlpParams& p, const Mat& preactivation);

struct MlpGradients {
  MlpParams params;
  Vec input;
};

MlpGradients mlp_backward(const MlpParams& p, const Vec& input, const Vec& out_grad);

// Batched backward. Parameter gradients are summed over rows and added to
// param_grads; returns the per-row input gradients.
Mat mlp_backward(const MlpParams& p, const Mat& inputs, const Mat& out_grads,
                 MlpParams& param_grads);

// Row-wise layer normalization without gain/shift.
Mat layer_norm_rows(const Mat& z, double eps = kLayerNormEps);

}  // namespace dhns
