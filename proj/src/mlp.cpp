#include "dhns/mlp.hpp"

#include <cmath>

namespace dhns {

namespace {

using Array = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Array sigmoid(const Array& x) { return 1.0 / (1.0 + (-x).exp()); }

Mat activate(Activation act, const Mat& pre) {
  if (act == Activation::identity) return pre;
  const Array x = pre.array();
  return (x * sigmoid(x)).matrix();
}

Mat activation_derivative(Activation act, const Mat& pre) {
  if (act == Activation::identity) return Mat::Ones(pre.rows(), pre.cols());
  const Array x = pre.array();
  const Array s = sigmoid(x);
  return (s * (1.0 + x * (1.0 - s))).matrix();
}

void check_input(const MlpParams& p, Eigen::Index cols) {
  check_dim("mlp input width", p.input_dim(), cols);
}

struct Forward {
  Mat pre;       // B x H
  Mat hidden;    // B x H
  Mat normed;    // B x O, zero mean / unit variance rows
  Vec inv_std;   // B
  Mat output;    // B x O
};

Forward forward_from_pre(const MlpParams& p, Mat pre) {
  Forward f;
  f.pre = std::move(pre);
  f.hidden = activate(p.activation, f.pre);
  Mat z = f.hidden * p.w2.transpose();
  z.rowwise() += p.b2.transpose();

  const Eigen::Index n = z.cols();
  f.inv_std.resize(z.rows());
  f.normed.resize(z.rows(), n);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double mean = z.row(i).mean();
    const auto centered = z.row(i).array() - mean;
    const double var = centered.square().sum() / static_cast<double>(n);
    f.inv_std[i] = 1.0 / std::sqrt(var + kLayerNormEps);
    f.normed.row(i) = centered * f.inv_std[i];
  }
  f.output = f.normed.array().rowwise() * p.gain.transpose().array();
  f.output.rowwise() += p.shift.transpose();
  return f;
}

Forward forward(const MlpParams& p, const Mat& inputs) {
  check_input(p, inputs.cols());
  Mat pre = inputs * p.w1.transpose();
  pre.rowwise() += p.b1.transpose();
  return forward_from_pre(p, std::move(pre));
}

}  // namespace

MlpParams MlpParams::zeros(Eigen::Index input, Eigen::Index hidden, Eigen::Index output,
                           Activation act) {
  MlpParams p;
  p.w1 = Mat::Zero(hidden, input);
  p.b1 = Vec::Zero(hidden);
  p.w2 = Mat::Zero(output, hidden);
  p.b2 = Vec::Zero(output);
  p.gain = Vec::Ones(output);
  p.shift = Vec::Zero(output);
  p.activation = act;
  return p;
}

MlpParams MlpParams::init(Eigen::Index input, Eigen::Index hidden, Eigen::Index output, Rng& rng,
                          Activation act) {
  MlpParams p = zeros(input, hidden, output, act);
  const double a1 = 1.0 / std::sqrt(static_cast<double>(input));
  const double a2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (Eigen::Index i = 0; i < p.w1.size(); ++i) p.w1.data()[i] = rng.uniform(-a1, a1);
  for (Eigen::Index i = 0; i < p.b1.size(); ++i) p.b1[i] = rng.uniform(-a1, a1);
  for (Eigen::Index i = 0; i < p.w2.size(); ++i) p.w2.data()[i] = rng.uniform(-a2, a2);
  for (Eigen::Index i = 0; i < p.b2.size(); ++i) p.b2[i] = rng.uniform(-a2, a2);
  return p;
}

MlpParams MlpParams::zeros_like() const {
  MlpParams g = zeros(input_dim(), hidden_dim(), output_dim(), activation);
  g.gain.setZero();
  return g;
}

void MlpParams::validate() const {
  check_dim("mlp b1", w1.rows(), b1.size());
  check_dim("mlp w2 columns", w1.rows(), w2.cols());
  check_dim("mlp b2", w2.rows(), b2.size());
  check_dim("mlp gain", w2.rows(), gain.size());
  check_dim("mlp shift", w2.rows(), shift.size());
}

std::vector<TensorRef> MlpParams::tensors(const std::string& prefix) {
  return {tensor_ref(prefix + "w1", w1),     tensor_ref(prefix + "b1", b1),
          tensor_ref(prefix + "w2", w2),     tensor_ref(prefix + "b2", b2),
          tensor_ref(prefix + "gain", gain), tensor_ref(prefix + "shift", shift)};
}

Vec mlp_forward(const MlpParams& p, const Vec& input) {
  check_input(p, input.size());
  const Mat row = input.transpose();
  return forward(p, row).output.row(0).transpose();
}

Mat mlp_forward(const MlpParams& p, const Mat& inputs) { return forward(p, inputs).output; }

Mat mlp_forward_from_preactivation(const MlpParams& p, const Mat& preactivation) {
  check_dim("mlp preactivation width", p.hidden_dim(), preactivation.cols());
  return forward_from_pre(p, preactivation).output;
}

Mat mlp_backward(const MlpParams& p, const Mat& inputs, const Mat& out_grads,
                 MlpParams& param_grads) {
  check_dim("mlp out_grad width", p.output_dim(), out_grads.cols());
  check_dim("mlp out_grad rows", inputs.rows(), out_grads.rows());
  const Forward f = forward(p, inputs);

  param_grads.gain += (out_grads.array() * f.normed.array()).colwise().sum().matrix().transpose();
  param_grads.shift += out_grads.colwise().sum().transpose();

  const Eigen::Index n = out_grads.cols();
  Mat dnormed = out_grads.array().rowwise() * p.gain.transpose().array();
  Mat dz(out_grads.rows(), n);
  for (Eigen::Index i = 0; i < dz.rows(); ++i) {
    const double mean_d = dnormed.row(i).mean();
    const double mean_dx = dnormed.row(i).dot(f.normed.row(i)) / static_cast<double>(n);
    dz.row(i) = f.inv_std[i] *
                (dnormed.row(i).array() - mean_d - f.normed.row(i).array() * mean_dx).matrix();
  }

  param_grads.w2 += dz.transpose() * f.hidden;
  param_grads.b2 += dz.colwise().sum().transpose();
  const Mat dpre = ((dz * p.w2).array() * activation_derivative(p.activation, f.pre).array()).matrix();
  param_grads.w1 += dpre.transpose() * inputs;
  param_grads.b1 += dpre.colwise().sum().transpose();
  return dpre * p.w1;
}

MlpGradients mlp_backward(const MlpParams& p, const Vec& input, const Vec& out_grad) {
  check_input(p, input.size());
  check_dim("mlp out_grad width", p.output_dim(), out_grad.size());
  MlpGradients g{p.zeros_like(), Vec()};
  const Mat in_row = input.transpose();
  const Mat grad_row = out_grad.transpose();
  g.input = mlp_backward(p, in_row, grad_row, g.params).row(0).transpose();
  return g;
}

Mat layer_norm_rows(const Mat& z, double eps) {
  Mat out(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double mean = z.row(i).mean();
    const auto centered = z.row(i).array() - mean;
    const double var = centered.square().sum() / static_cast<double>(z.cols());
    out.row(i) = centered / std::sqrt(var + eps);
  }
  return out;
}

}  // namespace dhns
