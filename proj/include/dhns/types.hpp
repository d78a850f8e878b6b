#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dhns {

// Dense vectors and row-major matrices. Row-major so that a matrix's storage
// is already in checkpoint order and batched items are contiguous rows.
using Vec = Eigen::VectorXd;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VecRef = Eigen::Ref<const Eigen::VectorXd>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  DimensionError(const std::string& what, Eigen::Index expected, Eigen::Index actual);
};

// Mutable view of one parameter tensor, used by the optimizer and checkpointing.
struct TensorRef {
  std::string name;
  std::vector<std::int64_t> shape;
  std::span<double> values;
};

inline TensorRef tensor_ref(std::string name, Vec& v) {
  return {std::move(name), {v.size()}, {v.data(), static_cast<std::size_t>(v.size())}};
}

inline TensorRef tensor_ref(std::string name, Mat& m) {
  return {std::move(name), {m.rows(), m.cols()}, {m.data(), static_cast<std::size_t>(m.size())}};
}

void check_dim(const char* what, Eigen::Index expected, Eigen::Index actual);

bool all_finite(const Vec& v);
bool all_finite(const Mat& m);

}  // namespace dhns
