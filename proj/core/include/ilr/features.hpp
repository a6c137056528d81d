#pragma once

#include <string>

#include <Eigen/Core>

namespace ilr {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class FeatureKind { affine, polynomial };

// Expert-side input map. Gating always sees the standardized input x, the
// experts see X = phi(x). Polynomial maps use per-dimension powers only:
// [x, x.^2, ..., x.^p, 1], so m_f = m_x * p + 1.
class FeatureMap {
 public:
  FeatureMap() = default;

  static FeatureMap affine(int input_dim);
  static FeatureMap polynomial(int input_dim, int degree);

  FeatureKind kind() const { return kind_; }
  int input_dim() const { return input_dim_; }
  int degree() const { return degree_; }
  int output_dim() const { return input_dim_ * degree_ + 1; }

  VectorXd apply(const VectorXd& x) const;
  // Row-wise map of an N x m_x matrix.
  MatrixXd apply_rows(const MatrixXd& x) const;

  std::string name() const;
  bool operator==(const FeatureMap&) const = default;

 private:
  FeatureMap(FeatureKind kind, int input_dim, int degree)
      : kind_(kind), input_dim_(input_dim), degree_(degree) {}

  FeatureKind kind_ = FeatureKind::affine;
  int input_dim_ = 1;
  int degree_ = 1;
};

inline VectorXd apply_feature_map(const FeatureMap& map, const VectorXd& x) {
  return map.apply(x);
}

// Per-dimension z-scoring of inputs and targets, fit once on training data
// and then frozen. Population (divide-by-N) std; zero-variance columns get
// std = 1.
struct Standardizer {
  VectorXd x_mean;
  VectorXd x_std;
  VectorXd y_mean;
  VectorXd y_std;

  static Standardizer fit(const MatrixXd& inputs, const MatrixXd& targets);
  // Identity transform of the given dimensions.
  static Standardizer identity(int input_dim, int output_dim);

  int input_dim() const { return static_cast<int>(x_mean.size()); }
  int output_dim() const { return static_cast<int>(y_mean.size()); }

  MatrixXd transform_inputs(const MatrixXd& x) const;
  MatrixXd inverse_inputs(const MatrixXd& z) const;
  MatrixXd transform_targets(const MatrixXd& y) const;
  MatrixXd inverse_targets(const MatrixXd& z) const;

  VectorXd transform_input(const VectorXd& x) const;
  VectorXd transform_target(const VectorXd& y) const;
  VectorXd inverse_target(const VectorXd& z) const;
  // Maps a covariance in standardized target units back to original units.
  MatrixXd inverse_target_covariance(const MatrixXd& cov) const;

  void validate() const;
  bool operator==(const Standardizer&) const = default;
};

}  // namespace ilr
