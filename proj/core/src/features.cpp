#include "ilr/features.hpp"

#include <cmath>

#include "ilr/error.hpp"

namespace ilr {

FeatureMap FeatureMap::affine(int input_dim) {
  if (input_dim < 1) throw ArgumentError("feature map input dim must be positive");
  return FeatureMap(FeatureKind::affine, input_dim, 1);
}

FeatureMap FeatureMap::polynomial(int input_dim, int degree) {
  if (input_dim < 1) throw ArgumentError("feature map input dim must be positive");
  if (degree < 1) throw ArgumentError("polynomial degree must be >= 1");
  return FeatureMap(FeatureKind::polynomial, input_dim, degree);
}

VectorXd FeatureMap::apply(const VectorXd& x) const {
  if (x.size() != input_dim_) {
    throw ArgumentError("feature map expects input of dim " + std::to_string(input_dim_) +
                        ", got " + std::to_string(x.size()));
  }
  VectorXd out(output_dim());
  VectorXd power = x;
  for (int p = 0; p < degree_; ++p) {
    out.segment(p * input_dim_, input_dim_) = power;
    power = power.cwiseProduct(x);
  }
  out(output_dim() - 1) = 1.0;
  return out;
}

MatrixXd FeatureMap::apply_rows(const MatrixXd& x) const {
  if (x.cols() != input_dim_) {
    throw ArgumentError("feature map expects " + std::to_string(input_dim_) +
                        " input columns, got " + std::to_string(x.cols()));
  }
  MatrixXd out(x.rows(), output_dim());
  MatrixXd power = x;
  for (int p = 0; p < degree_; ++p) {
    out.middleCols(p * input_dim_, input_dim_) = power;
    power = power.cwiseProduct(x);
  }
  out.col(output_dim() - 1).setOnes();
  return out;
}

std::string FeatureMap::name() const {
  return kind_ == FeatureKind::affine ? "affine" : "polynomial";
}

namespace {

void column_moments(const MatrixXd& m, VectorXd& mean, VectorXd& stdev) {
  const double n = static_cast<double>(m.rows());
  mean = m.colwise().mean().transpose();
  stdev.resize(m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    const double var = (m.col(j).array() - mean(j)).square().sum() / n;
    const double s = std::sqrt(var);
    stdev(j) = (s > 0.0 && std::isfinite(s)) ? s : 1.0;
  }
}

}  // namespace

Standardizer Standardizer::fit(const MatrixXd& inputs, const MatrixXd& targets) {
  if (inputs.rows() == 0 || targets.rows() == 0) {
    throw ArgumentError("cannot fit a standardizer on empty data");
  }
  if (inputs.rows() != targets.rows()) {
    throw ArgumentError("standardizer: input and target row counts differ");
  }
  Standardizer s;
  column_moments(inputs, s.x_mean, s.x_std);
  column_moments(targets, s.y_mean, s.y_std);
  return s;
}

Standardizer Standardizer::identity(int input_dim, int output_dim) {
  return {VectorXd::Zero(input_dim), VectorXd::Ones(input_dim), VectorXd::Zero(output_dim),
          VectorXd::Ones(output_dim)};
}

MatrixXd Standardizer::transform_inputs(const MatrixXd& x) const {
  return (x.rowwise() - x_mean.transpose()).array().rowwise() / x_std.transpose().array();
}

MatrixXd Standardizer::inverse_inputs(const MatrixXd& z) const {
  return (z.array().rowwise() * x_std.transpose().array()).matrix().rowwise() +
         x_mean.transpose();
}

MatrixXd Standardizer::transform_targets(const MatrixXd& y) const {
  return (y.rowwise() - y_mean.transpose()).array().rowwise() / y_std.transpose().array();
}

MatrixXd Standardizer::inverse_targets(const MatrixXd& z) const {
  return (z.array().rowwise() * y_std.transpose().array()).matrix().rowwise() +
         y_mean.transpose();
}

VectorXd Standardizer::transform_input(const VectorXd& x) const {
  return (x - x_mean).cwiseQuotient(x_std);
}

VectorXd Standardizer::transform_target(const VectorXd& y) const {
  return (y - y_mean).cwiseQuotient(y_std);
}

VectorXd Standardizer::inverse_target(const VectorXd& z) const {
  return z.cwiseProduct(y_std) + y_mean;
}

MatrixXd Standardizer::inverse_target_covariance(const MatrixXd& cov) const {
  return y_std.asDiagonal() * cov * y_std.asDiagonal();
}

void Standardizer::validate() const {
  if (x_mean.size() != x_std.size() || y_mean.size() != y_std.size() || x_mean.size() == 0 ||
      y_mean.size() == 0) {
    throw InvariantViolationError("standardizer dimensions are inconsistent");
  }
  if (!x_mean.allFinite() || !y_mean.allFinite() || !(x_std.array() > 0.0).all() ||
      !(y_std.array() > 0.0).all() || !x_std.allFinite() || !y_std.allFinite()) {
    throw InvariantViolationError("standardizer stds must be positive and finite");
  }
}

}  // namespace ilr
