#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include <Eigen/Core>

#include "ilr/data.hpp"
#include "ilr/model.hpp"

namespace ilr {

// Per-dimension mean squared residual.
VectorXd mse(const MatrixXd& pred, const MatrixXd& truth);

// Per-dimension MSE over the population variance of `truth`. Throws
// NumericalError for a zero-variance dimension.
VectorXd nmse(const MatrixXd& pred, const MatrixXd& truth);

struct EvalReport {
  VectorXd mse;
  VectorXd nmse;
  double mean_mse = 0.0;   // unweighted mean over output dims
  double mean_nmse = 0.0;
  std::size_t active_models = 0;
  double mean_log_density = 0.0;
  std::size_t n_test = 0;
  std::uint64_t seed = 0;

  std::string to_json() const;
  std::string to_table() const;
};

// Batch-predicts `test` and scores means against its targets.
EvalReport report(const MixturePosterior& model, const Dataset& test, double threshold = 1.0);

// Mean predictions for every input row (N x d).
MatrixXd predict_means(const MixturePosterior& model, const MatrixXd& inputs);

}  // namespace ilr
