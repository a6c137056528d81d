#include "ilr/metrics.hpp"

#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "ilr/error.hpp"
#include "ilr/predict.hpp"

namespace ilr {

namespace {

void check_shapes(const MatrixXd& pred, const MatrixXd& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) {
    throw ArgumentError("prediction and truth shapes differ");
  }
  if (truth.rows() < 1) throw ArgumentError("metrics need at least one row");
}

}  // namespace

VectorXd mse(const MatrixXd& pred, const MatrixXd& truth) {
  check_shapes(pred, truth);
  return (pred - truth).array().square().colwise().mean().transpose();
}

VectorXd nmse(const MatrixXd& pred, const MatrixXd& truth) {
  check_shapes(pred, truth);
  const Eigen::RowVectorXd mean = truth.colwise().mean();
  const VectorXd var = (truth.rowwise() - mean).array().square().colwise().mean().transpose();
  if ((var.array() <= 0.0).any()) {
    throw NumericalError("nmse: truth has a zero-variance dimension");
  }
  return mse(pred, truth).cwiseQuotient(var);
}

MatrixXd predict_means(const MixturePosterior& model, const MatrixXd& inputs) {
  const Predictor predictor(model);
  MatrixXd out(inputs.rows(), model.hyper.output_dim());
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    out.row(i) = predictor.predict(inputs.row(i).transpose()).mean.transpose();
  }
  return out;
}

EvalReport report(const MixturePosterior& model, const Dataset& test, double threshold) {
  test.validate();
  if (test.input_dim() != model.hyper.input_dim() ||
      test.output_dim() != model.hyper.output_dim()) {
    throw DataError("test data dimensions do not match the model");
  }
  const Predictor predictor(model);
  MatrixXd pred(test.size(), test.output_dim());
  double log_density = 0.0;
  for (Eigen::Index i = 0; i < test.size(); ++i) {
    const VectorXd y = test.targets.row(i).transpose();
    const auto res = predictor.predict(test.inputs.row(i).transpose(), y);
    pred.row(i) = res.mean.transpose();
    log_density += *res.log_density;
  }
  EvalReport r;
  r.mse = mse(pred, test.targets);
  r.nmse = nmse(pred, test.targets);
  r.mean_mse = r.mse.mean();
  r.mean_nmse = r.nmse.mean();
  r.active_models = active_components(model, threshold);
  r.mean_log_density = log_density / static_cast<double>(test.size());
  r.n_test = static_cast<std::size_t>(test.size());
  r.seed = model.fit_meta.seed;
  return r;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["mse"] = std::vector<double>(mse.data(), mse.data() + mse.size());
  j["nmse"] = std::vector<double>(nmse.data(), nmse.data() + nmse.size());
  j["mean_mse"] = mean_mse;
  j["mean_nmse"] = mean_nmse;
  j["active_models"] = active_models;
  j["mean_log_density"] = mean_log_density;
  j["n_test"] = n_test;
  j["seed"] = seed;
  return j.dump(2) + "\n";
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-8s %14s %14s\n", "output", "MSE", "NMSE");
  out << line;
  for (Eigen::Index i = 0; i < mse.size(); ++i) {
    std::snprintf(line, sizeof(line), "%-8ld %14.6g %14.6g\n", static_cast<long>(i + 1), mse(i),
                  nmse(i));
    out << line;
  }
  std::snprintf(line, sizeof(line), "%-8s %14.6g %14.6g\n", "mean", mean_mse, mean_nmse);
  out << line;
  std::snprintf(line, sizeof(line), "active models: %zu\nmean log density: %.6g\nn_test: %zu\n",
                active_models, mean_log_density, n_test);
  out << line;
  return out.str();
}

}  // namespace ilr
