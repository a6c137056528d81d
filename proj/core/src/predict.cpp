#include "ilr/predict.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "ilr/dist.hpp"
#include "ilr/error.hpp"

namespace ilr {

GatingMode parse_gating_mode(std::string_view name) {
  if (name == "student_t") return GatingMode::student_t;
  if (name == "plugin") return GatingMode::plugin;
  throw ArgumentError("unknown gating mode '" + std::string(name) + "'");
}

Predictor::Predictor(const MixturePosterior& model, GatingMode mode)
    : model_(&model), mode_(mode) {
  const double p = model.hyper.input_dim();
  const double d = model.hyper.output_dim();
  const VectorXd weights = model.expected_weights();
  cache_.reserve(model.components.size());
  for (std::size_t k = 0; k < model.components.size(); ++k) {
    const auto& c = model.components[k];
    Cached cached;
    cached.log_weight = std::log(weights(static_cast<Eigen::Index>(k)));

    const auto gate_llt = dist::spd_factor(c.gating.scale_matrix, "gating scale matrix");
    const double log_det_l = dist::log_det(gate_llt);
    cached.gate_factor = gate_llt.matrixL();
    if (mode == GatingMode::student_t) {
      const double dof = c.gating.dof - p + 1.0;
      if (!(dof > 0.0)) {
        throw InternalInvariantError("gating predictive dof must be positive",
                                     static_cast<std::ptrdiff_t>(k));
      }
      const double lambda = c.gating.scale;
      const double coeff = (lambda + 1.0) / (lambda * dof);  // scale = coeff * L^-1
      cached.gate_dof = dof;
      cached.gate_power = 0.5 * (dof + p);
      cached.gate_maha_scale = 1.0 / coeff;
      cached.gate_const = std::lgamma(0.5 * (dof + p)) - std::lgamma(0.5 * dof) -
                          0.5 * p * std::log(dof * std::numbers::pi) -
                          0.5 * (p * std::log(coeff) - log_det_l);
    } else {
      cached.gate_dof = 0.0;
      cached.gate_power = 0.0;
      cached.gate_maha_scale = c.gating.dof;
      cached.gate_const = -0.5 * p * std::log(2.0 * std::numbers::pi) +
                          0.5 * (p * std::log(c.gating.dof) + log_det_l);
    }

    cached.col_precision = dist::spd_factor(c.expert.col_precision, "column precision");
    cached.out_scale = dist::spd_factor(c.expert.scale_matrix, "output scale matrix");
    cached.out_scale_inv = cached.out_scale.solve(MatrixXd::Identity(
        c.expert.scale_matrix.rows(), c.expert.scale_matrix.cols()));
    cached.out_log_det_scale = dist::log_det(cached.out_scale);
    cached.out_dof = c.expert.dof - d + 1.0;
    if (!(cached.out_dof > 2.0)) {
      throw InternalInvariantError(
          "output predictive dof must exceed 2 for a finite covariance (eta_k > d + 1)",
          static_cast<std::ptrdiff_t>(k));
    }
    cache_.push_back(std::move(cached));
  }
}

VectorXd Predictor::log_gating_unnormalized(const VectorXd& z) const {
  const auto k_max = static_cast<Eigen::Index>(cache_.size());
  VectorXd log_w(k_max);
  for (Eigen::Index k = 0; k < k_max; ++k) {
    const auto& c = cache_[static_cast<std::size_t>(k)];
    const auto& mean = model_->components[static_cast<std::size_t>(k)].gating.mean;
    const double maha =
        c.gate_maha_scale * (c.gate_factor.transpose() * (z - mean)).squaredNorm();
    const double log_density = mode_ == GatingMode::student_t
                                   ? c.gate_const - c.gate_power * std::log1p(maha / c.gate_dof)
                                   : c.gate_const - 0.5 * maha;
    log_w(k) = c.log_weight + log_density;
  }
  return log_w;
}

VectorXd Predictor::log_gating(const VectorXd& z) const {
  const VectorXd log_w = log_gating_unnormalized(z);
  const double top = log_w.maxCoeff();
  VectorXd w = (log_w.array() - top).exp();
  return w / w.sum();
}

// Student-t with dof nu, location M X, scale ((1 + s) / nu) P^-1.
double Predictor::log_output(std::size_t k, const VectorXd& features, const VectorXd& y_std,
                             VectorXd* mean, double* leverage) const {
  const auto& c = cache_[k];
  const auto& expert = model_->components[k].expert;
  const VectorXd mu = expert.mean * features;
  const double s = c.col_precision.matrixL().solve(features).squaredNorm();
  if (mean) *mean = mu;
  if (leverage) *leverage = s;
  if (y_std.size() == 0) return 0.0;
  const double nu = c.out_dof;
  const double dd = static_cast<double>(y_std.size());
  const double maha = nu / (1.0 + s) * (c.out_scale.matrixU() * (y_std - mu)).squaredNorm();
  const double log_det_scale = dd * std::log((1.0 + s) / nu) - c.out_log_det_scale;
  return std::lgamma(0.5 * (nu + dd)) - std::lgamma(0.5 * nu) -
         0.5 * dd * std::log(nu * std::numbers::pi) - 0.5 * log_det_scale -
         0.5 * (nu + dd) * std::log1p(maha / nu);
}

VectorXd Predictor::component_log_joint(const VectorXd& x, const VectorXd& y) const {
  if (x.size() != model_->hyper.input_dim() || !x.allFinite()) {
    throw ArgumentError("query must be a finite vector of dim " +
                        std::to_string(model_->hyper.input_dim()));
  }
  if (y.size() != model_->hyper.output_dim() || !y.allFinite()) {
    throw ArgumentError("target must be a finite vector of dim " +
                        std::to_string(model_->hyper.output_dim()));
  }
  const VectorXd z = model_->standardizer.transform_input(x);
  const VectorXd features = model_->feature_map.apply(z);
  const VectorXd y_std = model_->standardizer.transform_target(y);
  VectorXd out = log_gating_unnormalized(z);
  for (std::size_t k = 0; k < cache_.size(); ++k) {
    out(static_cast<Eigen::Index>(k)) += log_output(k, features, y_std);
  }
  return out;
}

VectorXd Predictor::gating_weights(const VectorXd& x) const {
  if (x.size() != model_->hyper.input_dim() || !x.allFinite()) {
    throw ArgumentError("query must be a finite vector of dim " +
                        std::to_string(model_->hyper.input_dim()));
  }
  return log_gating(model_->standardizer.transform_input(x));
}

PredictiveResult Predictor::predict(const VectorXd& x, const std::optional<VectorXd>& y) const {
  if (x.size() != model_->hyper.input_dim() || !x.allFinite()) {
    throw ArgumentError("query must be a finite vector of dim " +
                        std::to_string(model_->hyper.input_dim()));
  }
  const auto& standardizer = model_->standardizer;
  const auto d = static_cast<Eigen::Index>(model_->hyper.output_dim());
  const auto k_max = static_cast<Eigen::Index>(cache_.size());
  const VectorXd z = standardizer.transform_input(x);
  const VectorXd features = model_->feature_map.apply(z);

  PredictiveResult res;
  res.weights = log_gating(z);
  res.component_means.resize(k_max, d);

  std::optional<VectorXd> y_std;
  if (y) {
    if (y->size() != d) throw ArgumentError("target has wrong dimension");
    y_std = standardizer.transform_target(*y);
  }

  VectorXd mean = VectorXd::Zero(d);
  MatrixXd second = MatrixXd::Zero(d, d);
  VectorXd log_terms(k_max);
  const VectorXd no_target;
  for (Eigen::Index k = 0; k < k_max; ++k) {
    const auto& c = cache_[static_cast<std::size_t>(k)];
    const double w = res.weights(k);
    VectorXd mu;
    double leverage = 0.0;
    const double log_t = log_output(static_cast<std::size_t>(k), features,
                                    y_std ? *y_std : no_target, &mu, &leverage);
    res.component_means.row(k) = mu.transpose();
    mean += w * mu;
    second += w * ((1.0 + leverage) / (c.out_dof - 2.0) * c.out_scale_inv + mu * mu.transpose());
    if (y_std) {
      log_terms(k) = (w > 0.0 ? std::log(w) : -std::numeric_limits<double>::infinity()) + log_t;
    }
  }
  MatrixXd cov = second - mean * mean.transpose();
  cov = 0.5 * (cov + cov.transpose());

  Eigen::Index top = 0;
  res.weights.maxCoeff(&top);
  res.mean = standardizer.inverse_target(mean);
  res.mode = standardizer.inverse_target(res.component_means.row(top).transpose());
  res.covariance = standardizer.inverse_target_covariance(cov);
  res.component_means = standardizer.inverse_targets(res.component_means);
  if (y_std) {
    std::vector<double> terms(log_terms.data(), log_terms.data() + log_terms.size());
    res.log_density = dist::log_sum_exp(terms) - standardizer.y_std.array().log().sum();
  }
  return res;
}

VectorXd gating_weights(const MixturePosterior& model, const VectorXd& x, GatingMode mode) {
  return Predictor(model, mode).gating_weights(x);
}

PredictiveResult predict(const MixturePosterior& model, const VectorXd& x,
                         const std::optional<VectorXd>& y, GatingMode mode) {
  return Predictor(model, mode).predict(x, y);
}

std::vector<PredictiveResult> predict_batch(const MixturePosterior& model, const MatrixXd& queries,
                                            GatingMode mode) {
  const Predictor predictor(model, mode);
  std::vector<PredictiveResult> out;
  out.reserve(static_cast<std::size_t>(queries.rows()));
  for (Eigen::Index i = 0; i < queries.rows(); ++i) {
    out.push_back(predictor.predict(queries.row(i).transpose()));
  }
  return out;
}

}  // namespace ilr
