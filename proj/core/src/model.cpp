#include "ilr/model.hpp"

#include <cmath>

#include "ilr/error.hpp"

namespace ilr {

std::string to_string(GatingPrior kind) {
  return kind == GatingPrior::stick_breaking ? "stick_breaking" : "finite_dirichlet";
}

GatingPrior parse_gating_prior(std::string_view name) {
  if (name == "stick_breaking" || name == "stick") return GatingPrior::stick_breaking;
  if (name == "finite_dirichlet" || name == "dirichlet") return GatingPrior::finite_dirichlet;
  throw ArgumentError("unknown gating prior '" + std::string(name) + "'");
}

void Hyperparams::validate() const {
  if (max_components < 1) throw InvariantViolationError("max_components must be >= 1");
  gating.validate();
  expert.validate();
  stick.validate();
  if (!(expert.dof > output_dim() + 1.0)) {
    throw InvariantViolationError("expert dof must exceed d + 1 for a finite predictive variance");
  }
  if (gating_prior == GatingPrior::finite_dirichlet && !(dirichlet_alpha > 0.0)) {
    throw InvariantViolationError("dirichlet_alpha must be positive");
  }
}

Hyperparams default_hyperparams(int input_dim, int feature_dim, int output_dim,
                                int max_components, double alpha) {
  if (input_dim < 1 || feature_dim < 1 || output_dim < 1) {
    throw ArgumentError("hyperparameter dimensions must be positive");
  }
  if (max_components < 1) throw ArgumentError("max_components must be >= 1");
  if (!(alpha > 0.0)) throw ArgumentError("concentration alpha must be positive");

  Hyperparams h;
  h.gating.mean = VectorXd::Zero(input_dim);
  h.gating.scale = 1e-2;
  h.gating.scale_matrix = MatrixXd::Identity(input_dim, input_dim);
  h.gating.dof = input_dim + 1.0;
  h.expert.mean = MatrixXd::Zero(output_dim, feature_dim);
  h.expert.col_precision = 1e-2 * MatrixXd::Identity(feature_dim, feature_dim);
  h.expert.scale_matrix = MatrixXd::Identity(output_dim, output_dim);
  h.expert.dof = output_dim + 2.0;
  h.stick = {1.0, alpha};
  h.max_components = max_components;
  h.dirichlet_alpha = alpha;
  return h;
}

void ComponentPosterior::validate(GatingPrior kind, bool last) const {
  gating.validate();
  expert.validate();
  if (!(occupancy >= 0.0) || !std::isfinite(occupancy)) {
    throw InvariantViolationError("component occupancy must be non-negative");
  }
  if (kind == GatingPrior::stick_breaking) {
    if (last && stick) throw InvariantViolationError("last stick must be pinned");
    if (!last && !stick) throw InvariantViolationError("missing stick parameters");
    if (stick) stick->validate();
  } else if (!(dirichlet > 0.0) || !std::isfinite(dirichlet)) {
    throw InvariantViolationError("Dirichlet weight parameter must be positive");
  }
}

std::vector<ComponentPosterior> prior_components(const Hyperparams& hyper) {
  const auto k_max = static_cast<std::size_t>(hyper.max_components);
  std::vector<ComponentPosterior> out(k_max);
  for (std::size_t k = 0; k < k_max; ++k) {
    auto& c = out[k];
    if (hyper.gating_prior == GatingPrior::stick_breaking) {
      if (k + 1 < k_max) c.stick = hyper.stick;
    } else {
      c.dirichlet = hyper.dirichlet_alpha / static_cast<double>(k_max);
    }
    c.gating = hyper.gating;
    c.expert = hyper.expert;
  }
  return out;
}

MixturePosterior MixturePosterior::from_prior(const Hyperparams& hyper,
                                              const FeatureMap& feature_map,
                                              const Standardizer& standardizer) {
  hyper.validate();
  if (feature_map.input_dim() != hyper.input_dim() ||
      feature_map.output_dim() != hyper.feature_dim()) {
    throw ArgumentError("feature map does not match hyperparameter dimensions");
  }
  MixturePosterior model;
  model.hyper = hyper;
  model.components = prior_components(hyper);
  model.feature_map = feature_map;
  model.standardizer = standardizer;
  model.fit_meta.elbo = std::nan("");
  return model;
}

VectorXd MixturePosterior::expected_weights() const {
  const auto k_max = static_cast<Eigen::Index>(components.size());
  VectorXd w(k_max);
  if (hyper.gating_prior == GatingPrior::finite_dirichlet) {
    for (Eigen::Index k = 0; k < k_max; ++k) w(k) = components[k].dirichlet;
    return w / w.sum();
  }
  double remaining = 1.0;
  for (Eigen::Index k = 0; k < k_max; ++k) {
    const auto& stick = components[k].stick;
    const double v = stick ? stick->mean() : 1.0;
    w(k) = v * remaining;
    remaining *= 1.0 - v;
  }
  return w;
}

void MixturePosterior::validate() const {
  hyper.validate();
  if (components.size() != static_cast<std::size_t>(hyper.max_components)) {
    throw InvariantViolationError("component count does not match max_components");
  }
  if (feature_map.input_dim() != hyper.input_dim() ||
      feature_map.output_dim() != hyper.feature_dim()) {
    throw InvariantViolationError("feature map does not match hyperparameter dimensions");
  }
  standardizer.validate();
  if (standardizer.input_dim() != hyper.input_dim() ||
      standardizer.output_dim() != hyper.output_dim()) {
    throw InvariantViolationError("standardizer does not match hyperparameter dimensions");
  }
  for (std::size_t k = 0; k < components.size(); ++k) {
    const auto& c = components[k];
    if (c.gating.dim() != hyper.input_dim() || c.expert.in_dim() != hyper.feature_dim() ||
        c.expert.out_dim() != hyper.output_dim()) {
      throw InvariantViolationError("component " + std::to_string(k) +
                                    " has inconsistent dimensions");
    }
    try {
      c.validate(hyper.gating_prior, k + 1 == components.size());
    } catch (const InvariantViolationError& e) {
      throw InvariantViolationError("component " + std::to_string(k) + ": " + e.what());
    }
  }
}

VectorXd ComponentStats::mean() const {
  if (n <= 0.0) return VectorXd::Zero(sum_x.size());
  return sum_x / n;
}

MatrixXd ComponentStats::scatter() const {
  if (n <= 0.0) return MatrixXd::Zero(sum_xx.rows(), sum_xx.cols());
  const VectorXd xbar = sum_x / n;
  MatrixXd s = sum_xx / n - xbar * xbar.transpose();
  return 0.5 * (s + s.transpose());
}

ComponentStats ComponentStats::zero(int input_dim, int feature_dim, int output_dim) {
  ComponentStats s;
  s.sum_x = VectorXd::Zero(input_dim);
  s.sum_xx = MatrixXd::Zero(input_dim, input_dim);
  s.sum_ff = MatrixXd::Zero(feature_dim, feature_dim);
  s.sum_yf = MatrixXd::Zero(output_dim, feature_dim);
  s.sum_yy = MatrixXd::Zero(output_dim, output_dim);
  return s;
}

double SufficientStats::total() const {
  double acc = 0.0;
  for (const auto& c : components) acc += c.n;
  return acc;
}

SufficientStats SufficientStats::scaled(double factor) const {
  SufficientStats out = *this;
  for (auto& c : out.components) {
    c.n *= factor;
    c.sum_x *= factor;
    c.sum_xx *= factor;
    c.sum_ff *= factor;
    c.sum_yf *= factor;
    c.sum_yy *= factor;
    c.tail *= factor;
  }
  return out;
}

std::size_t active_components(const MixturePosterior& model, double threshold) {
  if (threshold < 0.0) throw ArgumentError("active threshold must be non-negative");
  std::size_t count = 0;
  for (const auto& c : model.components) {
    if (c.occupancy > threshold) ++count;
  }
  return count;
}

}  // namespace ilr
