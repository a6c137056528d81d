#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "ilr/data.hpp"
#include "ilr/features.hpp"
#include "ilr/model.hpp"

namespace ilr {

enum class InitKind { random, kmeans };

std::string to_string(InitKind kind);
InitKind parse_init_kind(std::string_view name);

struct FitConfig {
  int max_iters = 200;
  double elbo_rel_tol = 1e-6;
  std::uint64_t seed = 0;
  InitKind init = InitKind::kmeans;
  // Independent initializations; the fit with the best ELBO is kept.
  int restarts = 10;

  // Stochastic mode: minibatch size M (0 = full batch) and the step size
  // schedule rho_t = (t + tau)^-kappa, t = 0, 1, ...
  std::size_t minibatch = 0;
  double tau = 1.0;
  double kappa = 0.75;

  // Use the E-step residual term without the factor d on X^T K^-1 X.
  bool trace_only_estep = false;

  // Expert feature map; affine on the input dimension when unset.
  std::optional<FeatureMap> features;
  // Frozen standardizer; fit on the training data when unset.
  std::optional<Standardizer> standardizer;

  // Called after every full-batch iteration with (iteration, ELBO).
  std::function<void(int, double)> on_iteration;

  void validate() const;
};

// r (N x K_max); rows are distributions over components.
struct Responsibilities {
  MatrixXd r;
};

// Standardized training matrices: gating inputs x, expert features X and
// targets y, one row per data point.
struct Design {
  MatrixXd gate;
  MatrixXd features;
  MatrixXd targets;

  Eigen::Index size() const { return gate.rows(); }
  static Design build(const Dataset& data, const FeatureMap& map, const Standardizer& standardizer);
};

// Per-component E[log pi_k] under the gating prior.
VectorXd expected_log_weights(std::span<const ComponentPosterior> components, GatingPrior kind);

// Unnormalized log responsibilities (N x K).
MatrixXd log_responsibilities(const MixturePosterior& model, const MatrixXd& gate,
                              const MatrixXd& features, const MatrixXd& targets,
                              bool trace_only_estep = false);

Responsibilities e_step(const MixturePosterior& model, const MatrixXd& gate,
                        const MatrixXd& features, const MatrixXd& targets,
                        bool trace_only_estep = false);

SufficientStats accumulate_stats(const MatrixXd& gate, const MatrixXd& features,
                                 const MatrixXd& targets, const Responsibilities& resp);

// Closed-form M-step against per-component priors (the base measure for a
// fresh fit, the previous posterior for a sequential update). Components with
// N_k below kEmptyMass keep their prior gating and expert parameters.
std::vector<ComponentPosterior> m_step(const SufficientStats& stats,
                                       std::span<const ComponentPosterior> priors,
                                       GatingPrior kind);
std::vector<ComponentPosterior> m_step(const SufficientStats& stats, const Hyperparams& hyper);

inline constexpr double kEmptyMass = 1e-8;

// Evidence lower bound of the current variational posterior. Data enters
// through the sufficient statistics; the responsibilities supply the
// entropy of q(z).
double elbo(const MixturePosterior& model, std::span<const ComponentPosterior> priors,
            const SufficientStats& stats, const Responsibilities& resp);
double elbo(const MixturePosterior& model, const SufficientStats& stats,
            const Responsibilities& resp);

// Full-batch VBEM from the configured initialization.
MixturePosterior fit(const Dataset& data, const Hyperparams& hyper, const FitConfig& config);

// Full-batch VBEM from given initial responsibilities (single run, no restarts).
MixturePosterior fit_from(const Dataset& data, const Hyperparams& hyper, const FitConfig& config,
                          const Responsibilities& init);

// Stochastic variational updates on uniformly sampled minibatches.
MixturePosterior fit_minibatch(const Dataset& data, const Hyperparams& hyper,
                               const FitConfig& config);

// The current posterior becomes the per-component prior for the new batch.
// The batch is standardized with the model's frozen standardizer.
MixturePosterior sequential_update(const MixturePosterior& model, const Dataset& batch,
                                   const FitConfig& config);

}  // namespace ilr
