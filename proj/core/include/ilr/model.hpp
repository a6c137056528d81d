#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "ilr/dist.hpp"
#include "ilr/features.hpp"

namespace ilr {

enum class GatingPrior { stick_breaking, finite_dirichlet };

std::string to_string(GatingPrior kind);
GatingPrior parse_gating_prior(std::string_view name);

// All prior hyperparameters plus the truncation level.
struct Hyperparams {
  NormalWishart gating;        // m0, lambda0, L0, nu0
  MatrixNormalWishart expert;  // M0, K0, P0, eta0
  BetaParams stick;            // gamma_{0,1}, gamma_{0,2} (= alpha)
  int max_components = 1;
  GatingPrior gating_prior = GatingPrior::stick_breaking;
  double dirichlet_alpha = 1.0;  // used only by finite_dirichlet

  int input_dim() const { return gating.dim(); }
  int feature_dim() const { return expert.in_dim(); }
  int output_dim() const { return expert.out_dim(); }

  void validate() const;
};

// Weakly informative defaults for standardized data:
// gamma0 = (1, alpha); m0 = 0, lambda0 = 1e-2, L0 = I, nu0 = m_x + 1;
// M0 = 0, K0 = 1e-2 I, P0 = I, eta0 = d + 2.
// eta0 = d + 2 keeps every output predictive a Student-t with finite
// variance (dof = eta - d + 1 >= 3).
Hyperparams default_hyperparams(int input_dim, int feature_dim, int output_dim,
                                int max_components, double alpha);

// Variational posterior of one component. The same type serves as the
// per-component prior during fitting and sequential updates.
struct ComponentPosterior {
  // Absent for the last component under stick-breaking (its stick is pinned
  // to v = 1) and for every component under the finite Dirichlet prior.
  std::optional<BetaParams> stick;
  double dirichlet = 0.0;  // Dirichlet weight parameter (finite_dirichlet only)
  NormalWishart gating;
  MatrixNormalWishart expert;
  double occupancy = 0.0;  // N_k

  void validate(GatingPrior kind, bool last) const;
};

// Prior components for a fresh model: K_max copies of the base measure.
std::vector<ComponentPosterior> prior_components(const Hyperparams& hyper);

struct FitMeta {
  int iterations = 0;
  double elbo = 0.0;
  std::uint64_t seed = 0;
};

struct MixturePosterior {
  Hyperparams hyper;
  std::vector<ComponentPosterior> components;
  FeatureMap feature_map;
  Standardizer standardizer;
  FitMeta fit_meta;

  // A model with no data: every component equals the prior.
  static MixturePosterior from_prior(const Hyperparams& hyper, const FeatureMap& feature_map,
                                     const Standardizer& standardizer);

  std::size_t size() const { return components.size(); }
  // E_q[pi_k] under the gating prior in use.
  VectorXd expected_weights() const;
  void validate() const;
};

// Weighted sums for one component, all in standardized units. Stored as raw
// sums so that minibatch statistics blend linearly.
struct ComponentStats {
  double n = 0.0;    // N_k
  VectorXd sum_x;    // sum_n r_nk x_n
  MatrixXd sum_xx;   // sum_n r_nk x_n x_n^T
  MatrixXd sum_ff;   // sum_n r_nk X_n X_n^T
  MatrixXd sum_yf;   // sum_n r_nk y_n X_n^T
  MatrixXd sum_yy;   // sum_n r_nk y_n y_n^T
  double tail = 0.0; // sum_n sum_{j>k} r_nj

  // x-bar_k; zero when N_k == 0.
  VectorXd mean() const;
  // S_k = (1/N_k) sum_n r_nk (x_n - x-bar)(x_n - x-bar)^T; zero when N_k == 0.
  MatrixXd scatter() const;

  static ComponentStats zero(int input_dim, int feature_dim, int output_dim);
};

struct SufficientStats {
  std::vector<ComponentStats> components;

  double total() const;
  SufficientStats scaled(double factor) const;
};

// Components with N_k > threshold.
std::size_t active_components(const MixturePosterior& model, double threshold = 1.0);

inline constexpr int kModelFormatVersion = 1;

std::string serialize(const MixturePosterior& model);
MixturePosterior deserialize(std::string_view payload);

void save_model(const MixturePosterior& model, const std::string& path);
MixturePosterior load_model(const std::string& path);

}  // namespace ilr
