#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "ilr/model.hpp"

namespace ilr {

// How a query's component membership is scored. student_t integrates the
// Normal-Wishart gating posterior; plugin evaluates a Gaussian at the
// posterior means (kept for ablations).
enum class GatingMode { student_t, plugin };

GatingMode parse_gating_mode(std::string_view name);

// Everything is reported in original (unstandardized) units.
struct PredictiveResult {
  VectorXd mean;
  VectorXd mode;
  MatrixXd covariance;
  VectorXd weights;          // gating weights over all K_max components
  MatrixXd component_means;  // K_max x d
  std::optional<double> log_density;

  VectorXd stddev() const { return covariance.diagonal().cwiseSqrt(); }
};

// Caches per-component factorizations of an immutable model. Per-query work
// only touches model parameters, never training data.
class Predictor {
 public:
  explicit Predictor(const MixturePosterior& model, GatingMode mode = GatingMode::student_t);

  VectorXd gating_weights(const VectorXd& x) const;
  PredictiveResult predict(const VectorXd& x,
                           const std::optional<VectorXd>& y = std::nullopt) const;
  // log E[pi_k] + log t_k(x) + log t_k(y | x) per component, in standardized
  // units; normalizing gives the predictive assignment of (x, y).
  VectorXd component_log_joint(const VectorXd& x, const VectorXd& y) const;

  const MixturePosterior& model() const { return *model_; }

 private:
  struct Cached {
    double log_weight;
    // Gating density: log t(x) = gate_const - gate_power * log1p(maha / gate_dof)
    // for Student-t, or gate_const - 0.5 * maha for the plug-in Gaussian,
    // with maha = gate_maha_scale * |gate_factor^T (x - m)|^2.
    double gate_const;
    double gate_power;
    double gate_dof;
    double gate_maha_scale;
    MatrixXd gate_factor;
    Eigen::LLT<MatrixXd> col_precision;
    Eigen::LLT<MatrixXd> out_scale;   // Cholesky of P_k
    MatrixXd out_scale_inv;           // P_k^-1
    double out_dof;                   // eta_k - d + 1
    double out_log_det_scale;         // log |P_k|
  };

  VectorXd log_gating_unnormalized(const VectorXd& z) const;
  VectorXd log_gating(const VectorXd& z) const;
  double log_output(std::size_t k, const VectorXd& features, const VectorXd& y_std,
                    VectorXd* mean = nullptr, double* leverage = nullptr) const;

  const MixturePosterior* model_;
  GatingMode mode_;
  std::vector<Cached> cache_;
};

VectorXd gating_weights(const MixturePosterior& model, const VectorXd& x,
                        GatingMode mode = GatingMode::student_t);

PredictiveResult predict(const MixturePosterior& model, const VectorXd& x,
                         const std::optional<VectorXd>& y = std::nullopt,
                         GatingMode mode = GatingMode::student_t);

// Row-wise predict over an N x m_x query matrix.
std::vector<PredictiveResult> predict_batch(const MixturePosterior& model, const MatrixXd& queries,
                                            GatingMode mode = GatingMode::student_t);

}  // namespace ilr
