#pragma once

#include <span>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace ilr {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Beta(a, b) over a stick length.
struct BetaParams {
  double a = 1.0;
  double b = 1.0;

  void validate() const;
  double mean() const { return a / (a + b); }
};

// N(mu | mean, (scale * Sigma)^-1) W(Sigma | scale_matrix, dof).
// Sigma is a precision matrix; E[Sigma] = dof * scale_matrix.
struct NormalWishart {
  VectorXd mean;
  double scale = 1.0;
  MatrixXd scale_matrix;
  double dof = 1.0;

  int dim() const { return static_cast<int>(mean.size()); }
  void validate() const;
};

// MN(A | mean, V^-1, col_precision^-1) W(V | scale_matrix, dof), with A of
// shape d x m_f. V is the output precision.
struct MatrixNormalWishart {
  MatrixXd mean;
  MatrixXd col_precision;
  MatrixXd scale_matrix;
  double dof = 1.0;

  int out_dim() const { return static_cast<int>(mean.rows()); }
  int in_dim() const { return static_cast<int>(mean.cols()); }
  void validate() const;
};

namespace dist {

double digamma(double x);

// E[log |W|] for W ~ Wishart(scale, dof), including the dim * log 2 term.
double expected_log_det_wishart(const MatrixXd& scale, double dof);

// (E[log v], E[log(1 - v)]) for v ~ Beta.
std::pair<double, double> expected_log_stick(const BetaParams& beta);

double log_sum_exp(std::span<const double> values);

double student_t_logpdf(const VectorXd& x, const VectorXd& mean,
                        const MatrixXd& scale, double dof);

double gaussian_logpdf(const VectorXd& x, const VectorXd& mean,
                       const MatrixXd& covariance);

// Symmetrizes and factorizes. Throws DecompositionError, naming `what`, if the
// matrix is not positive definite.
Eigen::LLT<MatrixXd> spd_factor(const MatrixXd& m, const char* what = "matrix");

double log_det(const Eigen::LLT<MatrixXd>& llt);

// Inverse of an SPD matrix via its Cholesky factor.
MatrixXd spd_inverse(const MatrixXd& m, const char* what = "matrix");

bool is_spd(const MatrixXd& m);

// log Gamma_p(a), the multivariate gamma function.
double log_multigamma(double a, int p);

double kl_beta(const BetaParams& q, const BetaParams& p);
double kl_dirichlet(std::span<const double> q, std::span<const double> p);
double kl_wishart(const MatrixXd& q_scale, double q_dof, const MatrixXd& p_scale,
                  double p_dof);
double kl_normal_wishart(const NormalWishart& q, const NormalWishart& p);
double kl_matrix_normal_wishart(const MatrixNormalWishart& q,
                                const MatrixNormalWishart& p);

}  // namespace dist
}  // namespace ilr
