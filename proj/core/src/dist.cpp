#include "ilr/dist.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "ilr/error.hpp"

namespace ilr {

void BetaParams::validate() const {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
    throw InvariantViolationError("Beta parameters must be positive and finite");
  }
}

void NormalWishart::validate() const {
  const int p = dim();
  if (p < 1) throw InvariantViolationError("Normal-Wishart has empty mean");
  if (!mean.allFinite()) throw InvariantViolationError("Normal-Wishart mean is not finite");
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw InvariantViolationError("Normal-Wishart scale must be positive");
  }
  if (scale_matrix.rows() != p || scale_matrix.cols() != p) {
    throw InvariantViolationError("Normal-Wishart scale matrix has wrong shape");
  }
  if (!dist::is_spd(scale_matrix)) {
    throw InvariantViolationError("Normal-Wishart scale matrix is not SPD");
  }
  if (!(dof > p - 1.0) || !std::isfinite(dof)) {
    throw InvariantViolationError("Normal-Wishart dof must exceed dim - 1");
  }
}

void MatrixNormalWishart::validate() const {
  const int d = out_dim();
  const int q = in_dim();
  if (d < 1 || q < 1) throw InvariantViolationError("Matrix-Normal-Wishart has empty mean");
  if (!mean.allFinite()) throw InvariantViolationError("Matrix-Normal-Wishart mean is not finite");
  if (col_precision.rows() != q || col_precision.cols() != q) {
    throw InvariantViolationError("Matrix-Normal-Wishart column precision has wrong shape");
  }
  if (scale_matrix.rows() != d || scale_matrix.cols() != d) {
    throw InvariantViolationError("Matrix-Normal-Wishart scale matrix has wrong shape");
  }
  if (!dist::is_spd(col_precision)) {
    throw InvariantViolationError("Matrix-Normal-Wishart column precision is not SPD");
  }
  if (!dist::is_spd(scale_matrix)) {
    throw InvariantViolationError("Matrix-Normal-Wishart scale matrix is not SPD");
  }
  if (!(dof > d - 1.0) || !std::isfinite(dof)) {
    throw InvariantViolationError("Matrix-Normal-Wishart dof must exceed dim - 1");
  }
}

namespace dist {

double digamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError("digamma: argument must be positive and finite, got " +
                      std::to_string(x));
  }
  // Shift upward until the asymptotic series is accurate to ~1e-16.
  double acc = 0.0;
  while (x < 10.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // Bernoulli-number tail: B_2k / (2k x^2k), k = 1..7.
  const double series =
      inv2 * (1.0 / 12.0 -
              inv2 * (1.0 / 120.0 -
                      inv2 * (1.0 / 252.0 -
                              inv2 * (1.0 / 240.0 -
                                      inv2 * (1.0 / 132.0 -
                                              inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
  return acc + std::log(x) - 0.5 * inv - series;
}

double expected_log_det_wishart(const MatrixXd& scale, double dof) {
  const int p = static_cast<int>(scale.rows());
  if (!(dof > p - 1.0)) {
    throw DomainError("expected_log_det_wishart: dof must exceed dim - 1");
  }
  double acc = 0.0;
  for (int j = 1; j <= p; ++j) acc += digamma(0.5 * (dof + 1.0 - j));
  return acc + p * std::numbers::ln2 + log_det(spd_factor(scale, "Wishart scale"));
}

std::pair<double, double> expected_log_stick(const BetaParams& beta) {
  const double total = digamma(beta.a + beta.b);
  return {digamma(beta.a) - total, digamma(beta.b) - total};
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw ArgumentError("log_sum_exp: empty input");
  const double top = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(top)) return top;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - top);
  return top + std::log(acc);
}

double student_t_logpdf(const VectorXd& x, const VectorXd& mean, const MatrixXd& scale,
                        double dof) {
  const auto p = x.size();
  if (mean.size() != p || scale.rows() != p || scale.cols() != p) {
    throw ArgumentError("student_t_logpdf: dimension mismatch");
  }
  if (!(dof > 0.0)) throw DomainError("student_t_logpdf: dof must be positive");
  const auto llt = spd_factor(scale, "Student-t scale");
  const VectorXd z = llt.matrixL().solve(x - mean);
  const double maha = z.squaredNorm();
  const double half_p = 0.5 * static_cast<double>(p);
  return std::lgamma(0.5 * dof + half_p) - std::lgamma(0.5 * dof) -
         half_p * std::log(dof * std::numbers::pi) - 0.5 * log_det(llt) -
         (0.5 * dof + half_p) * std::log1p(maha / dof);
}

double gaussian_logpdf(const VectorXd& x, const VectorXd& mean, const MatrixXd& covariance) {
  const auto llt = spd_factor(covariance, "Gaussian covariance");
  const VectorXd z = llt.matrixL().solve(x - mean);
  return -0.5 * (static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi) +
                 log_det(llt) + z.squaredNorm());
}

Eigen::LLT<MatrixXd> spd_factor(const MatrixXd& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw DecompositionError(std::string(what) + " is not square");
  }
  const MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::LLT<MatrixXd> llt(sym);
  if (llt.info() != Eigen::Success || !sym.allFinite()) {
    throw DecompositionError(std::string(what) + " is not positive definite");
  }
  // LLT only checks pivots > 0; reject factors that underflowed.
  const auto diag = llt.matrixLLT().diagonal();
  if (!(diag.minCoeff() > 0.0) || !diag.allFinite()) {
    throw DecompositionError(std::string(what) + " is not positive definite");
  }
  return llt;
}

double log_det(const Eigen::LLT<MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

MatrixXd spd_inverse(const MatrixXd& m, const char* what) {
  const auto llt = spd_factor(m, what);
  MatrixXd inv = llt.solve(MatrixXd::Identity(m.rows(), m.cols()));
  return 0.5 * (inv + inv.transpose());
}

bool is_spd(const MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() == 0 || !m.allFinite()) return false;
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * std::max(1.0, m.cwiseAbs().maxCoeff())) return false;
  Eigen::LLT<MatrixXd> llt(0.5 * (m + m.transpose()));
  return llt.info() == Eigen::Success && llt.matrixLLT().diagonal().minCoeff() > 0.0;
}

double log_multigamma(double a, int p) {
  double acc = 0.25 * p * (p - 1) * std::log(std::numbers::pi);
  for (int j = 1; j <= p; ++j) acc += std::lgamma(a + 0.5 * (1 - j));
  return acc;
}

double kl_dirichlet(std::span<const double> q, std::span<const double> p) {
  if (q.size() != p.size() || q.empty()) throw ArgumentError("kl_dirichlet: size mismatch");
  double q_sum = 0.0;
  double p_sum = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    q_sum += q[i];
    p_sum += p[i];
  }
  const double psi_sum = digamma(q_sum);
  double kl = std::lgamma(q_sum) - std::lgamma(p_sum);
  for (std::size_t i = 0; i < q.size(); ++i) {
    kl += std::lgamma(p[i]) - std::lgamma(q[i]) + (q[i] - p[i]) * (digamma(q[i]) - psi_sum);
  }
  return kl;
}

double kl_beta(const BetaParams& q, const BetaParams& p) {
  const double qs[2] = {q.a, q.b};
  const double ps[2] = {p.a, p.b};
  return kl_dirichlet(qs, ps);
}

double kl_wishart(const MatrixXd& q_scale, double q_dof, const MatrixXd& p_scale,
                  double p_dof) {
  const int dim = static_cast<int>(q_scale.rows());
  const auto q_llt = spd_factor(q_scale, "Wishart scale");
  const auto p_llt = spd_factor(p_scale, "Wishart scale");
  const double q_logdet = log_det(q_llt);
  const double p_logdet = log_det(p_llt);
  double elog = dim * std::numbers::ln2 + q_logdet;
  for (int j = 1; j <= dim; ++j) elog += digamma(0.5 * (q_dof + 1.0 - j));
  const double trace = p_llt.solve(q_scale).trace();

  const double e_log_q = -0.5 * q_dof * q_logdet - 0.5 * q_dof * dim * std::numbers::ln2 -
                         log_multigamma(0.5 * q_dof, dim) +
                         0.5 * (q_dof - dim - 1.0) * elog - 0.5 * q_dof * dim;
  const double e_log_p = -0.5 * p_dof * p_logdet - 0.5 * p_dof * dim * std::numbers::ln2 -
                         log_multigamma(0.5 * p_dof, dim) +
                         0.5 * (p_dof - dim - 1.0) * elog - 0.5 * q_dof * trace;
  return e_log_q - e_log_p;
}

double kl_normal_wishart(const NormalWishart& q, const NormalWishart& p) {
  const double dim = q.dim();
  const VectorXd diff = q.mean - p.mean;
  const double maha = diff.dot(q.scale_matrix * diff);
  return kl_wishart(q.scale_matrix, q.dof, p.scale_matrix, p.dof) +
         0.5 * (dim * p.scale / q.scale + p.scale * q.dof * maha - dim +
                dim * std::log(q.scale / p.scale));
}

double kl_matrix_normal_wishart(const MatrixNormalWishart& q, const MatrixNormalWishart& p) {
  const double d = q.out_dim();
  const double m = q.in_dim();
  const auto qk = spd_factor(q.col_precision, "column precision");
  const auto pk = spd_factor(p.col_precision, "column precision");
  const MatrixXd diff = q.mean - p.mean;
  const double trace_k = qk.solve(p.col_precision).trace();
  const double maha = (diff.transpose() * q.scale_matrix * diff * p.col_precision).trace();
  return kl_wishart(q.scale_matrix, q.dof, p.scale_matrix, p.dof) +
         0.5 * (d * trace_k + q.dof * maha - d * m + d * (log_det(qk) - log_det(pk)));
}

}  // namespace dist
}  // namespace ilr
