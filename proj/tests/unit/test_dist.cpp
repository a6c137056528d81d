#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>
#include <Eigen/QR>
#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "ilr/dist.hpp"
#include "ilr/error.hpp"
#include "oracles.hpp"

using namespace ilr;

namespace {

constexpr double kEulerGamma = 0.57721566490153286061;

}  // namespace

TEST(Digamma, ClosedFormValues) {
  EXPECT_NEAR(dist::digamma(1.0), -kEulerGamma, 1e-12);
  EXPECT_NEAR(dist::digamma(0.5), -kEulerGamma - 2.0 * std::log(2.0), 1e-12);
  EXPECT_NEAR(dist::digamma(0.5), -1.9635100260214235, 1e-12);
}

TEST(Digamma, MatchesBoost) {
  for (double x : {1e-3, 0.01, 0.1, 0.37, 1.0, 1.5, 2.25, 7.0, 9.99, 10.0, 42.0, 1e3, 1e6}) {
    EXPECT_NEAR(dist::digamma(x), boost::math::digamma(x), 1e-10 * std::max(1.0, std::abs(x)))
        << "x = " << x;
  }
}

TEST(Digamma, Recurrence) {
  for (double x : {0.1, 1.0, 10.0, 100.0}) {
    EXPECT_NEAR(dist::digamma(x + 1.0) - dist::digamma(x), 1.0 / x, 1e-10);
  }
}

TEST(Digamma, RejectsNonPositive) {
  EXPECT_THROW(dist::digamma(0.0), DomainError);
  EXPECT_THROW(dist::digamma(-1.5), DomainError);
}

TEST(ExpectedLogDetWishart, ScalarCase) {
  const MatrixXd one = MatrixXd::Identity(1, 1);
  EXPECT_NEAR(dist::expected_log_det_wishart(one, 3.0), dist::digamma(1.5) + std::log(2.0),
              1e-12);
}

TEST(ExpectedLogDetWishart, ScalingAddsLogC) {
  const MatrixXd eye = MatrixXd::Identity(3, 3);
  const double base = dist::expected_log_det_wishart(eye, 5.0);
  EXPECT_NEAR(dist::expected_log_det_wishart(2.5 * eye, 5.0), base + 3.0 * std::log(2.5), 1e-12);
}

TEST(ExpectedLogDetWishart, OrthogonalInvariance) {
  std::mt19937_64 rng(3);
  const MatrixXd s = oracle::random_spd(3, rng);
  const Eigen::HouseholderQR<MatrixXd> qr(oracle::random_matrix(3, 3, rng));
  const MatrixXd q = qr.householderQ();
  EXPECT_NEAR(dist::expected_log_det_wishart(q.transpose() * s * q, 4.2),
              dist::expected_log_det_wishart(s, 4.2), 1e-12);
}

TEST(ExpectedLogDetWishart, MonteCarlo) {
  std::mt19937_64 rng(11);
  for (int dim = 1; dim <= 3; ++dim) {
    const MatrixXd scale = oracle::random_spd(dim, rng);
    const double dof = dim + 1.5;
    constexpr int kDraws = 1'000'000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < kDraws; ++i) {
      const double v = std::log(oracle::sample_wishart(scale, dof, rng).determinant());
      sum += v;
      sum_sq += v * v;
    }
    const double mean = sum / kDraws;
    const double se = std::sqrt((sum_sq / kDraws - mean * mean) / kDraws);
    EXPECT_NEAR(dist::expected_log_det_wishart(scale, dof), mean, 3.0 * se) << "dim " << dim;
  }
}

TEST(ExpectedLogDetWishart, RejectsNonSpd) {
  MatrixXd bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(dist::expected_log_det_wishart(bad, 3.0), DecompositionError);
}

TEST(ExpectedLogStick, KnownValues) {
  auto [a, b] = dist::expected_log_stick({1.0, 1.0});
  EXPECT_NEAR(a, -1.0, 1e-12);
  EXPECT_NEAR(b, -1.0, 1e-12);
  std::tie(a, b) = dist::expected_log_stick({2.0, 1.0});
  EXPECT_NEAR(a, -0.5, 1e-12);
  EXPECT_NEAR(b, -1.5, 1e-12);
}

TEST(ExpectedLogStick, SwapSymmetry) {
  const auto [a1, b1] = dist::expected_log_stick({0.7, 3.2});
  const auto [a2, b2] = dist::expected_log_stick({3.2, 0.7});
  EXPECT_NEAR(a1, b2, 1e-14);
  EXPECT_NEAR(b1, a2, 1e-14);
}

TEST(LogSumExp, Basics) {
  const std::vector<double> zeros{0.0, 0.0};
  EXPECT_NEAR(dist::log_sum_exp(zeros), std::log(2.0), 1e-15);
  const std::vector<double> big{1000.0, 1000.0};
  EXPECT_NEAR(dist::log_sum_exp(big), 1000.0 + std::log(2.0), 1e-12);
  const std::vector<double> single{-3.25};
  EXPECT_EQ(dist::log_sum_exp(single), -3.25);
  const std::vector<double> small{-700.0, -710.0};
  EXPECT_TRUE(std::isfinite(dist::log_sum_exp(small)));
  EXPECT_THROW(dist::log_sum_exp(std::vector<double>{}), ArgumentError);
}

TEST(LogSumExp, ShiftInvariance) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 10.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> v(7), w(7);
    const double c = g(rng);
    for (std::size_t i = 0; i < v.size(); ++i) w[i] = (v[i] = g(rng)) + c;
    EXPECT_NEAR(dist::log_sum_exp(w), dist::log_sum_exp(v) + c, 1e-12);
  }
}

TEST(StudentT, CauchyAtZero) {
  const VectorXd zero = VectorXd::Zero(1);
  const MatrixXd one = MatrixXd::Identity(1, 1);
  EXPECT_NEAR(dist::student_t_logpdf(zero, zero, one, 1.0), std::log(1.0 / std::numbers::pi),
              1e-14);
}

TEST(StudentT, GaussianLimit) {
  std::mt19937_64 rng(2);
  const MatrixXd scale = oracle::random_spd(2, rng);
  const VectorXd mean = oracle::random_matrix(2, 1, rng);
  const VectorXd x = oracle::random_matrix(2, 1, rng);
  EXPECT_NEAR(dist::student_t_logpdf(x, mean, scale, 1e6), dist::gaussian_logpdf(x, mean, scale),
              1e-4);
}

TEST(StudentT, IntegratesToOne) {
  const VectorXd mean = VectorXd::Constant(1, 0.3);
  const MatrixXd scale = MatrixXd::Constant(1, 1, 0.8);
  for (double dof : {2.5, 5.0, 30.0}) {
    // t density tails decay polynomially; integrate on a wide trapezoid grid.
    const double lo = -400.0, hi = 400.0;
    const int n = 800'000;
    const double h = (hi - lo) / n;
    double total = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double w = (i == 0 || i == n) ? 0.5 : 1.0;
      total += w * std::exp(dist::student_t_logpdf(VectorXd::Constant(1, lo + i * h), mean,
                                                   scale, dof));
    }
    EXPECT_NEAR(total * h, 1.0, 1e-3) << "dof " << dof;
  }
}

TEST(StudentT, MaximizedAtMean) {
  std::mt19937_64 rng(8);
  const MatrixXd scale = oracle::random_spd(2, rng);
  const VectorXd mean = oracle::random_matrix(2, 1, rng);
  const double peak = dist::student_t_logpdf(mean, mean, scale, 3.0);
  for (int i = -10; i <= 10; ++i) {
    for (int j = -10; j <= 10; ++j) {
      if (i == 0 && j == 0) continue;
      VectorXd x = mean;
      x(0) += 0.1 * i;
      x(1) += 0.1 * j;
      EXPECT_LT(dist::student_t_logpdf(x, mean, scale, 3.0), peak);
    }
  }
}

TEST(StudentT, RejectsNonSpdScale) {
  MatrixXd bad = MatrixXd::Identity(2, 2);
  bad(1, 1) = -1.0;
  EXPECT_THROW(dist::student_t_logpdf(VectorXd::Zero(2), VectorXd::Zero(2), bad, 3.0),
               DecompositionError);
}

TEST(Kl, ZeroAtIdentity) {
  std::mt19937_64 rng(4);
  EXPECT_NEAR(dist::kl_beta({2.0, 3.0}, {2.0, 3.0}), 0.0, 1e-14);
  const std::vector<double> alpha{0.5, 1.0, 3.0};
  EXPECT_NEAR(dist::kl_dirichlet(alpha, alpha), 0.0, 1e-13);
  const MatrixXd s = oracle::random_spd(3, rng);
  EXPECT_NEAR(dist::kl_wishart(s, 5.0, s, 5.0), 0.0, 1e-12);
  NormalWishart nw{oracle::random_matrix(3, 1, rng), 0.4, s, 4.5};
  EXPECT_NEAR(dist::kl_normal_wishart(nw, nw), 0.0, 1e-12);
  MatrixNormalWishart mnw{oracle::random_matrix(2, 3, rng), oracle::random_spd(3, rng),
                          oracle::random_spd(2, rng), 3.5};
  EXPECT_NEAR(dist::kl_matrix_normal_wishart(mnw, mnw), 0.0, 1e-12);
}

TEST(Kl, BetaMatchesQuadrature) {
  const BetaParams q{2.5, 1.5}, p{1.0, 3.0};
  const auto log_beta = [](const BetaParams& b, double v) {
    return std::lgamma(b.a + b.b) - std::lgamma(b.a) - std::lgamma(b.b) +
           (b.a - 1) * std::log(v) + (b.b - 1) * std::log1p(-v);
  };
  const int n = 200'000;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = (i + 0.5) / n;
    total += std::exp(log_beta(q, v)) * (log_beta(q, v) - log_beta(p, v)) / n;
  }
  EXPECT_NEAR(dist::kl_beta(q, p), total, 1e-5);
}

TEST(Kl, NormalWishartMonteCarlo) {
  std::mt19937_64 rng(21);
  const NormalWishart q{oracle::random_matrix(2, 1, rng), 3.0, oracle::random_spd(2, rng), 6.0};
  const NormalWishart p{oracle::random_matrix(2, 1, rng), 0.5, oracle::random_spd(2, rng), 4.0};
  const auto log_density = [](const NormalWishart& nw, const VectorXd& mu, const MatrixXd& prec) {
    const int dim = nw.dim();
    const double log_w = 0.5 * (nw.dof - dim - 1) * std::log(prec.determinant()) -
                         0.5 * (nw.scale_matrix.inverse() * prec).trace() -
                         0.5 * nw.dof * dim * std::log(2.0) -
                         0.5 * nw.dof * std::log(nw.scale_matrix.determinant()) -
                         dist::log_multigamma(0.5 * nw.dof, dim);
    return log_w + dist::gaussian_logpdf(mu, nw.mean, (nw.scale * prec).inverse());
  };
  constexpr int kDraws = 200'000;
  double sum = 0.0, sum_sq = 0.0;
  std::normal_distribution<double> g;
  for (int i = 0; i < kDraws; ++i) {
    const MatrixXd prec = oracle::sample_wishart(q.scale_matrix, q.dof, rng);
    const MatrixXd chol = Eigen::LLT<MatrixXd>((q.scale * prec).inverse()).matrixL();
    const VectorXd mu = q.mean + chol * VectorXd::NullaryExpr(2, [&] { return g(rng); });
    const double v = log_density(q, mu, prec) - log_density(p, mu, prec);
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / kDraws;
  const double se = std::sqrt((sum_sq / kDraws - mean * mean) / kDraws);
  EXPECT_NEAR(dist::kl_normal_wishart(q, p), mean, 4.0 * se);
}

TEST(Kl, MatrixNormalWishartMonteCarlo) {
  std::mt19937_64 rng(22);
  const MatrixNormalWishart q{oracle::random_matrix(2, 2, rng), 4.0 * oracle::random_spd(2, rng),
                              oracle::random_spd(2, rng), 7.0};
  const MatrixNormalWishart p{MatrixXd::Zero(2, 2), oracle::random_spd(2, rng),
                              oracle::random_spd(2, rng), 3.0};
  // Matrix-normal density of A with row covariance V^-1 and column covariance K^-1.
  const auto log_density = [](const MatrixNormalWishart& m, const MatrixXd& a,
                              const MatrixXd& prec) {
    const int d = m.out_dim(), q = m.in_dim();
    const double log_w = 0.5 * (m.dof - d - 1) * std::log(prec.determinant()) -
                         0.5 * (m.scale_matrix.inverse() * prec).trace() -
                         0.5 * m.dof * d * std::log(2.0) -
                         0.5 * m.dof * std::log(m.scale_matrix.determinant()) -
                         dist::log_multigamma(0.5 * m.dof, d);
    const MatrixXd diff = a - m.mean;
    const double log_mn = -0.5 * d * q * std::log(2.0 * std::numbers::pi) +
                          0.5 * q * std::log(prec.determinant()) +
                          0.5 * d * std::log(m.col_precision.determinant()) -
                          0.5 * (prec * diff * m.col_precision * diff.transpose()).trace();
    return log_w + log_mn;
  };
  constexpr int kDraws = 200'000;
  double sum = 0.0, sum_sq = 0.0;
  std::normal_distribution<double> g;
  const MatrixXd col_chol = Eigen::LLT<MatrixXd>(q.col_precision.inverse()).matrixL();
  for (int i = 0; i < kDraws; ++i) {
    const MatrixXd prec = oracle::sample_wishart(q.scale_matrix, q.dof, rng);
    const MatrixXd row_chol = Eigen::LLT<MatrixXd>(prec.inverse()).matrixL();
    const MatrixXd z = MatrixXd::NullaryExpr(2, 2, [&] { return g(rng); });
    const MatrixXd a = q.mean + row_chol * z * col_chol.transpose();
    const double v = log_density(q, a, prec) - log_density(p, a, prec);
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / kDraws;
  const double se = std::sqrt((sum_sq / kDraws - mean * mean) / kDraws);
  EXPECT_NEAR(dist::kl_matrix_normal_wishart(q, p), mean, 4.0 * se);
}

TEST(Spd, FactorAndInverse) {
  std::mt19937_64 rng(1);
  const MatrixXd s = oracle::random_spd(4, rng);
  EXPECT_TRUE(dist::is_spd(s));
  EXPECT_NEAR(dist::log_det(dist::spd_factor(s)), std::log(s.determinant()), 1e-12);
  EXPECT_LT((dist::spd_inverse(s) * s - MatrixXd::Identity(4, 4)).norm(), 1e-12);
  MatrixXd indefinite = s;
  indefinite(0, 0) = -1.0;
  EXPECT_FALSE(dist::is_spd(indefinite));
  EXPECT_THROW(dist::spd_factor(indefinite, "test"), DecompositionError);
}
