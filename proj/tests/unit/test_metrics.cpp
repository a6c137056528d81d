#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>
#include <json.hpp>

#include "ilr/error.hpp"
#include "ilr/metrics.hpp"
#include "ilr/vbem.hpp"

namespace {

using namespace ilr;

MatrixXd random_targets(int n, int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  MatrixXd m(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = g(rng) * (j + 1) + j;
  return m;
}

TEST(Mse, Basics) {
  const MatrixXd t = random_targets(20, 3, 1);
  EXPECT_EQ(mse(t, t), VectorXd::Zero(3));
  const VectorXd off = mse(t.array() + 0.5, t);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(off(j), 0.25, 1e-14);
  MatrixXd p(2, 1), q(2, 1);
  p << 1.0, -1.0;
  q << 0.0, 0.0;
  EXPECT_DOUBLE_EQ(mse(p, q)(0), 1.0);
}

TEST(Mse, ShapeErrors) {
  EXPECT_THROW(mse(MatrixXd::Zero(3, 2), MatrixXd::Zero(3, 1)), ArgumentError);
  EXPECT_THROW(mse(MatrixXd::Zero(0, 1), MatrixXd::Zero(0, 1)), ArgumentError);
  EXPECT_THROW(nmse(MatrixXd::Zero(2, 1), MatrixXd::Zero(3, 1)), ArgumentError);
}

TEST(Nmse, MeanPredictorScoresOne) {
  const MatrixXd t = random_targets(50, 2, 2);
  const MatrixXd mean = t.colwise().mean().replicate(50, 1);
  const VectorXd e = nmse(mean, t);
  EXPECT_NEAR(e(0), 1.0, 1e-12);
  EXPECT_NEAR(e(1), 1.0, 1e-12);
  EXPECT_EQ(nmse(t, t), VectorXd::Zero(2));
}

TEST(Nmse, ZeroVarianceIsNumericalError) {
  MatrixXd t(3, 2);
  t << 1, 2, 1, 3, 1, 4;
  EXPECT_THROW(nmse(t, t), NumericalError);
}

TEST(Nmse, InvariantUnderCommonAffineRescaling) {
  const MatrixXd t = random_targets(40, 2, 3);
  const MatrixXd p = t + random_targets(40, 2, 4) * 0.3;
  const VectorXd base = nmse(p, t);
  const VectorXd scaled = nmse((p.array() * -3.5 + 11.0).matrix(), (t.array() * -3.5 + 11.0).matrix());
  EXPECT_NEAR(base(0), scaled(0), 1e-12);
  EXPECT_NEAR(base(1), scaled(1), 1e-12);
  EXPECT_GE(base.minCoeff(), 0.0);
}

Dataset linear_data(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Dataset d;
  d.inputs = MatrixXd(n, 1);
  d.targets = MatrixXd(n, 2);
  for (int i = 0; i < n; ++i) {
    const double x = u(rng);
    d.inputs(i, 0) = x;
    d.targets.row(i) << 2.0 * x - 1.0, -0.5 * x + 3.0;
  }
  return d;
}

TEST(Report, PriorOnlyModelHasNoActiveComponents) {
  const auto test = linear_data(30, 1);
  const auto h = default_hyperparams(1, 2, 2, 5, 1.0);
  const auto model = MixturePosterior::from_prior(
      h, FeatureMap::affine(1), Standardizer::fit(test.inputs, test.targets));
  EXPECT_EQ(report(model, test).active_models, 0u);
}

TEST(Report, PerfectLinearModel) {
  const auto train = linear_data(200, 2);
  const auto test = linear_data(50, 3);
  FitConfig c;
  c.restarts = 1;
  const auto model = fit(train, default_hyperparams(1, 2, 2, 1, 1.0), c);
  const auto r = report(model, test);
  EXPECT_LT(r.mean_mse, 1e-6);
  EXPECT_LT(r.mean_nmse, 1e-6);
  EXPECT_EQ(r.active_models, 1u);
  EXPECT_EQ(r.n_test, 50u);
  EXPECT_NEAR(r.mean_mse, r.mse.mean(), 1e-12);
  EXPECT_NEAR(r.mean_nmse, r.nmse.mean(), 1e-12);
}

TEST(Report, AggregatesAndDeterminism) {
  const auto all = gen_twolink_arm(600, 0);
  const auto [train, test] = split(all, 0.25, 0);
  FitConfig c;
  c.restarts = 1;
  c.seed = 4;
  const auto model = fit(train, default_hyperparams(6, 7, 2, 8, 1.0), c);
  const auto a = report(model, test);
  const auto b = report(model, test);
  EXPECT_EQ(a.to_json(), b.to_json());
  EXPECT_NEAR(a.mean_nmse, 0.5 * (a.nmse(0) + a.nmse(1)), 1e-12);
  EXPECT_NEAR(a.mean_mse, 0.5 * (a.mse(0) + a.mse(1)), 1e-12);
  EXPECT_EQ(a.seed, 4u);
  EXPECT_TRUE(std::isfinite(a.mean_log_density));

  const auto j = nlohmann::json::parse(a.to_json());
  EXPECT_EQ(j.at("n_test").get<std::size_t>(), test.size());
  EXPECT_EQ(j.at("nmse").size(), 2u);
  EXPECT_NE(a.to_table().find("NMSE"), std::string::npos);
}

TEST(Report, DimensionMismatchIsDataError) {
  const auto train = linear_data(50, 4);
  FitConfig c;
  c.restarts = 1;
  const auto model = fit(train, default_hyperparams(1, 2, 2, 2, 1.0), c);
  EXPECT_THROW(report(model, gen_sinc_hetero(20, 0)), DataError);
}

}  // namespace
