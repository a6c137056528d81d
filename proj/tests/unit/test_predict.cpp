#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "ilr/metrics.hpp"
#include "ilr/predict.hpp"
#include "ilr/vbem.hpp"
#include "oracles.hpp"

namespace {

using namespace ilr;

MixturePosterior small_sinc_model(int k_max, std::uint64_t seed) {
  auto h = default_hyperparams(1, 2, 1, k_max, 1.0);
  FitConfig c;
  c.restarts = 1;
  c.seed = seed;
  return fit(gen_sinc_hetero(400, seed), h, c);
}

// Randomized posterior with every component away from the prior.
MixturePosterior random_model(int mx, int d, int k_max, std::mt19937_64& rng) {
  auto h = default_hyperparams(mx, mx + 1, d, k_max, 1.0);
  Standardizer s = Standardizer::identity(mx, d);
  s.x_mean = oracle::random_matrix(mx, 1, rng);
  s.y_mean = oracle::random_matrix(d, 1, rng);
  s.x_std = s.x_mean.cwiseAbs().array() + 0.5;
  s.y_std = s.y_mean.cwiseAbs().array() + 0.5;
  auto model = MixturePosterior::from_prior(h, FeatureMap::affine(mx), s);
  std::uniform_real_distribution<double> u(0.5, 5.0);
  for (auto& c : model.components) {
    if (c.stick) c.stick = BetaParams{u(rng), u(rng)};
    c.gating.mean = oracle::random_matrix(mx, 1, rng);
    c.gating.scale = u(rng);
    c.gating.scale_matrix = oracle::random_spd(mx, rng);
    c.gating.dof = mx + u(rng);
    c.expert.mean = oracle::random_matrix(d, mx + 1, rng);
    c.expert.col_precision = oracle::random_spd(mx + 1, rng);
    c.expert.scale_matrix = oracle::random_spd(d, rng);
    c.expert.dof = d + 1 + u(rng);
    c.occupancy = u(rng);
  }
  return model;
}

double min_eigenvalue(const MatrixXd& m) {
  return Eigen::SelfAdjointEigenSolver<MatrixXd>(0.5 * (m + m.transpose())).eigenvalues().minCoeff();
}

TEST(Predict, WeightsAreSimplexAndCovarianceSpd) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 3.0);
  for (int trial = 0; trial < 30; ++trial) {
    const int mx = 1 + trial % 3;
    const int d = 1 + trial % 2;
    const auto model = random_model(mx, d, 2 + trial % 5, rng);
    const Predictor p(model);
    for (int q = 0; q < 20; ++q) {
      VectorXd x(mx);
      for (int j = 0; j < mx; ++j) x(j) = g(rng);
      const auto res = p.predict(x);
      EXPECT_GE(res.weights.minCoeff(), 0.0);
      EXPECT_NEAR(res.weights.sum(), 1.0, 1e-10);
      EXPECT_GT(min_eigenvalue(res.covariance), 0.0);
      EXPECT_FALSE(res.log_density.has_value());
    }
  }
}

TEST(Predict, CovarianceIsLawOfTotalVariance) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    const int mx = 1 + trial % 2;
    const int d = 1 + trial % 3;
    const auto model = random_model(mx, d, 4, rng);
    VectorXd x(mx);
    for (int j = 0; j < mx; ++j) x(j) = g(rng);
    const auto res = predict(model, x);

    // Student-t component covariances in standardized units, rescaled.
    const VectorXd z = model.standardizer.transform_input(x);
    const VectorXd f = model.feature_map.apply(z);
    const MatrixXd scale = model.standardizer.y_std.asDiagonal();
    MatrixXd within = MatrixXd::Zero(d, d);
    MatrixXd between = MatrixXd::Zero(d, d);
    for (std::size_t k = 0; k < model.size(); ++k) {
      const auto& e = model.components[k].expert;
      const double dof = e.dof - d + 1;
      const double q = f.dot(e.col_precision.inverse() * f);
      const MatrixXd cov = scale * ((1.0 + q) / (dof - 2.0) * e.scale_matrix.inverse()) * scale;
      const double w = res.weights(static_cast<Eigen::Index>(k));
      within += w * cov;
      const VectorXd dev = res.component_means.row(static_cast<Eigen::Index>(k)).transpose() - res.mean;
      between += w * dev * dev.transpose();
    }
    EXPECT_GE(min_eigenvalue(res.covariance - within), -1e-10);
    EXPECT_LE((res.covariance - within - between).cwiseAbs().maxCoeff(),
              1e-9 * res.covariance.cwiseAbs().maxCoeff());
  }
}

TEST(Predict, ModeIsMeanOfTopComponent) {
  std::mt19937_64 rng(3);
  const auto model = random_model(2, 2, 5, rng);
  const auto res = predict(model, VectorXd::Constant(2, 0.3));
  Eigen::Index top = 0;
  res.weights.maxCoeff(&top);
  EXPECT_LE((res.mode - res.component_means.row(top).transpose()).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE((res.mean - res.component_means.transpose() * res.weights).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Predict, ZeroDataModelGivesPriorPredictive) {
  auto h = default_hyperparams(2, 3, 1, 6, 1.0);
  Standardizer s = Standardizer::identity(2, 1);
  s.x_mean << 1.0, -2.0;
  s.x_std << 2.0, 0.5;
  s.y_mean << 3.0;
  s.y_std << 4.0;
  const auto model = MixturePosterior::from_prior(h, FeatureMap::affine(2), s);
  const VectorXd x = (VectorXd(2) << 2.5, -1.0).finished();
  const auto res = predict(model, x);
  const VectorXd z = s.transform_input(x);
  const VectorXd f = (VectorXd(3) << z, 1.0).finished();
  const double dof = h.expert.dof - 1 + 1;
  const double q = f.dot(h.expert.col_precision.inverse() * f);
  const double var = (1.0 + q) / (dof - 2.0) / h.expert.scale_matrix(0, 0);
  EXPECT_NEAR(res.mean(0), s.y_mean(0) + s.y_std(0) * (h.expert.mean * f)(0), 1e-12);
  EXPECT_NEAR(res.stddev()(0), s.y_std(0) * std::sqrt(var), 1e-9);
}

TEST(Predict, DominantComponentOwnsItsGatingMean) {
  auto h = default_hyperparams(1, 2, 1, 4, 1.0);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 0.1);
  const int n = 1000;
  MatrixXd x(n, 1), f(n, 2), y(n, 1);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = 2.0 + g(rng);
    f(i, 0) = x(i, 0);
    f(i, 1) = 1.0;
    y(i, 0) = 0.5 * x(i, 0) + g(rng);
  }
  Responsibilities r{MatrixXd::Zero(n, 4)};
  r.r.col(0).setOnes();
  r.r(0, 0) = 0.0;
  r.r(0, 1) = 1.0;
  auto model = MixturePosterior::from_prior(h, FeatureMap::affine(1), Standardizer::identity(1, 1));
  model.components = m_step(accumulate_stats(x, f, y, r), h);
  const auto w = gating_weights(model, model.components[0].gating.mean);
  EXPECT_GT(w(0), 0.99);
  EXPECT_NEAR(w.sum(), 1.0, 1e-10);
}

TEST(Predict, FarQueryFallsBackToPrior) {
  auto h = default_hyperparams(1, 2, 1, 20, 1.0);
  FitConfig c;
  c.restarts = 3;
  const auto data = gen_sine_gaps(500, 0);
  const auto model = fit(data, h, c);
  const Predictor p(model);
  double in_dist = 0.0;
  for (Eigen::Index i = 0; i < data.size(); ++i) in_dist += p.predict(data.inputs.row(i).transpose()).stddev()(0);
  in_dist /= static_cast<double>(data.size());
  const double sigma = model.standardizer.x_std(0);
  const VectorXd far = VectorXd::Constant(1, data.inputs.maxCoeff() + 12.0 * sigma);
  const auto res = p.predict(far);
  EXPECT_GT(res.stddev()(0), 3.0 * in_dist);
  // Prior-shaped components are the ones that saw no data.
  double prior_mass = 0.0;
  for (std::size_t k = 0; k < model.size(); ++k)
    if (model.components[k].occupancy < 1.0) prior_mass += res.weights(static_cast<Eigen::Index>(k));
  const double prior_share = [&] {
    const VectorXd e = model.expected_weights();
    double m = 0.0;
    for (std::size_t k = 0; k < model.size(); ++k)
      if (model.components[k].occupancy < 1.0) m += e(static_cast<Eigen::Index>(k));
    return m;
  }();
  EXPECT_GT(prior_mass, prior_share);
}

TEST(Predict, NoiselessLinearSingleComponent) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const int n = 1000;
  Dataset data;
  data.inputs = MatrixXd(n, 2);
  data.targets = MatrixXd(n, 1);
  const auto line = [](const VectorXd& x) { return 1.5 * x(0) - 0.7 * x(1) + 0.25; };
  for (int i = 0; i < n; ++i) {
    data.inputs.row(i) << u(rng), u(rng);
    data.targets(i, 0) = line(data.inputs.row(i).transpose());
  }
  FitConfig c;
  c.restarts = 1;
  const auto h = default_hyperparams(2, 3, 1, 1, 1.0);
  const auto model = fit(data, h, c);

  // Conjugate regression posterior on the standardized data.
  const auto& s = model.standardizer;
  const MatrixXd z = s.transform_inputs(data.inputs);
  MatrixXd f(n, 3);
  f << z, VectorXd::Ones(n);
  const auto post = oracle::regression_posterior(f, s.transform_targets(data.targets), h.expert.mean,
                                                 h.expert.col_precision, h.expert.scale_matrix,
                                                 h.expert.dof);
  for (int q = 0; q < 50; ++q) {
    const VectorXd x = (VectorXd(2) << u(rng), u(rng)).finished();
    const double mean = predict(model, x).mean(0);
    const VectorXd fx = (VectorXd(3) << s.transform_input(x), 1.0).finished();
    EXPECT_NEAR(mean, s.y_mean(0) + s.y_std(0) * (post.m * fx)(0), 1e-10);
    EXPECT_LT(std::abs(mean - line(x)), 1e-4);
  }
}

TEST(Predict, BatchOfOneMatchesSingle) {
  const auto model = small_sinc_model(8, 0);
  MatrixXd q(1, 1);
  q << 1.7;
  const auto batch = predict_batch(model, q);
  const auto one = predict(model, q.row(0).transpose());
  ASSERT_EQ(batch.size(), 1u);
  EXPECT_EQ(batch[0].mean, one.mean);
  EXPECT_EQ(batch[0].covariance, one.covariance);
  EXPECT_EQ(batch[0].weights, one.weights);
  EXPECT_EQ(batch[0].mode, one.mode);
}

TEST(Predict, LogDensityIntegratesToOne) {
  const auto model = small_sinc_model(10, 1);
  const Predictor p(model);
  for (double x : {-7.0, 0.0, 3.3, 25.0}) {
    const auto res = p.predict(VectorXd::Constant(1, x));
    const double sd = res.stddev()(0);
    const double lo = res.mean(0) - 60.0 * sd;
    const double hi = res.mean(0) + 60.0 * sd;
    const int steps = 200000;
    const double h = (hi - lo) / steps;
    double total = 0.0;
    for (int i = 0; i <= steps; ++i) {
      const double y = lo + i * h;
      const double w = (i == 0 || i == steps) ? 0.5 : 1.0;
      total += w * std::exp(*p.predict(VectorXd::Constant(1, x), VectorXd::Constant(1, y)).log_density);
    }
    EXPECT_NEAR(total * h, 1.0, 2e-3) << "x = " << x;
  }
}

// Marginalizes the Wishart precisions by sampling and compares with the
// closed-form Student-t predictives.
TEST(Predict, StudentTMarginalsMatchMonteCarlo) {
  std::mt19937_64 rng(6);
  const int mx = 2, d = 2;
  auto model = random_model(mx, d, 2, rng);
  model.standardizer = Standardizer::identity(mx, d);
  const VectorXd x = (VectorXd(2) << 0.4, -0.3).finished();
  const VectorXd y = (VectorXd(2) << 0.2, 0.9).finished();
  const VectorXd f = (VectorXd(3) << x, 1.0).finished();
  const int draws = 200000;

  VectorXd log_gate(2), log_out(2);
  for (int k = 0; k < 2; ++k) {
    const auto& c = model.components[static_cast<std::size_t>(k)];
    double gate = 0.0, out = 0.0;
    for (int s = 0; s < draws; ++s) {
      const MatrixXd sigma = oracle::sample_wishart(c.gating.scale_matrix, c.gating.dof, rng);
      const MatrixXd cov_x = (1.0 + 1.0 / c.gating.scale) * sigma.inverse();
      gate += std::exp(dist::gaussian_logpdf(x, c.gating.mean, cov_x));
      const MatrixXd v = oracle::sample_wishart(c.expert.scale_matrix, c.expert.dof, rng);
      const double q = f.dot(c.expert.col_precision.inverse() * f);
      out += std::exp(dist::gaussian_logpdf(y, c.expert.mean * f, (1.0 + q) * v.inverse()));
    }
    log_gate(k) = std::log(gate / draws);
    log_out(k) = std::log(out / draws);
  }
  const VectorXd e_pi = model.expected_weights();
  VectorXd w = (e_pi.array().log() + log_gate.array()).exp();
  w /= w.sum();
  const auto res = predict(model, x, y);
  EXPECT_NEAR(res.weights(0), w(0), 0.01);
  const double density = w(0) * std::exp(log_out(0)) + w(1) * std::exp(log_out(1));
  EXPECT_NEAR(std::exp(*res.log_density) / density, 1.0, 0.02);
}

TEST(Predict, PluginGatingIsAlsoSimplex) {
  const auto model = small_sinc_model(8, 2);
  for (double x : {-9.0, -1.0, 0.5, 40.0}) {
    const auto w = gating_weights(model, VectorXd::Constant(1, x), GatingMode::plugin);
    EXPECT_NEAR(w.sum(), 1.0, 1e-10);
    EXPECT_GE(w.minCoeff(), 0.0);
  }
  EXPECT_EQ(parse_gating_mode("plugin"), GatingMode::plugin);
  EXPECT_EQ(parse_gating_mode("student_t"), GatingMode::student_t);
}

TEST(Predict, ComponentLogJointOfIdenticalComponentsIsStickWeight) {
  auto h = default_hyperparams(1, 2, 1, 5, 1.0);
  const auto model =
      MixturePosterior::from_prior(h, FeatureMap::affine(1), Standardizer::identity(1, 1));
  const VectorXd lj =
      Predictor(model).component_log_joint(VectorXd::Constant(1, 0.7), VectorXd::Constant(1, -1.2));
  VectorXd w = (lj.array() - lj.maxCoeff()).exp();
  w /= w.sum();
  EXPECT_LE((w - model.expected_weights()).cwiseAbs().maxCoeff(), 1e-12);
}

}  // namespace
