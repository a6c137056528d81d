#include "ilr/vbem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include "ilr/dist.hpp"
#include "ilr/error.hpp"
#include "ilr/predict.hpp"
#include "kmeans.hpp"

namespace ilr {

std::string to_string(InitKind kind) { return kind == InitKind::kmeans ? "kmeans" : "random"; }

InitKind parse_init_kind(std::string_view name) {
  if (name == "kmeans") return InitKind::kmeans;
  if (name == "random") return InitKind::random;
  throw ArgumentError("unknown init kind '" + std::string(name) + "'");
}

void FitConfig::validate() const {
  if (max_iters < 1) throw ArgumentError("max_iters must be >= 1");
  if (!(elbo_rel_tol > 0.0)) throw ArgumentError("elbo_rel_tol must be positive");
  if (restarts < 1) throw ArgumentError("restarts must be >= 1");
  if (minibatch > 0) {
    if (!(kappa > 0.5 && kappa <= 1.0)) throw ArgumentError("kappa must lie in (0.5, 1]");
    if (!(tau >= 0.0)) throw ArgumentError("tau must be non-negative");
  }
}

Design Design::build(const Dataset& data, const FeatureMap& map,
                     const Standardizer& standardizer) {
  data.validate();
  if (data.input_dim() != standardizer.input_dim() ||
      data.output_dim() != standardizer.output_dim()) {
    throw DataError("data dimensions do not match the model (" +
                    std::to_string(data.input_dim()) + " inputs, " +
                    std::to_string(data.output_dim()) + " targets)");
  }
  Design d;
  d.gate = standardizer.transform_inputs(data.inputs);
  d.features = map.apply_rows(d.gate);
  d.targets = standardizer.transform_targets(data.targets);
  return d;
}

VectorXd expected_log_weights(std::span<const ComponentPosterior> components,
                              GatingPrior kind) {
  const auto k_max = static_cast<Eigen::Index>(components.size());
  VectorXd out(k_max);
  if (kind == GatingPrior::finite_dirichlet) {
    double total = 0.0;
    for (const auto& c : components) total += c.dirichlet;
    const double psi_total = dist::digamma(total);
    for (Eigen::Index k = 0; k < k_max; ++k) {
      out(k) = dist::digamma(components[k].dirichlet) - psi_total;
    }
    return out;
  }
  double rest = 0.0;  // sum_{j<k} E[log(1 - v_j)]
  for (Eigen::Index k = 0; k < k_max; ++k) {
    const auto& stick = components[k].stick;
    if (stick) {
      const auto [log_v, log_1mv] = dist::expected_log_stick(*stick);
      out(k) = log_v + rest;
      rest += log_1mv;
    } else {
      out(k) = rest;  // pinned stick, v = 1
    }
  }
  return out;
}

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void check_design(const MixturePosterior& model, const MatrixXd& gate, const MatrixXd& features,
                  const MatrixXd& targets) {
  if (gate.rows() != features.rows() || gate.rows() != targets.rows()) {
    throw ArgumentError("gating, feature and target row counts differ");
  }
  if (gate.cols() != model.hyper.input_dim() || features.cols() != model.hyper.feature_dim() ||
      targets.cols() != model.hyper.output_dim()) {
    throw ArgumentError("data dimensions do not match the model");
  }
  if (!gate.allFinite() || !features.allFinite() || !targets.allFinite()) {
    throw DataError("non-finite values in data");
  }
}

Eigen::LLT<MatrixXd> factor_or_throw(const MatrixXd& m, const char* what, std::size_t k) {
  try {
    return dist::spd_factor(m, what);
  } catch (const DecompositionError& e) {
    throw InternalInvariantError(std::string(e.what()) + " in component " + std::to_string(k),
                                 static_cast<std::ptrdiff_t>(k));
  }
}

MatrixXd inverse_or_throw(const MatrixXd& m, const char* what, std::size_t k) {
  const auto llt = factor_or_throw(m, what, k);
  MatrixXd inv = llt.solve(MatrixXd::Identity(m.rows(), m.cols()));
  return 0.5 * (inv + inv.transpose());
}

void normalize_rows(MatrixXd& log_r) {
  for (Eigen::Index n = 0; n < log_r.rows(); ++n) {
    const double top = log_r.row(n).maxCoeff();
    auto row = log_r.row(n);
    row.array() = (row.array() - top).exp();
    row /= row.sum();
  }
}

std::mt19937_64 restart_rng(std::uint64_t seed, int restart) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(restart)};
  return std::mt19937_64(seq);
}

Responsibilities one_hot(const std::vector<int>& labels, Eigen::Index k_max) {
  Responsibilities resp{MatrixXd::Zero(static_cast<Eigen::Index>(labels.size()), k_max)};
  for (std::size_t n = 0; n < labels.size(); ++n) {
    resp.r(static_cast<Eigen::Index>(n), labels[n]) = 1.0;
  }
  return resp;
}

Responsibilities random_rows(Eigen::Index n, Eigen::Index k_max, std::mt19937_64& rng) {
  std::exponential_distribution<double> expo(1.0);
  Responsibilities resp{MatrixXd(n, k_max)};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < k_max; ++k) resp.r(i, k) = expo(rng);
    resp.r.row(i) /= resp.r.row(i).sum();
  }
  return resp;
}

Responsibilities initialize(const Design& design, Eigen::Index k_max, InitKind kind,
                            std::mt19937_64& rng) {
  if (kind == InitKind::random) return random_rows(design.size(), k_max, rng);
  return one_hot(detail::kmeans(design.gate, static_cast<int>(k_max), rng), k_max);
}

struct Setup {
  FeatureMap map;
  Standardizer standardizer;
  Design design;
};

Setup prepare(const Dataset& data, const Hyperparams& hyper, const FitConfig& config) {
  config.validate();
  hyper.validate();
  data.validate();
  if (data.empty()) throw ArgumentError("cannot fit an empty dataset");
  if (data.input_dim() != hyper.input_dim() || data.output_dim() != hyper.output_dim()) {
    throw DataError("dataset dimensions (" + std::to_string(data.input_dim()) + ", " +
                    std::to_string(data.output_dim()) +
                    ") do not match the hyperparameters (" + std::to_string(hyper.input_dim()) +
                    ", " + std::to_string(hyper.output_dim()) + ")");
  }
  Setup s;
  s.map = config.features.value_or(FeatureMap::affine(hyper.input_dim()));
  if (s.map.input_dim() != hyper.input_dim() || s.map.output_dim() != hyper.feature_dim()) {
    throw ArgumentError("feature map output dim " + std::to_string(s.map.output_dim()) +
                        " does not match hyperparameter feature dim " +
                        std::to_string(hyper.feature_dim()));
  }
  s.standardizer = config.standardizer.value_or(Standardizer::fit(data.inputs, data.targets));
  s.design = Design::build(data, s.map, s.standardizer);
  return s;
}

// Sorting components by decreasing occupancy moves unused sticks to the end of
// the stick-breaking order. Only valid when all components share one prior.
// Returns false when the order is already sorted.
bool sort_by_occupancy(SufficientStats& stats, MatrixXd& r) {
  const auto k_max = stats.components.size();
  std::vector<std::size_t> order(k_max);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return stats.components[a].n > stats.components[b].n;
  });
  if (std::is_sorted(order.begin(), order.end())) return false;
  SufficientStats sorted;
  MatrixXd r_sorted(r.rows(), r.cols());
  for (std::size_t k = 0; k < k_max; ++k) {
    sorted.components.push_back(stats.components[order[k]]);
    r_sorted.col(static_cast<Eigen::Index>(k)) = r.col(static_cast<Eigen::Index>(order[k]));
  }
  double tail = 0.0;
  for (std::size_t k = k_max; k-- > 0;) {
    sorted.components[k].tail = tail;
    tail += sorted.components[k].n;
  }
  stats = std::move(sorted);
  r = std::move(r_sorted);
  return true;
}

// Full-batch VBEM loop starting with an M-step on the given responsibilities.
MixturePosterior run_vbem(const Design& design, std::span<const ComponentPosterior> priors,
                          MixturePosterior model, const Responsibilities& init,
                          const FitConfig& config, bool relabel) {
  const auto kind = model.hyper.gating_prior;
  relabel = relabel && kind == GatingPrior::stick_breaking;
  Responsibilities resp = init;
  auto stats = accumulate_stats(design.gate, design.features, design.targets, resp);

  // M-step, then optionally the occupancy-sorted relabelling if it does not
  // lower the bound.
  const auto update = [&]() {
    model.components = m_step(stats, priors, kind);
    double value = elbo(model, priors, stats, resp);
    if (!relabel) return value;
    auto sorted_stats = stats;
    Responsibilities sorted_resp = resp;
    if (!sort_by_occupancy(sorted_stats, sorted_resp.r)) return value;
    auto candidate = model;
    candidate.components = m_step(sorted_stats, priors, kind);
    const double sorted_value = elbo(candidate, priors, sorted_stats, sorted_resp);
    if (sorted_value >= value) {
      model = std::move(candidate);
      stats = std::move(sorted_stats);
      resp = std::move(sorted_resp);
      value = sorted_value;
    }
    return value;
  };

  double previous = update();
  if (config.on_iteration) config.on_iteration(0, previous);

  int iter = 0;
  while (iter < config.max_iters) {
    ++iter;
    resp = e_step(model, design.gate, design.features, design.targets, config.trace_only_estep);
    stats = accumulate_stats(design.gate, design.features, design.targets, resp);
    const double current = update();
    if (config.on_iteration) config.on_iteration(iter, current);
    const bool converged =
        std::abs(current - previous) <= config.elbo_rel_tol * std::abs(previous);
    previous = current;
    if (converged) break;
  }
  model.fit_meta.iterations = iter;
  model.fit_meta.elbo = previous;
  return model;
}

void blend(SufficientStats& acc, const SufficientStats& update, double rho) {
  for (std::size_t k = 0; k < acc.components.size(); ++k) {
    auto& a = acc.components[k];
    const auto& u = update.components[k];
    a.n = (1.0 - rho) * a.n + rho * u.n;
    a.sum_x = (1.0 - rho) * a.sum_x + rho * u.sum_x;
    a.sum_xx = (1.0 - rho) * a.sum_xx + rho * u.sum_xx;
    a.sum_ff = (1.0 - rho) * a.sum_ff + rho * u.sum_ff;
    a.sum_yf = (1.0 - rho) * a.sum_yf + rho * u.sum_yf;
    a.sum_yy = (1.0 - rho) * a.sum_yy + rho * u.sum_yy;
    a.tail = (1.0 - rho) * a.tail + rho * u.tail;
  }
}

Design rows_of(const Design& design, const std::vector<Eigen::Index>& rows) {
  Design out;
  const auto m = static_cast<Eigen::Index>(rows.size());
  out.gate.resize(m, design.gate.cols());
  out.features.resize(m, design.features.cols());
  out.targets.resize(m, design.targets.cols());
  for (Eigen::Index i = 0; i < m; ++i) {
    out.gate.row(i) = design.gate.row(rows[i]);
    out.features.row(i) = design.features.row(rows[i]);
    out.targets.row(i) = design.targets.row(rows[i]);
  }
  return out;
}

}  // namespace

MatrixXd log_responsibilities(const MixturePosterior& model, const MatrixXd& gate,
                              const MatrixXd& features, const MatrixXd& targets,
                              bool trace_only_estep) {
  check_design(model, gate, features, targets);
  const auto n = gate.rows();
  const auto k_max = static_cast<Eigen::Index>(model.components.size());
  const double p = model.hyper.input_dim();
  const double d = model.hyper.output_dim();
  const double feature_coeff = trace_only_estep ? 1.0 : d;
  const VectorXd log_weights = expected_log_weights(model.components, model.hyper.gating_prior);
  const MatrixXd features_t = features.transpose();

  MatrixXd log_r(n, k_max);
  for (Eigen::Index k = 0; k < k_max; ++k) {
    const auto& c = model.components[static_cast<std::size_t>(k)];
    const auto uk = static_cast<std::size_t>(k);
    const auto gate_llt = factor_or_throw(c.gating.scale_matrix, "gating scale matrix", uk);
    const auto col_llt = factor_or_throw(c.expert.col_precision, "column precision", uk);
    const auto out_llt = factor_or_throw(c.expert.scale_matrix, "output scale matrix", uk);

    const double e_log_det_gate = dist::expected_log_det_wishart(c.gating.scale_matrix, c.gating.dof);
    const double e_log_det_out = dist::expected_log_det_wishart(c.expert.scale_matrix, c.expert.dof);
    const double constant = log_weights(k) + 0.5 * e_log_det_gate + 0.5 * e_log_det_out -
                            0.5 * p / c.gating.scale - 0.5 * (p + d) * kLog2Pi;

    const MatrixXd gate_diff = gate.rowwise() - c.gating.mean.transpose();
    const VectorXd gate_quad = (gate_diff * MatrixXd(gate_llt.matrixL())).rowwise().squaredNorm();
    const VectorXd feat_quad =
        col_llt.matrixL().solve(features_t).colwise().squaredNorm().transpose();
    const MatrixXd resid = targets - features * c.expert.mean.transpose();
    const VectorXd out_quad = (resid * MatrixXd(out_llt.matrixL())).rowwise().squaredNorm();

    log_r.col(k) = (constant - 0.5 * c.gating.dof * gate_quad.array() -
                    0.5 * feature_coeff * feat_quad.array() -
                    0.5 * c.expert.dof * out_quad.array())
                       .matrix();
  }
  return log_r;
}

Responsibilities e_step(const MixturePosterior& model, const MatrixXd& gate,
                        const MatrixXd& features, const MatrixXd& targets,
                        bool trace_only_estep) {
  Responsibilities resp{log_responsibilities(model, gate, features, targets, trace_only_estep)};
  normalize_rows(resp.r);
  return resp;
}

SufficientStats accumulate_stats(const MatrixXd& gate, const MatrixXd& features,
                                 const MatrixXd& targets, const Responsibilities& resp) {
  if (resp.r.rows() != gate.rows() || gate.rows() != features.rows() ||
      gate.rows() != targets.rows()) {
    throw ArgumentError("responsibility and data row counts differ");
  }
  const auto k_max = resp.r.cols();
  SufficientStats stats;
  stats.components.resize(static_cast<std::size_t>(k_max));
  for (Eigen::Index k = 0; k < k_max; ++k) {
    auto& s = stats.components[static_cast<std::size_t>(k)];
    const auto w = resp.r.col(k);
    s.n = w.sum();
    s.sum_x = gate.transpose() * w;
    const MatrixXd gate_w = gate.array().colwise() * w.array();
    const MatrixXd feat_w = features.array().colwise() * w.array();
    s.sum_xx = gate_w.transpose() * gate;
    s.sum_ff = feat_w.transpose() * features;
    s.sum_yf = targets.transpose() * feat_w;
    s.sum_yy = (targets.array().colwise() * w.array()).matrix().transpose() * targets;
  }
  double tail = 0.0;
  for (Eigen::Index k = k_max - 1; k >= 0; --k) {
    auto& s = stats.components[static_cast<std::size_t>(k)];
    s.tail = tail;
    tail += s.n;
  }
  return stats;
}

std::vector<ComponentPosterior> m_step(const SufficientStats& stats,
                                       std::span<const ComponentPosterior> priors,
                                       GatingPrior kind) {
  if (stats.components.size() != priors.size()) {
    throw ArgumentError("m_step: statistics and priors have different component counts");
  }
  std::vector<ComponentPosterior> out(priors.size());
  for (std::size_t k = 0; k < priors.size(); ++k) {
    const auto& prior = priors[k];
    const auto& s = stats.components[k];
    auto& post = out[k];
    post.occupancy = prior.occupancy + s.n;
    if (kind == GatingPrior::stick_breaking) {
      if (prior.stick) post.stick = BetaParams{prior.stick->a + s.n, prior.stick->b + s.tail};
    } else {
      post.dirichlet = prior.dirichlet + s.n;
    }
    if (s.n < kEmptyMass) {
      post.gating = prior.gating;
      post.expert = prior.expert;
      continue;
    }

    // Gating: Normal-Wishart update.
    const auto& g0 = prior.gating;
    auto& g = post.gating;
    g.scale = g0.scale + s.n;
    g.mean = (s.sum_x + g0.scale * g0.mean) / g.scale;
    g.dof = g0.dof + s.n;
    const VectorXd xbar = s.sum_x / s.n;
    const VectorXd shift = xbar - g0.mean;
    const MatrixXd scatter_n = s.sum_xx - s.sum_x * xbar.transpose();  // N_k S_k
    const MatrixXd inv_scale = inverse_or_throw(g0.scale_matrix, "prior gating scale matrix", k) +
                               scatter_n +
                               (g0.scale * s.n / (g0.scale + s.n)) * shift * shift.transpose();
    g.scale_matrix = inverse_or_throw(inv_scale, "gating scale matrix", k);

    // Expert: Matrix-Normal-Wishart update.
    const auto& e0 = prior.expert;
    auto& e = post.expert;
    e.col_precision = e0.col_precision + s.sum_ff;
    e.col_precision = 0.5 * (e.col_precision + e.col_precision.transpose());
    const auto col_llt = factor_or_throw(e.col_precision, "column precision", k);
    const MatrixXd rhs = s.sum_yf + e0.mean * e0.col_precision;  // d x m_f
    e.mean = col_llt.solve(rhs.transpose()).transpose();
    e.dof = e0.dof + s.n;
    const MatrixXd inv_out = inverse_or_throw(e0.scale_matrix, "prior output scale matrix", k) +
                             e0.mean * e0.col_precision * e0.mean.transpose() + s.sum_yy -
                             rhs * e.mean.transpose();
    e.scale_matrix = inverse_or_throw(inv_out, "output scale matrix", k);
  }
  return out;
}

std::vector<ComponentPosterior> m_step(const SufficientStats& stats, const Hyperparams& hyper) {
  const auto priors = prior_components(hyper);
  return m_step(stats, priors, hyper.gating_prior);
}

double elbo(const MixturePosterior& model, std::span<const ComponentPosterior> priors,
            const SufficientStats& stats, const Responsibilities& resp) {
  const auto k_max = model.components.size();
  if (priors.size() != k_max || stats.components.size() != k_max ||
      static_cast<std::size_t>(resp.r.cols()) != k_max) {
    throw ArgumentError("elbo: component counts differ");
  }
  const auto kind = model.hyper.gating_prior;
  const double p = model.hyper.input_dim();
  const double d = model.hyper.output_dim();
  const VectorXd log_weights = expected_log_weights(model.components, kind);

  double total = 0.0;
  for (std::size_t k = 0; k < k_max; ++k) {
    const auto& c = model.components[k];
    const auto& s = stats.components[k];
    const auto& g = c.gating;
    const auto& e = c.expert;

    // sum_n r_nk E[log N(x_n | mu_k, Sigma_k^-1)]
    const double gate_quad = (g.scale_matrix * s.sum_xx).trace() -
                             2.0 * g.mean.dot(g.scale_matrix * s.sum_x) +
                             s.n * g.mean.dot(g.scale_matrix * g.mean);
    const double e_gate = s.n * (0.5 * dist::expected_log_det_wishart(g.scale_matrix, g.dof) -
                                 0.5 * p * kLog2Pi - 0.5 * p / g.scale) -
                          0.5 * g.dof * gate_quad;

    // sum_n r_nk E[log N(y_n | A_k X_n, V_k^-1)]
    const auto col_llt = factor_or_throw(e.col_precision, "column precision", k);
    const double feat_quad = col_llt.solve(s.sum_ff).trace();
    const double out_quad = (e.scale_matrix * s.sum_yy).trace() -
                            2.0 * (e.scale_matrix * e.mean * s.sum_yf.transpose()).trace() +
                            (e.mean.transpose() * e.scale_matrix * e.mean * s.sum_ff).trace();
    const double e_out = s.n * (0.5 * dist::expected_log_det_wishart(e.scale_matrix, e.dof) -
                                0.5 * d * kLog2Pi) -
                         0.5 * d * feat_quad - 0.5 * e.dof * out_quad;

    total += e_gate + e_out + s.n * log_weights(static_cast<Eigen::Index>(k));
    total -= dist::kl_normal_wishart(g, priors[k].gating);
    total -= dist::kl_matrix_normal_wishart(e, priors[k].expert);
    if (kind == GatingPrior::stick_breaking && c.stick) {
      if (!priors[k].stick) throw ArgumentError("elbo: prior is missing a stick");
      total -= dist::kl_beta(*c.stick, *priors[k].stick);
    }
  }
  if (kind == GatingPrior::finite_dirichlet) {
    std::vector<double> q(k_max);
    std::vector<double> p0(k_max);
    for (std::size_t k = 0; k < k_max; ++k) {
      q[k] = model.components[k].dirichlet;
      p0[k] = priors[k].dirichlet;
    }
    total -= dist::kl_dirichlet(q, p0);
  }

  // Entropy of q(z).
  const auto& r = resp.r;
  double entropy = 0.0;
  for (Eigen::Index j = 0; j < r.cols(); ++j) {
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
      const double v = r(i, j);
      if (v > 0.0) entropy -= v * std::log(v);
    }
  }
  return total + entropy;
}

double elbo(const MixturePosterior& model, const SufficientStats& stats,
            const Responsibilities& resp) {
  const auto priors = prior_components(model.hyper);
  return elbo(model, priors, stats, resp);
}

MixturePosterior fit_from(const Dataset& data, const Hyperparams& hyper, const FitConfig& config,
                          const Responsibilities& init) {
  const auto setup = prepare(data, hyper, config);
  if (init.r.rows() != setup.design.size() || init.r.cols() != hyper.max_components) {
    throw ArgumentError("initial responsibilities have the wrong shape");
  }
  const auto priors = prior_components(hyper);
  auto model = MixturePosterior::from_prior(hyper, setup.map, setup.standardizer);
  model = run_vbem(setup.design, priors, std::move(model), init, config, true);
  model.fit_meta.seed = config.seed;
  return model;
}

MixturePosterior fit(const Dataset& data, const Hyperparams& hyper, const FitConfig& config) {
  if (config.minibatch > 0) return fit_minibatch(data, hyper, config);
  const auto setup = prepare(data, hyper, config);
  const auto priors = prior_components(hyper);
  const auto base = MixturePosterior::from_prior(hyper, setup.map, setup.standardizer);

  std::optional<MixturePosterior> best;
  for (int restart = 0; restart < config.restarts; ++restart) {
    auto rng = restart_rng(config.seed, restart);
    const auto init = initialize(setup.design, hyper.max_components, config.init, rng);
    auto model = run_vbem(setup.design, priors, base, init, config, true);
    if (!best || model.fit_meta.elbo > best->fit_meta.elbo) best = std::move(model);
  }
  best->fit_meta.seed = config.seed;
  return *best;
}

MixturePosterior fit_minibatch(const Dataset& data, const Hyperparams& hyper,
                               const FitConfig& config) {
  if (config.minibatch == 0) throw ArgumentError("fit_minibatch requires minibatch > 0");
  const auto setup = prepare(data, hyper, config);
  const auto& design = setup.design;
  const auto n = static_cast<std::size_t>(design.size());
  if (config.minibatch > n) {
    throw ArgumentError("minibatch size " + std::to_string(config.minibatch) +
                        " exceeds dataset size " + std::to_string(n));
  }
  const auto priors = prior_components(hyper);
  const auto kind = hyper.gating_prior;
  const auto base = MixturePosterior::from_prior(hyper, setup.map, setup.standardizer);
  const double scale = static_cast<double>(n) / static_cast<double>(config.minibatch);

  std::optional<MixturePosterior> best;
  for (int restart = 0; restart < config.restarts; ++restart) {
    auto rng = restart_rng(config.seed, restart);
    const auto init = initialize(design, hyper.max_components, config.init, rng);
    auto model = base;
    auto stats = accumulate_stats(design.gate, design.features, design.targets, init);
    model.components = m_step(stats, priors, kind);

    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    for (int t = 0; t < config.max_iters; ++t) {
      std::vector<Eigen::Index> rows;
      if (config.minibatch == n) {
        rows = order;
      } else {
        // Partial Fisher-Yates: the first M entries are a uniform sample.
        for (std::size_t i = 0; i < config.minibatch; ++i) {
          std::uniform_int_distribution<std::size_t> pick(i, n - 1);
          std::swap(order[i], order[pick(rng)]);
        }
        rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(config.minibatch));
        std::sort(rows.begin(), rows.end());
      }
      const auto batch = rows_of(design, rows);
      const auto resp =
          e_step(model, batch.gate, batch.features, batch.targets, config.trace_only_estep);
      const auto update =
          accumulate_stats(batch.gate, batch.features, batch.targets, resp).scaled(scale);
      const double rho = std::pow(static_cast<double>(t) + config.tau, -config.kappa);
      blend(stats, update, std::min(rho, 1.0));
      model.components = m_step(stats, priors, kind);
      if (config.on_iteration) config.on_iteration(t + 1, std::numeric_limits<double>::quiet_NaN());
    }

    const auto resp =
        e_step(model, design.gate, design.features, design.targets, config.trace_only_estep);
    const auto full = accumulate_stats(design.gate, design.features, design.targets, resp);
    model.fit_meta.iterations = config.max_iters;
    model.fit_meta.elbo = elbo(model, priors, full, resp);
    if (!best || model.fit_meta.elbo > best->fit_meta.elbo) best = std::move(model);
  }
  best->fit_meta.seed = config.seed;
  return *best;
}

MixturePosterior sequential_update(const MixturePosterior& model, const Dataset& batch,
                                   const FitConfig& config) {
  config.validate();
  if (batch.empty()) return model;
  if (batch.input_dim() != model.hyper.input_dim() ||
      batch.output_dim() != model.hyper.output_dim()) {
    throw DataError("batch dimensions (" + std::to_string(batch.input_dim()) + ", " +
                    std::to_string(batch.output_dim()) + ") do not match the model (" +
                    std::to_string(model.hyper.input_dim()) + ", " +
                    std::to_string(model.hyper.output_dim()) + ")");
  }
  const auto design = Design::build(batch, model.feature_map, model.standardizer);
  std::vector<ComponentPosterior> priors = model.components;

  // Start from each point's posterior predictive assignment under the previous
  // model. Expected log-likelihoods would charge unused components for their
  // broad priors and never hand them data. Mass landing on components that
  // carried no data is split among them by clustering the new batch.
  Responsibilities previous{MatrixXd(design.size(), static_cast<Eigen::Index>(model.size()))};
  {
    const Predictor predictor(model);
    for (Eigen::Index n = 0; n < design.size(); ++n) {
      VectorXd row = predictor.component_log_joint(batch.inputs.row(n).transpose(),
                                                   batch.targets.row(n).transpose());
      row = (row.array() - row.maxCoeff()).exp();
      previous.r.row(n) = (row / row.sum()).transpose();
    }
  }
  std::vector<Eigen::Index> fresh;
  for (std::size_t k = 0; k < model.components.size(); ++k) {
    if (model.components[k].occupancy < 1.0) fresh.push_back(static_cast<Eigen::Index>(k));
  }
  const int runs = fresh.size() > 1 ? config.restarts : 1;

  auto base = model;
  base.components = priors;
  std::optional<MixturePosterior> best;
  for (int restart = 0; restart < runs; ++restart) {
    auto init = previous;
    if (fresh.size() > 1) {
      auto rng = restart_rng(config.seed, restart);
      const auto k_fresh = static_cast<Eigen::Index>(fresh.size());
      const auto split = initialize(design, k_fresh, config.init, rng);
      for (Eigen::Index n = 0; n < design.size(); ++n) {
        double mass = 0.0;
        for (auto k : fresh) mass += previous.r(n, k);
        for (Eigen::Index j = 0; j < k_fresh; ++j) init.r(n, fresh[j]) = mass * split.r(n, j);
      }
    }
    auto fitted = run_vbem(design, priors, base, init, config, false);
    if (!best || fitted.fit_meta.elbo > best->fit_meta.elbo) best = std::move(fitted);
  }
  best->fit_meta.seed = config.seed;
  return *best;
}

}  // namespace ilr
