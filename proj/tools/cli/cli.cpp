#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ilr/ilr.hpp"

namespace ilr::cli {

namespace {

struct HyperOptions {
  int mx = 1;
  int d = 1;
  int kmax = 50;
  double alpha = 1.0;
  std::string features = "affine";
  int degree = 2;
  std::string gating_prior = "stick_breaking";
  double dirichlet_alpha = 1.0;
  double lambda0 = 1e-2;
  double k0 = 1e-2;
  double eta0 = 0.0;  // 0 keeps the default d + 2

  void add_to(CLI::App& app) {
    app.add_option("--mx", mx, "Input dimension")->check(CLI::PositiveNumber);
    app.add_option("--d", d, "Output dimension")->check(CLI::PositiveNumber);
    app.add_option("--kmax", kmax, "Truncation level K_max")->check(CLI::PositiveNumber);
    app.add_option("--alpha", alpha, "Stick-breaking concentration");
    app.add_option("--features", features, "Expert features")
        ->check(CLI::IsMember({"affine", "polynomial"}));
    app.add_option("--degree", degree, "Polynomial degree (polynomial features)");
    app.add_option("--gating-prior", gating_prior, "Mixing prior")
        ->check(CLI::IsMember({"stick_breaking", "finite_dirichlet"}));
    app.add_option("--dirichlet-alpha", dirichlet_alpha, "Finite Dirichlet concentration");
    app.add_option("--lambda0", lambda0, "Gating mean precision scale");
    app.add_option("--k0", k0, "Expert column precision scale (K0 = k0 I)");
    app.add_option("--eta0", eta0, "Expert Wishart dof (0 = d + 2)");
  }

  FeatureMap feature_map() const {
    return features == "affine" ? FeatureMap::affine(mx) : FeatureMap::polynomial(mx, degree);
  }

  Hyperparams build() const {
    const FeatureMap map = feature_map();
    Hyperparams h = default_hyperparams(mx, map.output_dim(), d, kmax, alpha);
    h.gating.scale = lambda0;
    h.expert.col_precision = k0 * MatrixXd::Identity(map.output_dim(), map.output_dim());
    if (eta0 > 0.0) h.expert.dof = eta0;
    h.gating_prior = parse_gating_prior(gating_prior);
    h.dirichlet_alpha = dirichlet_alpha;
    h.validate();
    return h;
  }
};

struct FitOptions {
  int max_iters = 200;
  double tol = 1e-6;
  std::uint64_t seed = 0;
  std::string init = "kmeans";
  int restarts = 10;
  std::size_t minibatch = 0;
  double tau = 1.0;
  double kappa = 0.75;
  bool trace_only_estep = false;

  void add_to(CLI::App& app) {
    app.add_option("--max-iters", max_iters, "Maximum VBEM iterations");
    app.add_option("--tol", tol, "Relative ELBO tolerance");
    app.add_option("--seed", seed, "Random seed");
    app.add_option("--init", init, "Initialization")->check(CLI::IsMember({"kmeans", "random"}));
    app.add_option("--restarts", restarts, "Independent restarts");
    app.add_option("--minibatch", minibatch, "Minibatch size (0 = full batch)");
    app.add_option("--tau", tau, "Step size delay");
    app.add_option("--kappa", kappa, "Step size decay");
    app.add_flag("--trace-only-estep", trace_only_estep,
                 "Residual E-step term without the factor d");
  }

  FitConfig build(const HyperOptions& hyper) const {
    FitConfig c;
    c.max_iters = max_iters;
    c.elbo_rel_tol = tol;
    c.seed = seed;
    c.init = parse_init_kind(init);
    c.restarts = restarts;
    c.minibatch = minibatch;
    c.tau = tau;
    c.kappa = kappa;
    c.trace_only_estep = trace_only_estep;
    c.features = hyper.feature_map();
    c.validate();
    return c;
  }
};

std::string batch_path(const std::string& out, int b) {
  const std::filesystem::path p(out);
  std::filesystem::path name = p.stem();
  name += "_" + std::to_string(b) + p.extension().string();
  return (p.parent_path() / name).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw DataError("failed writing '" + path + "'");
}

std::string csv_row(const std::vector<double>& values) {
  std::string line;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) line += ',';
    line += format_double(values[i]);
  }
  return line + "\n";
}

std::string column_names(const std::string& stem, int d) {
  if (d == 1) return stem;
  std::string s;
  for (int j = 1; j <= d; ++j) s += (j > 1 ? "," : "") + stem + "_" + std::to_string(j);
  return s;
}

struct GenerateCmd {
  std::string dataset;
  int n = 1000;
  std::uint64_t seed = 0;
  std::string out;
  int batches = 1;
  double test_fraction = 0.2;
  std::string test_out;

  void add_to(CLI::App& app) {
    app.add_option("--dataset", dataset, "sine_gaps | sinc | step | cubic | arm | chirp")
        ->required()
        ->check(CLI::IsMember({"sine", "sine_gaps", "sinc", "step", "cubic", "arm", "chirp"}));
    app.add_option("--n", n, "Total number of samples")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "Random seed");
    app.add_option("--out", out, "Output CSV (batches go to <stem>_<b><ext>)")->required();
    app.add_option("--batches", batches, "Split into contiguous batches")
        ->check(CLI::PositiveNumber);
    app.add_option("--test-fraction", test_fraction, "Held-out fraction when --test-out is set");
    app.add_option("--test-out", test_out, "Also write a held-out split here");
  }

  int run(std::ostream& out_stream) const {
    if (batches > 1 && !test_out.empty()) {
      throw ArgumentError("--batches and --test-out cannot be combined");
    }
    std::vector<Dataset> parts;
    if (dataset == "chirp" && batches > 1) {
      parts = gen_chirp(batches, n / batches, seed);
    } else {
      const Dataset all = make_dataset(dataset, n, seed);
      if (batches == 1) {
        parts.push_back(all);
      } else {
        const Eigen::Index per = all.size() / batches;
        if (per < 1) throw ArgumentError("fewer samples than batches");
        for (int b = 0; b < batches; ++b) {
          const Eigen::Index end = b + 1 == batches ? all.size() : (b + 1) * per;
          std::vector<Eigen::Index> rows;
          for (Eigen::Index r = b * per; r < end; ++r) rows.push_back(r);
          parts.push_back(all.subset(rows));
        }
      }
    }
    if (parts.size() == 1) {
      if (!test_out.empty()) {
        const auto [train, test] = split(parts.front(), test_fraction, seed);
        save_csv(train, out);
        save_csv(test, test_out);
        out_stream << "wrote " << train.size() << " rows to " << out << ", " << test.size()
                   << " rows to " << test_out << "\n";
      } else {
        save_csv(parts.front(), out);
        out_stream << "wrote " << parts.front().size() << " rows to " << out << "\n";
      }
      return 0;
    }
    for (std::size_t b = 0; b < parts.size(); ++b) {
      const std::string path = batch_path(out, static_cast<int>(b) + 1);
      save_csv(parts[b], path);
      out_stream << "wrote " << parts[b].size() << " rows to " << path << "\n";
    }
    return 0;
  }
};

struct TrainCmd {
  std::string data;
  std::string out;
  std::string trace;
  HyperOptions hyper;
  FitOptions fit;

  void add_to(CLI::App& app) {
    app.add_option("--data", data, "Training CSV")->required();
    app.add_option("--out", out, "Model JSON")->required();
    app.add_option("--trace", trace, "Write the per-iteration ELBO as CSV");
    hyper.add_to(app);
    fit.add_to(app);
  }

  int run(std::ostream& out_stream) const {
    const Dataset train = load_csv(data, hyper.mx, hyper.d);
    if (train.empty()) throw DataError("'" + data + "' has no data rows");
    const Hyperparams h = hyper.build();
    FitConfig config = fit.build(hyper);
    std::string trace_text = "iteration,elbo\n";
    if (!trace.empty()) {
      config.restarts = 1;
      config.on_iteration = [&trace_text](int it, double value) {
        trace_text += std::to_string(it) + "," + format_double(value) + "\n";
      };
    }
    const MixturePosterior model = ilr::fit(train, h, config);
    save_model(model, out);
    if (!trace.empty()) write_text(trace, trace_text);
    out_stream << "iterations " << model.fit_meta.iterations << "\nelbo "
               << format_double(model.fit_meta.elbo) << "\nactive " << active_components(model)
               << "\n";
    return 0;
  }
};

struct TrainSeqCmd {
  std::vector<std::string> data;
  std::string out;
  std::string curve;
  double threshold = 1.0;
  HyperOptions hyper;
  FitOptions fit;

  void add_to(CLI::App& app) {
    app.add_option("--data", data, "Batch CSV files in arrival order")->required();
    app.add_option("--out", out, "Final model JSON")->required();
    app.add_option("--curve", curve, "Accumulated-data evaluation per batch (CSV)");
    app.add_option("--threshold", threshold, "Occupancy threshold for active components");
    hyper.add_to(app);
    fit.add_to(app);
  }

  int run(std::ostream& out_stream) const {
    const Hyperparams h = hyper.build();
    const FitConfig config = fit.build(hyper);
    std::string table = "batch,n_seen,mse,nmse,active\n";
    std::optional<MixturePosterior> model;
    std::optional<Dataset> seen;
    for (std::size_t b = 0; b < data.size(); ++b) {
      const Dataset batch = load_csv(data[b], hyper.mx, hyper.d);
      if (batch.empty()) throw DataError("'" + data[b] + "' has no data rows");
      model = model ? sequential_update(*model, batch, config) : ilr::fit(batch, h, config);
      seen = seen ? concat(*seen, batch) : batch;
      const EvalReport r = report(*model, *seen, threshold);
      table += std::to_string(b + 1) + "," + std::to_string(seen->size()) + "," +
               format_double(r.mean_mse) + "," + format_double(r.mean_nmse) + "," +
               std::to_string(r.active_models) + "\n";
    }
    save_model(*model, out);
    if (!curve.empty()) write_text(curve, table);
    out_stream << table;
    return 0;
  }
};

struct EvalCmd {
  std::string model_path;
  std::string data;
  double threshold = 1.0;
  std::string format = "json";

  void add_to(CLI::App& app) {
    app.add_option("--model", model_path, "Model JSON")->required();
    app.add_option("--data", data, "Test CSV")->required();
    app.add_option("--threshold", threshold, "Occupancy threshold for active components");
    app.add_option("--format", format, "json | table")->check(CLI::IsMember({"json", "table"}));
  }

  int run(std::ostream& out_stream) const {
    const MixturePosterior model = load_model(model_path);
    const Dataset test =
        load_csv(data, model.hyper.input_dim(), model.hyper.output_dim());
    if (test.empty()) throw DataError("'" + data + "' has no data rows");
    const EvalReport r = report(model, test, threshold);
    out_stream << (format == "json" ? r.to_json() : r.to_table());
    return 0;
  }
};

struct PredictCmd {
  std::string model_path;
  std::string data;
  std::string out;
  std::string gating = "student_t";
  bool with_targets = false;

  void add_to(CLI::App& app) {
    app.add_option("--model", model_path, "Model JSON")->required();
    app.add_option("--data", data, "Query CSV (m_x input columns)")->required();
    app.add_option("--out", out, "Prediction CSV")->required();
    app.add_option("--gating", gating, "student_t | plugin")
        ->check(CLI::IsMember({"student_t", "plugin"}));
    app.add_flag("--with-targets", with_targets,
                 "Query rows also carry d targets; adds a log_density column");
  }

  int run(std::ostream& out_stream) const {
    const MixturePosterior model = load_model(model_path);
    const int d = model.hyper.output_dim();
    const Dataset queries = load_csv(data, model.hyper.input_dim(), with_targets ? d : 0);
    queries.validate();
    const Predictor predictor(model, parse_gating_mode(gating));
    std::string text = column_names("mean", d) + "," + column_names("std", d) + "," +
                       column_names("mode", d) + (with_targets ? ",log_density" : "") + "\n";
    for (Eigen::Index i = 0; i < queries.size(); ++i) {
      std::optional<VectorXd> y;
      if (with_targets) y = queries.targets.row(i).transpose();
      const PredictiveResult res = predictor.predict(queries.inputs.row(i).transpose(), y);
      const VectorXd sd = res.stddev();
      std::vector<double> row(res.mean.data(), res.mean.data() + d);
      row.insert(row.end(), sd.data(), sd.data() + d);
      row.insert(row.end(), res.mode.data(), res.mode.data() + d);
      if (res.log_density) row.push_back(*res.log_density);
      text += csv_row(row);
    }
    write_text(out, text);
    out_stream << "wrote " << queries.size() << " predictions to " << out << "\n";
    return 0;
  }
};

struct CurvesCmd {
  std::string model_path;
  std::string out;
  std::optional<double> lo;
  std::optional<double> hi;
  int points = 200;
  std::string gating = "student_t";

  void add_to(CLI::App& app) {
    app.add_option("--model", model_path, "Model JSON (1-D input)")->required();
    app.add_option("--out", out, "Curve CSV")->required();
    app.add_option("--lo", lo, "Grid start (default: input mean - 3 std)");
    app.add_option("--hi", hi, "Grid end (default: input mean + 3 std)");
    app.add_option("--points", points, "Grid size")->check(CLI::PositiveNumber);
    app.add_option("--gating", gating, "student_t | plugin")
        ->check(CLI::IsMember({"student_t", "plugin"}));
  }

  int run(std::ostream& out_stream) const {
    const MixturePosterior model = load_model(model_path);
    if (model.hyper.input_dim() != 1) {
      throw ArgumentError("curves needs a model with 1-D input; use predict for m_x = " +
                          std::to_string(model.hyper.input_dim()));
    }
    const double centre = model.standardizer.x_mean(0);
    const double spread = model.standardizer.x_std(0);
    const double a = lo.value_or(centre - 3.0 * spread);
    const double b = hi.value_or(centre + 3.0 * spread);
    if (!(b >= a)) throw ArgumentError("--hi must not be below --lo");
    const int d = model.hyper.output_dim();
    const Predictor predictor(model, parse_gating_mode(gating));

    std::string text = "x," + column_names("mean", d) + "," + column_names("mode", d) + "," +
                       column_names("std", d);
    for (std::size_t k = 1; k <= model.size(); ++k) text += ",w_" + std::to_string(k);
    text += "\n";
    for (int i = 0; i < points; ++i) {
      const double x = points == 1 ? a : a + (b - a) * i / (points - 1);
      const PredictiveResult res = predictor.predict(VectorXd::Constant(1, x));
      const VectorXd sd = res.stddev();
      std::vector<double> row{x};
      row.insert(row.end(), res.mean.data(), res.mean.data() + d);
      row.insert(row.end(), res.mode.data(), res.mode.data() + d);
      row.insert(row.end(), sd.data(), sd.data() + d);
      row.insert(row.end(), res.weights.data(), res.weights.data() + res.weights.size());
      text += csv_row(row);
    }
    write_text(out, text);
    out_stream << "wrote " << points << " grid rows to " << out << "\n";
    return 0;
  }
};

// Subcommand-level --config: CLI11 only reads config files on the top-level
// app, so a flat key=value file given after the subcommand is expanded into
// flags here. Flags on the command line win; unknown keys are usage errors.
std::vector<std::string> expand_config(const CLI::App& app, std::vector<std::string> args) {
  std::size_t sub_at = 0;
  const CLI::App* sub = nullptr;
  for (; sub_at < args.size(); ++sub_at) {
    if (args[sub_at] == "--config") {
      ++sub_at;
      continue;
    }
    if (args[sub_at].rfind("--", 0) != 0) {
      sub = app.get_subcommand_no_throw(args[sub_at]);
      break;
    }
  }
  if (!sub) return args;

  std::string path;
  std::vector<std::string> rest(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(sub_at) + 1);
  for (std::size_t i = sub_at + 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (path.empty()) return args;

  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file '" + path + "'");
  const auto given = [&](const std::string& flag) {
    for (std::size_t i = sub_at + 1; i < rest.size(); ++i) {
      if (rest[i] == flag || rest[i].rfind(flag + "=", 0) == 0) return true;
    }
    return false;
  };
  const auto trim = [](std::string t) {
    const auto a = t.find_first_not_of(" \t\r\"");
    const auto b = t.find_last_not_of(" \t\r\"");
    return a == std::string::npos ? std::string() : t.substr(a, b - a + 1);
  };
  std::string section;
  std::string line;
  std::vector<std::string> extra;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    if (!section.empty() && section != sub->get_name()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ArgumentError(path + ": expected key=value, got '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    const std::string value = trim(line.substr(eq + 1));
    const std::string flag = "--" + key;
    const CLI::Option* opt = sub->get_option_no_throw(flag);
    if (!opt) throw ArgumentError(path + ": unknown key '" + key + "' for " + sub->get_name());
    if (given(flag)) continue;
    if (opt->get_expected_max() == 0) {
      if (value == "true" || value == "1" || value.empty()) extra.push_back(flag);
      continue;
    }
    extra.push_back(flag);
    std::istringstream words(value);
    for (std::string w; words >> w;) extra.push_back(w);
  }
  rest.insert(rest.end(), extra.begin(), extra.end());
  return rest;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Infinite mixture of Bayesian local linear regressors", "ilr"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1, 1);
  app.set_config("--config", "", "INI/TOML file; per-command keys under [train] etc.");

  GenerateCmd generate;
  TrainCmd train;
  TrainSeqCmd train_seq;
  EvalCmd eval;
  PredictCmd predict_cmd;
  CurvesCmd curves;

  auto* generate_app = app.add_subcommand("generate", "Write a synthetic dataset as CSV");
  auto* train_app = app.add_subcommand("train", "Fit a model with full-batch VBEM");
  auto* seq_app = app.add_subcommand("train-seq", "Sequential Bayesian updates over batches");
  auto* eval_app = app.add_subcommand("eval", "Score a model on held-out data");
  auto* predict_app = app.add_subcommand("predict", "Batch predictions for query inputs");
  auto* curves_app = app.add_subcommand("curves", "Plot-ready prediction curves on a 1-D grid");
  generate.add_to(*generate_app);
  train.add_to(*train_app);
  train_seq.add_to(*seq_app);
  eval.add_to(*eval_app);
  predict_cmd.add_to(*predict_app);
  curves.add_to(*curves_app);
  std::string sub_config;
  for (auto* sub : app.get_subcommands({})) {
    sub->add_option("--config", sub_config, "key=value file with flag values (flags win)");
  }

  try {
    const auto expanded = expand_config(app, args);
    std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
    app.parse(reversed);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 1;
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (generate_app->parsed()) return generate.run(out);
    if (train_app->parsed()) return train.run(out);
    if (seq_app->parsed()) return train_seq.run(out);
    if (eval_app->parsed()) return eval.run(out);
    if (predict_app->parsed()) return predict_cmd.run(out);
    if (curves_app->parsed()) return curves.run(out);
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}

}  // namespace ilr::cli
