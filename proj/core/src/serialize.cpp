#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "ilr/error.hpp"
#include "ilr/model.hpp"

namespace ilr {
namespace {

using nlohmann::json;

json to_json(const VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json to_json(const MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

// Non-finite scalars (an unset ELBO) are written as null.
json scalar(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

double read_scalar(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!j.is_number()) throw MalformedPayloadError("expected a number");
  return j.get<double>();
}

VectorXd read_vector(const json& j) {
  if (!j.is_array()) throw MalformedPayloadError("expected an array");
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw MalformedPayloadError("expected a numeric array");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

MatrixXd read_matrix(const json& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) {
    throw MalformedPayloadError("expected a nested array matrix");
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw MalformedPayloadError("ragged matrix row");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& cell = row[static_cast<std::size_t>(c)];
      if (!cell.is_number()) throw MalformedPayloadError("non-numeric matrix entry");
      m(i, c) = cell.get<double>();
    }
  }
  return m;
}

const json& field(const json& j, const char* key) {
  if (!j.is_object()) throw MalformedPayloadError(std::string("expected an object around '") + key + "'");
  const auto it = j.find(key);
  if (it == j.end()) throw MalformedPayloadError(std::string("missing field '") + key + "'");
  return *it;
}

json to_json(const NormalWishart& nw) {
  return {{"mean", to_json(nw.mean)},
          {"scale", nw.scale},
          {"scale_matrix", to_json(nw.scale_matrix)},
          {"dof", nw.dof}};
}

NormalWishart read_normal_wishart(const json& j) {
  NormalWishart nw;
  nw.mean = read_vector(field(j, "mean"));
  nw.scale = read_scalar(field(j, "scale"));
  nw.scale_matrix = read_matrix(field(j, "scale_matrix"));
  nw.dof = read_scalar(field(j, "dof"));
  return nw;
}

json to_json(const MatrixNormalWishart& mnw) {
  return {{"mean", to_json(mnw.mean)},
          {"col_precision", to_json(mnw.col_precision)},
          {"scale_matrix", to_json(mnw.scale_matrix)},
          {"dof", mnw.dof}};
}

MatrixNormalWishart read_matrix_normal_wishart(const json& j) {
  MatrixNormalWishart mnw;
  mnw.mean = read_matrix(field(j, "mean"));
  mnw.col_precision = read_matrix(field(j, "col_precision"));
  mnw.scale_matrix = read_matrix(field(j, "scale_matrix"));
  mnw.dof = read_scalar(field(j, "dof"));
  return mnw;
}

json to_json(const BetaParams& b) { return {{"a", b.a}, {"b", b.b}}; }

BetaParams read_beta(const json& j) {
  return {read_scalar(field(j, "a")), read_scalar(field(j, "b"))};
}

int read_int(const json& j) {
  if (!j.is_number_integer()) throw MalformedPayloadError("expected an integer");
  return j.get<int>();
}

std::string read_string(const json& j) {
  if (!j.is_string()) throw MalformedPayloadError("expected a string");
  return j.get<std::string>();
}

}  // namespace

std::string serialize(const MixturePosterior& model) {
  json root;
  root["format_version"] = kModelFormatVersion;

  const auto& h = model.hyper;
  root["hyperparams"] = {
      {"gating", to_json(h.gating)},
      {"expert", to_json(h.expert)},
      {"stick", to_json(h.stick)},
      {"max_components", h.max_components},
      {"gating_prior", to_string(h.gating_prior)},
      {"dirichlet_alpha", h.dirichlet_alpha},
      {"dims",
       {{"input", h.input_dim()}, {"feature", h.feature_dim()}, {"output", h.output_dim()}}},
  };

  json comps = json::array();
  for (const auto& c : model.components) {
    comps.push_back({{"stick", c.stick ? to_json(*c.stick) : json(nullptr)},
                     {"dirichlet", c.dirichlet},
                     {"occupancy", c.occupancy},
                     {"gating", to_json(c.gating)},
                     {"expert", to_json(c.expert)}});
  }
  root["components"] = std::move(comps);

  root["feature_map"] = {{"kind", model.feature_map.name()},
                         {"input_dim", model.feature_map.input_dim()},
                         {"degree", model.feature_map.degree()}};
  const auto& s = model.standardizer;
  root["standardizer"] = {{"x_mean", to_json(s.x_mean)},
                          {"x_std", to_json(s.x_std)},
                          {"y_mean", to_json(s.y_mean)},
                          {"y_std", to_json(s.y_std)}};
  root["fit_meta"] = {{"iterations", model.fit_meta.iterations},
                      {"elbo", scalar(model.fit_meta.elbo)},
                      {"seed", model.fit_meta.seed}};
  return root.dump(1) + "\n";
}

MixturePosterior deserialize(std::string_view payload) {
  json root;
  try {
    root = json::parse(payload.begin(), payload.end());
  } catch (const json::parse_error& e) {
    throw MalformedPayloadError(std::string("model payload is not valid JSON: ") + e.what());
  }

  MixturePosterior model;
  try {
    const auto& version = field(root, "format_version");
    if (!version.is_number_integer()) throw MalformedPayloadError("format_version must be an integer");
    if (version.get<int>() != kModelFormatVersion) {
      throw FormatVersionError("unsupported model format_version " +
                               std::to_string(version.get<int>()) + " (expected " +
                               std::to_string(kModelFormatVersion) + ")");
    }

    const auto& h = field(root, "hyperparams");
    model.hyper.gating = read_normal_wishart(field(h, "gating"));
    model.hyper.expert = read_matrix_normal_wishart(field(h, "expert"));
    model.hyper.stick = read_beta(field(h, "stick"));
    model.hyper.max_components = read_int(field(h, "max_components"));
    try {
      model.hyper.gating_prior = parse_gating_prior(read_string(field(h, "gating_prior")));
    } catch (const ArgumentError& e) {
      throw MalformedPayloadError(e.what());
    }
    model.hyper.dirichlet_alpha = read_scalar(field(h, "dirichlet_alpha"));

    const auto& comps = field(root, "components");
    if (!comps.is_array()) throw MalformedPayloadError("components must be an array");
    for (const auto& c : comps) {
      ComponentPosterior cp;
      const auto& stick = field(c, "stick");
      if (!stick.is_null()) cp.stick = read_beta(stick);
      cp.dirichlet = read_scalar(field(c, "dirichlet"));
      cp.occupancy = read_scalar(field(c, "occupancy"));
      cp.gating = read_normal_wishart(field(c, "gating"));
      cp.expert = read_matrix_normal_wishart(field(c, "expert"));
      model.components.push_back(std::move(cp));
    }

    const auto& fm = field(root, "feature_map");
    const auto kind = read_string(field(fm, "kind"));
    const int input_dim = read_int(field(fm, "input_dim"));
    const int degree = read_int(field(fm, "degree"));
    try {
      if (kind == "affine") {
        model.feature_map = FeatureMap::affine(input_dim);
      } else if (kind == "polynomial") {
        model.feature_map = FeatureMap::polynomial(input_dim, degree);
      } else {
        throw MalformedPayloadError("unknown feature map kind '" + kind + "'");
      }
    } catch (const ArgumentError& e) {
      throw InvariantViolationError(e.what());
    }

    const auto& s = field(root, "standardizer");
    model.standardizer.x_mean = read_vector(field(s, "x_mean"));
    model.standardizer.x_std = read_vector(field(s, "x_std"));
    model.standardizer.y_mean = read_vector(field(s, "y_mean"));
    model.standardizer.y_std = read_vector(field(s, "y_std"));

    const auto& meta = field(root, "fit_meta");
    model.fit_meta.iterations = read_int(field(meta, "iterations"));
    model.fit_meta.elbo = read_scalar(field(meta, "elbo"));
    const auto& seed = field(meta, "seed");
    if (!seed.is_number_unsigned() && !seed.is_number_integer()) {
      throw MalformedPayloadError("seed must be an integer");
    }
    model.fit_meta.seed = seed.get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw MalformedPayloadError(std::string("model payload has wrong structure: ") + e.what());
  }

  model.validate();
  return model;
}

void save_model(const MixturePosterior& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << serialize(model);
  if (!out) throw DataError("failed writing model to '" + path + "'");
}

MixturePosterior load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

}  // namespace ilr
