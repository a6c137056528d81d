#include "ilr/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string_view>

#include "ilr/error.hpp"

namespace ilr {

void Dataset::validate() const {
  if (inputs.rows() != targets.rows()) {
    throw DataError("dataset '" + name + "': input and target row counts differ");
  }
  if (!inputs.allFinite() || !targets.allFinite()) {
    throw DataError("dataset '" + name + "' contains non-finite values");
  }
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
  Dataset out;
  out.name = name;
  out.truth_mean = truth_mean;
  out.noise_std = noise_std;
  out.metadata = metadata;
  out.inputs.resize(static_cast<Eigen::Index>(rows.size()), inputs.cols());
  out.targets.resize(static_cast<Eigen::Index>(rows.size()), targets.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = rows[i];
    if (r < 0 || r >= size()) throw ArgumentError("dataset subset index out of range");
    out.inputs.row(static_cast<Eigen::Index>(i)) = inputs.row(r);
    out.targets.row(static_cast<Eigen::Index>(i)) = targets.row(r);
  }
  return out;
}

MatrixXd Dataset::truth_targets() const {
  if (!truth_mean) throw ArgumentError("dataset '" + name + "' has no ground-truth mean");
  MatrixXd out(size(), targets.cols());
  for (Eigen::Index i = 0; i < size(); ++i) {
    out.row(i) = truth_mean(inputs.row(i).transpose()).transpose();
  }
  return out;
}

double Dataset::meta(const std::string& key, std::size_t i) const {
  const auto it = metadata.find(key);
  if (it == metadata.end() || i >= it->second.size()) {
    throw ArgumentError("dataset '" + name + "' has no metadata '" + key + "'");
  }
  return it->second[i];
}

Dataset concat(const Dataset& a, const Dataset& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.input_dim() != b.input_dim() || a.output_dim() != b.output_dim()) {
    throw DataError("cannot concatenate datasets of different dimensions");
  }
  Dataset out = a;
  out.inputs.resize(a.size() + b.size(), a.input_dim());
  out.targets.resize(a.size() + b.size(), a.output_dim());
  out.inputs << a.inputs, b.inputs;
  out.targets << a.targets, b.targets;
  return out;
}

namespace {

using Rng = std::mt19937_64;

void require_count(int n, int minimum, const char* what) {
  if (n < minimum) {
    throw ArgumentError(std::string(what) + ": n must be >= " + std::to_string(minimum));
  }
}

// Fills a 1-D dataset from a sampler of x, a mean and a noise std.
Dataset sample_1d(int n, Rng& rng, const std::function<double(Rng&)>& draw_x,
                  const std::function<double(double)>& mean,
                  const std::function<double(double)>& noise) {
  Dataset d;
  d.inputs.resize(n, 1);
  d.targets.resize(n, 1);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    const double x = draw_x(rng);
    d.inputs(i, 0) = x;
    d.targets(i, 0) = mean(x) + noise(x) * gauss(rng);
  }
  d.truth_mean = [mean](const VectorXd& x) { return VectorXd::Constant(1, mean(x(0))); };
  d.noise_std = [noise](const VectorXd& x) { return VectorXd::Constant(1, noise(x(0))); };
  return d;
}

}  // namespace

Dataset gen_sine_gaps(int n, std::uint64_t seed) {
  require_count(n, 10, "gen_sine_gaps");
  constexpr double lo = 0.0;
  constexpr double hi = 2.0 * std::numbers::pi;
  constexpr double gaps[2][2] = {{1.5, 2.5}, {4.0, 5.0}};
  constexpr double kNoise = 0.1;
  // Sample uniformly on the support by mapping a draw on the shortened line.
  const double support = (hi - lo) - (gaps[0][1] - gaps[0][0]) - (gaps[1][1] - gaps[1][0]);
  Rng rng(seed);
  auto draw = [&](Rng& r) {
    double u = std::uniform_real_distribution<double>(0.0, support)(r) + lo;
    for (const auto& g : gaps) {
      if (u >= g[0]) u += g[1] - g[0];
    }
    return u;
  };
  auto d = sample_1d(
      n, rng, draw, [](double x) { return std::sin(x); }, [](double) { return kNoise; });
  d.name = "sine_gaps";
  d.metadata["gaps"] = {gaps[0][0], gaps[0][1], gaps[1][0], gaps[1][1]};
  d.metadata["domain"] = {lo, hi};
  d.metadata["noise_std"] = {kNoise};
  return d;
}

double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }

double sinc_noise_std(double x) {
  return 0.05 + 0.2 * (1.0 + std::sin(2.0 * x)) / (1.0 + std::exp(-0.2 * x));
}

Dataset gen_sinc_hetero(int n, std::uint64_t seed) {
  require_count(n, 10, "gen_sinc_hetero");
  Rng rng(seed);
  auto d = sample_1d(
      n, rng, [](Rng& r) { return std::uniform_real_distribution<double>(-10.0, 10.0)(r); },
      sinc, sinc_noise_std);
  d.name = "sinc";
  d.metadata["domain"] = {-10.0, 10.0};
  return d;
}

Dataset gen_step(int n, std::uint64_t seed) {
  require_count(n, 1, "gen_step");
  static const std::vector<double> jumps = {1.0, 2.0, 3.0};
  static const std::vector<double> levels = {0.0, 1.0, -0.5, 0.75};
  constexpr double kNoise = 0.05;
  auto mean = [](double x) {
    std::size_t seg = 0;
    while (seg < jumps.size() && x >= jumps[seg]) ++seg;
    return levels[seg];
  };
  Rng rng(seed);
  auto d = sample_1d(
      n, rng, [](Rng& r) { return std::uniform_real_distribution<double>(0.0, 4.0)(r); }, mean,
      [](double) { return kNoise; });
  d.name = "step";
  d.metadata["domain"] = {0.0, 4.0};
  d.metadata["jumps"] = jumps;
  d.metadata["levels"] = levels;
  d.metadata["noise_std"] = {kNoise};
  // Mode predictions are checked at points at least jump_exclusion away from
  // every jump, against mode_tolerance.
  d.metadata["jump_exclusion"] = {0.1};
  d.metadata["mode_tolerance"] = {0.05};
  return d;
}

Dataset gen_cubic(int n, std::uint64_t seed) {
  require_count(n, 1, "gen_cubic");
  constexpr double kNoise = 0.05;
  auto mean = [](double x) {
    if (x < 0.0) {
      const double u = x + 1.0;
      return u * u * u - u;
    }
    const double u = x - 1.0;
    return 1.0 - u * u * u + u;
  };
  Rng rng(seed);
  auto d = sample_1d(
      n, rng, [](Rng& r) { return std::uniform_real_distribution<double>(-2.0, 2.0)(r); }, mean,
      [](double) { return kNoise; });
  d.name = "cubic";
  d.metadata["domain"] = {-2.0, 2.0};
  d.metadata["jumps"] = {0.0};
  d.metadata["noise_std"] = {kNoise};
  return d;
}

std::vector<Dataset> gen_chirp(int n_batches, int n_per, std::uint64_t seed) {
  require_count(n_batches, 1, "gen_chirp");
  require_count(n_per, 1, "gen_chirp");
  constexpr double f0 = 1.0;
  constexpr double rate = 2.0;
  constexpr double kNoise = 0.05;
  auto mean = [](double x) { return std::sin(2.0 * std::numbers::pi * (f0 + rate * x) * x); };
  Rng rng(seed);
  std::vector<Dataset> out;
  for (int b = 0; b < n_batches; ++b) {
    const double lo = static_cast<double>(b) / n_batches;
    const double hi = static_cast<double>(b + 1) / n_batches;
    auto d = sample_1d(
        n_per, rng, [&](Rng& r) { return std::uniform_real_distribution<double>(lo, hi)(r); },
        mean, [](double) { return kNoise; });
    d.name = "chirp";
    d.metadata["domain"] = {0.0, 1.0};
    d.metadata["batch_range"] = {lo, hi};
    d.metadata["chirp"] = {f0, rate};
    d.metadata["noise_std"] = {kNoise};
    out.push_back(std::move(d));
  }
  return out;
}

TwoLinkArm::Mat2 TwoLinkArm::inertia(const Vec2& q) const {
  const double c2 = std::cos(q(1));
  Mat2 m;
  m(0, 0) = m1 * l1 * l1 + m2 * (l1 * l1 + l2 * l2 + 2.0 * l1 * l2 * c2);
  m(0, 1) = m2 * (l2 * l2 + l1 * l2 * c2);
  m(1, 0) = m(0, 1);
  m(1, 1) = m2 * l2 * l2;
  return m;
}

TwoLinkArm::Vec2 TwoLinkArm::coriolis(const Vec2& q, const Vec2& qd) const {
  const double h = m2 * l1 * l2 * std::sin(q(1));
  return {-h * (2.0 * qd(0) * qd(1) + qd(1) * qd(1)), h * qd(0) * qd(0)};
}

TwoLinkArm::Vec2 TwoLinkArm::gravity_torque(const Vec2& q) const {
  const double s12 = std::sin(q(0) + q(1));
  return {(m1 + m2) * gravity * l1 * std::sin(q(0)) + m2 * gravity * l2 * s12,
          m2 * gravity * l2 * s12};
}

TwoLinkArm::Vec2 TwoLinkArm::inverse_dynamics(const Vec2& q, const Vec2& qd,
                                              const Vec2& qdd) const {
  return inertia(q) * qdd + coriolis(q, qd) + gravity_torque(q) + friction * qd;
}

double TwoLinkArm::energy(const Vec2& q, const Vec2& qd) const {
  const double kinetic = 0.5 * qd.dot(inertia(q) * qd);
  const double potential = -(m1 + m2) * gravity * l1 * std::cos(q(0)) -
                           m2 * gravity * l2 * std::cos(q(0) + q(1));
  return kinetic + potential;
}

Eigen::Vector2d ArmTrajectory::position(double t) const {
  return offset + amplitude.cwiseProduct(
                      (frequency * t + phase).unaryExpr([](double a) { return std::sin(a); }));
}

Eigen::Vector2d ArmTrajectory::velocity(double t) const {
  return amplitude.cwiseProduct(frequency).cwiseProduct(
      (frequency * t + phase).unaryExpr([](double a) { return std::cos(a); }));
}

Eigen::Vector2d ArmTrajectory::acceleration(double t) const {
  return -amplitude.cwiseProduct(frequency.cwiseProduct(frequency))
              .cwiseProduct((frequency * t + phase).unaryExpr([](double a) { return std::sin(a); }));
}

Dataset gen_twolink_arm(int n, std::uint64_t seed, double noise_std) {
  require_count(n, 100, "gen_twolink_arm");
  constexpr int kSamplesPerTrajectory = 1000;
  constexpr double kDt = 0.01;
  const TwoLinkArm arm;
  Rng rng(seed);
  std::uniform_real_distribution<double> offset(-1.0, 1.0);
  std::uniform_real_distribution<double> amplitude(0.3, 1.2);
  std::uniform_real_distribution<double> frequency(0.5, 2.5);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Dataset d;
  d.name = "arm";
  d.inputs.resize(n, 6);
  d.targets.resize(n, 2);
  ArmTrajectory traj;
  for (int i = 0; i < n; ++i) {
    if (i % kSamplesPerTrajectory == 0) {
      traj.offset = {offset(rng), offset(rng)};
      traj.amplitude = {amplitude(rng), amplitude(rng)};
      traj.frequency = {frequency(rng), frequency(rng)};
      traj.phase = {phase(rng), phase(rng)};
    }
    const double t = (i % kSamplesPerTrajectory) * kDt;
    const auto q = traj.position(t);
    const auto qd = traj.velocity(t);
    const auto qdd = traj.acceleration(t);
    d.inputs.row(i) << q.transpose(), qd.transpose(), qdd.transpose();
    const auto u = arm.inverse_dynamics(q, qd, qdd);
    d.targets(i, 0) = u(0) + noise_std * gauss(rng);
    d.targets(i, 1) = u(1) + noise_std * gauss(rng);
  }
  d.truth_mean = [arm](const VectorXd& x) {
    const VectorXd u = arm.inverse_dynamics(x.segment<2>(0), x.segment<2>(2), x.segment<2>(4));
    return u;
  };
  d.noise_std = [noise_std](const VectorXd&) { return VectorXd::Constant(2, noise_std); };
  d.metadata["noise_std"] = {noise_std};
  d.metadata["samples_per_trajectory"] = {static_cast<double>(kSamplesPerTrajectory)};
  d.metadata["dt"] = {kDt};
  return d;
}

Dataset make_dataset(const std::string& kind, int n, std::uint64_t seed) {
  if (kind == "sine" || kind == "sine_gaps") return gen_sine_gaps(n, seed);
  if (kind == "sinc") return gen_sinc_hetero(n, seed);
  if (kind == "step") return gen_step(n, seed);
  if (kind == "cubic") return gen_cubic(n, seed);
  if (kind == "arm") return gen_twolink_arm(n, seed);
  if (kind == "chirp") {
    auto batches = gen_chirp(1, n, seed);
    return batches.front();
  }
  throw ArgumentError("unknown dataset kind '" + kind + "'");
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

bool parse_cell(std::string_view cell, double& out) {
  if (cell.empty()) return false;
  if (cell.front() == '+') cell.remove_prefix(1);
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  return res.ec == std::errc() && res.ptr == cell.data() + cell.size() && std::isfinite(out);
}

}  // namespace

Dataset load_csv(const std::string& path, int input_dim, int output_dim) {
  if (input_dim < 1 || output_dim < 0) throw ArgumentError("load_csv: invalid column counts");
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file '" + path + "'");
  const auto width = static_cast<std::size_t>(input_dim + output_dim);

  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_cells(line);
    std::vector<double> row(cells.size());
    std::size_t numeric = 0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (parse_cell(cells[c], row[c])) ++numeric;
    }
    if (line_no == 1 && numeric == 0) continue;  // header
    if (cells.size() != width) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                           std::to_string(width) + " columns, found " +
                           std::to_string(cells.size()),
                       line_no);
    }
    if (numeric != cells.size()) {
      for (std::size_t c = 0; c < cells.size(); ++c) {
        double dummy;
        if (!parse_cell(cells[c], dummy)) {
          throw ParseError(path + ":" + std::to_string(line_no) + ": non-numeric cell '" +
                               std::string(cells[c]) + "' in column " + std::to_string(c + 1),
                           line_no);
        }
      }
    }
    values.insert(values.end(), row.begin(), row.end());
  }

  const auto rows = static_cast<Eigen::Index>(values.size() / width);
  Dataset d;
  d.name = path;
  d.inputs.resize(rows, input_dim);
  d.targets.resize(rows, output_dim);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (int c = 0; c < input_dim; ++c) d.inputs(r, c) = values[r * width + c];
    for (int c = 0; c < output_dim; ++c) d.targets(r, c) = values[r * width + input_dim + c];
  }
  return d;
}

void save_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  for (int c = 0; c < data.input_dim(); ++c) out << (c ? "," : "") << "x" << c + 1;
  for (int c = 0; c < data.output_dim(); ++c) out << ",y" << c + 1;
  out << "\n";
  for (Eigen::Index r = 0; r < data.size(); ++r) {
    for (int c = 0; c < data.input_dim(); ++c) {
      out << (c ? "," : "") << format_double(data.inputs(r, c));
    }
    for (int c = 0; c < data.output_dim(); ++c) out << "," << format_double(data.targets(r, c));
    out << "\n";
  }
  if (!out) throw DataError("failed writing '" + path + "'");
}

std::pair<Dataset, Dataset> split(const Dataset& data, double test_fraction,
                                  std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ArgumentError("split: test_fraction must lie in (0, 1)");
  }
  const auto n = data.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  auto n_test = static_cast<Eigen::Index>(std::llround(test_fraction * static_cast<double>(n)));
  if (n >= 2) n_test = std::clamp<Eigen::Index>(n_test, 1, n - 1);
  std::vector<Eigen::Index> test(order.begin(), order.begin() + n_test);
  std::vector<Eigen::Index> train(order.begin() + n_test, order.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {data.subset(train), data.subset(test)};
}

}  // namespace ilr
