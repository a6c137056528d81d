#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace ilr {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Paired inputs (N x m_x) and targets (N x d). Synthetic sets carry their
// noiseless mean and noise std so tests can check against ground truth.
struct Dataset {
  MatrixXd inputs;
  MatrixXd targets;
  std::string name;
  std::function<VectorXd(const VectorXd&)> truth_mean;
  std::function<VectorXd(const VectorXd&)> noise_std;
  // Generator layout (gap bounds, jump locations, tolerances, ...).
  std::map<std::string, std::vector<double>> metadata;

  Eigen::Index size() const { return inputs.rows(); }
  int input_dim() const { return static_cast<int>(inputs.cols()); }
  int output_dim() const { return static_cast<int>(targets.cols()); }
  bool empty() const { return inputs.rows() == 0; }

  void validate() const;
  Dataset subset(const std::vector<Eigen::Index>& rows) const;
  // Evaluates truth_mean on every input row. Requires truth_mean.
  MatrixXd truth_targets() const;
  double meta(const std::string& key, std::size_t i = 0) const;
};

// Row-wise concatenation; keeps the first operand's name and handles.
Dataset concat(const Dataset& a, const Dataset& b);

// sin(x) + N(0, 0.1^2) on [0, 2pi] with gaps [1.5, 2.5] and [4.0, 5.0].
Dataset gen_sine_gaps(int n, std::uint64_t seed);

double sinc(double x);
double sinc_noise_std(double x);
// sinc(x) + N(0, sigma(x)^2), x ~ U[-10, 10],
// sigma(x) = 0.05 + 0.2 (1 + sin 2x) / (1 + exp(-0.2 x)).
Dataset gen_sinc_hetero(int n, std::uint64_t seed);

// Piecewise constant on [0, 4] with jumps at 1, 2, 3, noise N(0, 0.05^2).
Dataset gen_step(int n, std::uint64_t seed);

// Two cubic segments on [-2, 2] split at 0, noise N(0, 0.05^2).
Dataset gen_cubic(int n, std::uint64_t seed);

// y = sin(2 pi (f0 + c x) x) + N(0, 0.05^2) on [0, 1]; batch b covers
// [b / B, (b + 1) / B).
std::vector<Dataset> gen_chirp(int n_batches, int n_per, std::uint64_t seed);

// Planar two-link arm with unit point masses at the link tips, unit link
// lengths, g = 9.81 and viscous joint friction. Angles are measured from the
// downward vertical, so q = 0 hangs straight down.
struct TwoLinkArm {
  double m1 = 1.0, m2 = 1.0;
  double l1 = 1.0, l2 = 1.0;
  double gravity = 9.81;
  double friction = 0.1;

  using Vec2 = Eigen::Vector2d;
  using Mat2 = Eigen::Matrix2d;

  Mat2 inertia(const Vec2& q) const;
  Vec2 coriolis(const Vec2& q, const Vec2& qd) const;
  Vec2 gravity_torque(const Vec2& q) const;
  // u = M(q) qdd + C(q, qd) + G(q) + friction * qd.
  Vec2 inverse_dynamics(const Vec2& q, const Vec2& qd, const Vec2& qdd) const;
  // Kinetic plus potential energy.
  double energy(const Vec2& q, const Vec2& qd) const;
};

// Sinusoidal joint trajectory q_i(t) = c_i + a_i sin(w_i t + phi_i).
struct ArmTrajectory {
  Eigen::Vector2d offset, amplitude, frequency, phase;

  Eigen::Vector2d position(double t) const;
  Eigen::Vector2d velocity(double t) const;
  Eigen::Vector2d acceleration(double t) const;
};

// Inputs (q1, q2, qd1, qd2, qdd1, qdd2), targets (u1, u2). Rows are ordered
// by trajectory then time, so contiguous chunks are localized in state space.
Dataset gen_twolink_arm(int n, std::uint64_t seed, double noise_std = 0.01);

Dataset make_dataset(const std::string& kind, int n, std::uint64_t seed);

// First m_x columns are inputs, the next d (possibly 0) are targets. A first line with no
// numeric cells is treated as a header.
Dataset load_csv(const std::string& path, int input_dim, int output_dim);
void save_csv(const Dataset& data, const std::string& path);

// Disjoint uniform split, deterministic per seed. Returns (train, test).
std::pair<Dataset, Dataset> split(const Dataset& data, double test_fraction,
                                  std::uint64_t seed);

// Shortest decimal text that round-trips to the same double.
std::string format_double(double x);

}  // namespace ilr
