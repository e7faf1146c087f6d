#pragma once

#include <cstdint>
#include <vector>

#include "covsteer/dyn_bridge.hpp"
#include "covsteer/model.hpp"

namespace covsteer {

struct SimConfig {
  int paths = 1000;
  int substeps = 1;       // Euler-Maruyama steps per grid interval
  std::uint64_t seed = 42;
  int store_every = 1;    // keep every k-th grid node (the last node is always kept)
  unsigned threads = 0;   // 0 = hardware concurrency
};

/// Stored samples, laid out path-major: value(path, node, component).
class TrajectoryBatch {
 public:
  TrajectoryBatch(std::vector<double> times, std::size_t paths, Eigen::Index n, Eigen::Index m, std::uint64_t seed);

  [[nodiscard]] std::size_t paths() const noexcept { return paths_; }
  [[nodiscard]] std::size_t nodes() const noexcept { return times_.size(); }
  [[nodiscard]] Eigen::Index n() const noexcept { return n_; }
  [[nodiscard]] Eigen::Index m() const noexcept { return m_; }
  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
  [[nodiscard]] const std::vector<double>& times() const noexcept { return times_; }

  [[nodiscard]] Eigen::Map<const Vector> state(std::size_t path, std::size_t node) const;
  [[nodiscard]] Eigen::Map<const Vector> control(std::size_t path, std::size_t node) const;
  [[nodiscard]] Eigen::Map<Vector> state(std::size_t path, std::size_t node);
  [[nodiscard]] Eigen::Map<Vector> control(std::size_t path, std::size_t node);

  /// Integral of |u|^2 along each path at full simulation resolution.
  [[nodiscard]] const std::vector<double>& path_energy() const noexcept { return energy_; }
  [[nodiscard]] std::vector<double>& path_energy() noexcept { return energy_; }

 private:
  std::vector<double> times_;
  std::size_t paths_;
  Eigen::Index n_;
  Eigen::Index m_;
  std::uint64_t seed_;
  std::vector<double> states_;
  std::vector<double> controls_;
  std::vector<double> energy_;
};

/// Euler-Maruyama simulation of dx = (A + B K) x dt + B dw with x(0) ~ N(0, Sigma0)
/// and gains held constant from the left node. Each path draws from its own
/// generator keyed by (seed, path index), so the batch is bit-identical for any
/// thread count.
[[nodiscard]] TrajectoryBatch simulate_paths(const ModelSpec& spec, const GainSchedule& sched, const SimConfig& cfg);

struct SampleMoments {
  Vector mean;
  Matrix cov;  // unbiased, divisor paths - 1
};

[[nodiscard]] SampleMoments empirical_moments(const TrajectoryBatch& batch, std::size_t node);

struct MeanAndError {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Sample mean of the per-path energies with its standard error.
[[nodiscard]] MeanAndError empirical_energy(const TrajectoryBatch& batch);

/// Standard error of the sample covariance entry (i, j) when the true
/// covariance is `sigma`: sqrt((s_ii s_jj + s_ij^2) / (paths - 1)).
[[nodiscard]] Matrix covariance_std_error(const Matrix& sigma, std::size_t paths);

/// Section of the tube {x : x' Sigma^{-1} x <= level^2}: ascending radii
/// level * sqrt(eig) with orthonormal principal axes as columns.
struct TubeSection {
  Vector radii;
  Matrix axes;
};

[[nodiscard]] TubeSection tube_section(const Matrix& sigma, double level = 3.0);
[[nodiscard]] std::vector<TubeSection> tube_radii(const CovSchedule& cov, double level = 3.0);

}  // namespace covsteer
