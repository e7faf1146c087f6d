#include "covsteer/monte_carlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include "covsteer/error.hpp"

namespace covsteer {
namespace {

std::vector<std::size_t> stored_nodes(std::size_t grid_nodes, int store_every) {
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < grid_nodes; k += static_cast<std::size_t>(store_every)) idx.push_back(k);
  if (idx.back() != grid_nodes - 1) idx.push_back(grid_nodes - 1);
  return idx;
}

std::mt19937_64 path_generator(std::uint64_t seed, std::size_t path) {
  const auto p = static_cast<std::uint64_t>(path);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(p >> 32)};
  return std::mt19937_64(seq);
}

// Pairwise (cascade) summation of term(i) over [lo, hi).
template <typename T, typename Term>
T pairwise_sum(std::size_t lo, std::size_t hi, const Term& term) {
  if (hi - lo <= 8) {
    T acc = term(lo);
    for (std::size_t i = lo + 1; i < hi; ++i) acc += term(i);
    return acc;
  }
  const std::size_t mid = lo + (hi - lo) / 2;
  T left = pairwise_sum<T>(lo, mid, term);
  left += pairwise_sum<T>(mid, hi, term);
  return left;
}

}  // namespace

TrajectoryBatch::TrajectoryBatch(std::vector<double> times, std::size_t paths, Eigen::Index n, Eigen::Index m,
                                 std::uint64_t seed)
    : times_(std::move(times)), paths_(paths), n_(n), m_(m), seed_(seed) {
  states_.assign(paths_ * times_.size() * static_cast<std::size_t>(n_), 0.0);
  controls_.assign(paths_ * times_.size() * static_cast<std::size_t>(m_), 0.0);
  energy_.assign(paths_, 0.0);
}

Eigen::Map<const Vector> TrajectoryBatch::state(std::size_t path, std::size_t node) const {
  return {states_.data() + (path * times_.size() + node) * static_cast<std::size_t>(n_), n_};
}
Eigen::Map<const Vector> TrajectoryBatch::control(std::size_t path, std::size_t node) const {
  return {controls_.data() + (path * times_.size() + node) * static_cast<std::size_t>(m_), m_};
}
Eigen::Map<Vector> TrajectoryBatch::state(std::size_t path, std::size_t node) {
  return {states_.data() + (path * times_.size() + node) * static_cast<std::size_t>(n_), n_};
}
Eigen::Map<Vector> TrajectoryBatch::control(std::size_t path, std::size_t node) {
  return {controls_.data() + (path * times_.size() + node) * static_cast<std::size_t>(m_), m_};
}

TrajectoryBatch simulate_paths(const ModelSpec& spec, const GainSchedule& sched, const SimConfig& cfg) {
  if (cfg.paths < 1 || cfg.substeps < 1 || cfg.store_every < 1) {
    throw Error(ErrorKind::InsufficientPaths, "paths, substeps and store_every must be positive");
  }
  const auto n = spec.n();
  const auto m = spec.m();
  const TimeGrid& grid = sched.grid;
  const std::size_t grid_nodes = grid.size();
  const std::vector<std::size_t> keep = stored_nodes(grid_nodes, cfg.store_every);
  std::vector<double> times;
  times.reserve(keep.size());
  for (std::size_t k : keep) times.push_back(grid.node(k));

  TrajectoryBatch batch(std::move(times), static_cast<std::size_t>(cfg.paths), n, m, cfg.seed);

  // Per-interval drift and diffusion matrices, shared read-only by all workers.
  const double dt = grid.spacing() / cfg.substeps;
  const double sqrt_dt = std::sqrt(dt);
  std::vector<Matrix> drift(grid_nodes - 1);
  std::vector<Matrix> diffusion(grid_nodes - 1);
  for (std::size_t k = 0; k + 1 < grid_nodes; ++k) {
    const double t = grid.node(k);
    const Matrix b = spec.b.at(t);
    drift[k] = spec.a.at(t) + b * sched.gain[k];
    diffusion[k] = b;
  }
  const Matrix l0 = Eigen::LLT<Matrix>(spec.sigma0.mat()).matrixL();

  std::atomic<bool> failed{false};
  auto run_path = [&](std::size_t path) {
    auto gen = path_generator(cfg.seed, path);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector xi(n);
    Vector dw(m);
    Vector u(m);
    Vector dx(n);
    for (Eigen::Index i = 0; i < n; ++i) xi(i) = normal(gen);
    Vector x = l0 * xi;
    double energy = 0.0;
    std::size_t slot = 0;
    for (std::size_t k = 0; k < grid_nodes; ++k) {
      if (slot < keep.size() && keep[slot] == k) {
        batch.state(path, slot) = x;
        batch.control(path, slot) = sched.gain[k] * x;
        ++slot;
      }
      if (k + 1 == grid_nodes) break;
      for (int s = 0; s < cfg.substeps; ++s) {
        u.noalias() = sched.gain[k] * x;
        energy += u.squaredNorm() * dt;
        for (Eigen::Index j = 0; j < m; ++j) dw(j) = sqrt_dt * normal(gen);
        dx.noalias() = dt * (drift[k] * x);
        dx.noalias() += diffusion[k] * dw;
        x += dx;
      }
      if (!x.allFinite()) {
        failed = true;
        return;
      }
    }
    batch.path_energy()[path] = energy;
  };

  unsigned workers = cfg.threads != 0 ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(cfg.paths));
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t p = next++; p < batch.paths(); p = next++) run_path(p);
      });
    }
  }
  if (failed) {
    throw Error(ErrorKind::IntegrationFailure, "a simulated path became non-finite");
  }
  return batch;
}

SampleMoments empirical_moments(const TrajectoryBatch& batch, std::size_t node) {
  const std::size_t paths = batch.paths();
  if (paths < 2) {
    throw Error(ErrorKind::InsufficientPaths, "sample covariance needs at least two paths");
  }
  SampleMoments out;
  out.mean = pairwise_sum<Vector>(0, paths, [&](std::size_t i) -> Vector { return batch.state(i, node); }) /
             static_cast<double>(paths);
  out.cov = pairwise_sum<Matrix>(0, paths, [&](std::size_t i) -> Matrix {
              const Vector d = batch.state(i, node) - out.mean;
              return d * d.transpose();
            }) /
            static_cast<double>(paths - 1);
  out.cov = symmetrize(out.cov);
  return out;
}

MeanAndError empirical_energy(const TrajectoryBatch& batch) {
  const std::size_t paths = batch.paths();
  if (paths < 2) {
    throw Error(ErrorKind::InsufficientPaths, "energy standard error needs at least two paths");
  }
  const auto& e = batch.path_energy();
  MeanAndError r;
  r.mean = pairwise_sum<double>(0, paths, [&](std::size_t i) { return e[i]; }) / static_cast<double>(paths);
  const double var = pairwise_sum<double>(0, paths, [&](std::size_t i) { return (e[i] - r.mean) * (e[i] - r.mean); }) /
                     static_cast<double>(paths - 1);
  r.std_error = std::sqrt(var / static_cast<double>(paths));
  return r;
}

Matrix covariance_std_error(const Matrix& sigma, std::size_t paths) {
  const auto n = sigma.rows();
  Matrix se(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      se(i, j) = std::sqrt((sigma(i, i) * sigma(j, j) + sigma(i, j) * sigma(i, j)) / static_cast<double>(paths - 1));
    }
  }
  return se;
}

TubeSection tube_section(const Matrix& sigma, double level) {
  if (!is_spd(sigma)) {
    throw Error(ErrorKind::NotPositiveDefinite, "tube section needs an SPD covariance");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(sigma));
  return {level * eig.eigenvalues().cwiseSqrt(), eig.eigenvectors()};
}

std::vector<TubeSection> tube_radii(const CovSchedule& cov, double level) {
  std::vector<TubeSection> out;
  out.reserve(cov.sigma.size());
  for (const auto& s : cov.sigma) out.push_back(tube_section(s, level));
  return out;
}

}  // namespace covsteer
