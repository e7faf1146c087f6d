#include "covsteer/monte_carlo.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "covsteer/error.hpp"
#include "test_support.hpp"

namespace covsteer {
namespace {

using testing::mat;

struct Controlled {
  ModelSpec spec;
  StaticSolution sol;
  GainSchedule gains;
  CovSchedule cov;
};

const Controlled& oscillator() {
  static const Controlled c = [] {
    const ModelSpec spec = make_ou_example();
    const auto pm = compute_prior_moments(spec, TimeGrid(1.0, kDefaultSteps));
    auto sol = solve_static(spec, pm);
    auto gains = pi_schedule(spec, terminal_pi(sol, pm), pm);
    auto cov = propagate_closed_loop(spec, gains);
    return Controlled{spec, std::move(sol), std::move(gains), std::move(cov)};
  }();
  return c;
}

GainSchedule uncontrolled(const ModelSpec& spec, int steps) {
  const auto pm = compute_prior_moments(spec, TimeGrid(spec.horizon, steps));
  return pi_schedule(spec, SymMatrix::zero(spec.n()), pm);
}

bool same_batch(const TrajectoryBatch& a, const TrajectoryBatch& b) {
  if (a.paths() != b.paths() || a.nodes() != b.nodes()) return false;
  for (std::size_t p = 0; p < a.paths(); ++p) {
    if (a.path_energy()[p] != b.path_energy()[p]) return false;
    for (std::size_t k = 0; k < a.nodes(); ++k) {
      if (a.state(p, k) != b.state(p, k) || a.control(p, k) != b.control(p, k)) return false;
    }
  }
  return true;
}

void expect_cov_within(const Matrix& empirical, const Matrix& truth, std::size_t paths, double k_se = 3.0) {
  const Matrix se = covariance_std_error(truth, paths);
  for (Eigen::Index i = 0; i < truth.rows(); ++i) {
    for (Eigen::Index j = i; j < truth.cols(); ++j) {
      EXPECT_LE(std::abs(empirical(i, j) - truth(i, j)), k_se * se(i, j)) << "entry " << i << "," << j;
    }
  }
}

TEST(Simulate, SameSeedIsBitIdenticalAcrossThreadCounts) {
  const auto& c = oscillator();
  SimConfig cfg;
  cfg.paths = 200;
  cfg.store_every = 7;
  cfg.threads = 1;
  const auto a = simulate_paths(c.spec, c.gains, cfg);
  cfg.threads = 4;
  const auto b = simulate_paths(c.spec, c.gains, cfg);
  const auto again = simulate_paths(c.spec, c.gains, cfg);
  EXPECT_TRUE(same_batch(a, b));
  EXPECT_TRUE(same_batch(b, again));
  cfg.seed = 43;
  EXPECT_FALSE(same_batch(a, simulate_paths(c.spec, c.gains, cfg)));
}

TEST(Simulate, PathsDoNotDependOnBatchSize) {
  const auto& c = oscillator();
  SimConfig cfg;
  cfg.paths = 10;
  const auto small = simulate_paths(c.spec, c.gains, cfg);
  cfg.paths = 30;
  const auto large = simulate_paths(c.spec, c.gains, cfg);
  for (std::size_t k = 0; k < small.nodes(); k += 100) EXPECT_EQ(small.state(9, k), large.state(9, k));
}

TEST(Simulate, StoredNodesIncludeTheEnd) {
  const auto& c = oscillator();
  SimConfig cfg;
  cfg.paths = 2;
  cfg.store_every = 300;
  const auto b = simulate_paths(c.spec, c.gains, cfg);
  ASSERT_EQ(b.nodes(), 5u);  // 0, 300, 600, 900, 1000
  EXPECT_EQ(b.times().front(), 0.0);
  EXPECT_EQ(b.times()[3], c.gains.grid.node(900));
  EXPECT_EQ(b.times().back(), 1.0);
  EXPECT_EQ(b.seed(), 42u);
  for (std::size_t p = 0; p < b.paths(); ++p) {
    for (std::size_t k = 0; k < b.nodes(); ++k) {
      EXPECT_TRUE(b.state(p, k).allFinite());
      EXPECT_LE((b.control(p, k) - c.gains.gain[std::min<std::size_t>(k * 300, 1000)] * b.state(p, k)).norm(), 1e-15);
    }
  }
}

TEST(Simulate, RejectsEmptyConfigurations) {
  const auto& c = oscillator();
  SimConfig cfg;
  cfg.paths = 0;
  EXPECT_THROW((void)simulate_paths(c.spec, c.gains, cfg), Error);
  cfg.paths = 1;
  cfg.store_every = 0;
  EXPECT_THROW((void)simulate_paths(c.spec, c.gains, cfg), Error);
}

TEST(Simulate, UnstableDynamicsReportIntegrationFailure) {
  const GainSchedule zero_gain = uncontrolled(testing::scalar_model(), 100);
  ModelSpec spec = testing::scalar_model();
  spec.a = MatrixFunction::constant(mat({{1e6}}));
  SimConfig cfg;
  cfg.paths = 2;
  try {
    // Each Euler step multiplies x by about 1e4 and overflows long before t = 1.
    (void)simulate_paths(spec, zero_gain, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::IntegrationFailure);
  }
}

TEST(EmpiricalMoments, IdenticalZeroPaths) {
  const TrajectoryBatch b({0.0, 1.0}, 3, 2, 1, 0);
  const auto mom = empirical_moments(b, 1);
  EXPECT_EQ(mom.mean.norm(), 0.0);
  EXPECT_EQ(mom.cov.norm(), 0.0);
  const auto e = empirical_energy(b);
  EXPECT_EQ(e.mean, 0.0);
  EXPECT_EQ(e.std_error, 0.0);
}

TEST(EmpiricalMoments, UnbiasedDivisor) {
  TrajectoryBatch b({0.0}, 2, 1, 1, 0);
  b.state(0, 0)(0) = 1.0;
  b.state(1, 0)(0) = -1.0;
  const auto mom = empirical_moments(b, 0);
  EXPECT_EQ(mom.mean(0), 0.0);
  EXPECT_EQ(mom.cov(0, 0), 2.0);
}

TEST(EmpiricalMoments, SinglePathIsInsufficient) {
  const TrajectoryBatch b({0.0, 1.0}, 1, 2, 1, 0);
  try {
    (void)empirical_moments(b, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InsufficientPaths);
  }
  EXPECT_THROW((void)empirical_energy(b), Error);
}

TEST(EmpiricalMoments, StandardErrorFormula) {
  const Matrix se = covariance_std_error(mat({{0.0625}}), 10000);
  EXPECT_NEAR(se(0, 0), 0.0625 * std::sqrt(2.0 / 9999.0), 1e-16);
  EXPECT_NEAR(3.0 * se(0, 0), 0.00265, 1e-5);
  const Matrix se2 = covariance_std_error(mat({{1.0, 0.5}, {0.5, 2.0}}), 101);
  EXPECT_NEAR(se2(0, 1), std::sqrt(2.25 / 100.0), 1e-15);
}

class OscillatorBatch : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const auto& c = oscillator();
    SimConfig cfg;
    cfg.paths = 10000;
    cfg.store_every = 10;
    controlled_ = new TrajectoryBatch(simulate_paths(c.spec, c.gains, cfg));
    uncontrolled_ = new TrajectoryBatch(simulate_paths(c.spec, uncontrolled(c.spec, kDefaultSteps), cfg));
  }
  static void TearDownTestSuite() {
    delete controlled_;
    delete uncontrolled_;
  }
  static TrajectoryBatch* controlled_;
  static TrajectoryBatch* uncontrolled_;
};

TrajectoryBatch* OscillatorBatch::controlled_ = nullptr;
TrajectoryBatch* OscillatorBatch::uncontrolled_ = nullptr;

TEST_F(OscillatorBatch, InitialCovarianceIsHalfIdentity) {
  expect_cov_within(empirical_moments(*controlled_, 0).cov, 0.5 * Matrix::Identity(2, 2), 10000);
}

TEST_F(OscillatorBatch, UncontrolledTerminalCovarianceIsPrior) {
  const auto pm = compute_prior_moments(oscillator().spec, TimeGrid(1.0, kDefaultSteps));
  expect_cov_within(empirical_moments(*uncontrolled_, uncontrolled_->nodes() - 1).cov, pm.terminal_cov(), 10000);
}

TEST_F(OscillatorBatch, ControlledMomentumVarianceHitsTarget) {
  const Matrix cov = empirical_moments(*controlled_, controlled_->nodes() - 1).cov;
  EXPECT_LE(std::abs(cov(1, 1) - 0.0625), 3.0 * 0.0625 * std::sqrt(2.0 / 9999.0));
}

TEST_F(OscillatorBatch, TerminalCovarianceMatchesPropagation) {
  expect_cov_within(empirical_moments(*controlled_, controlled_->nodes() - 1).cov, oscillator().cov.sigma.back(),
                    10000);
}

TEST_F(OscillatorBatch, MeanStaysNearZero) {
  for (std::size_t k = 0; k < controlled_->nodes(); ++k) {
    const auto mom = empirical_moments(*controlled_, k);
    for (Eigen::Index i = 0; i < 2; ++i) {
      EXPECT_LE(std::abs(mom.mean(i)), 3.0 * std::sqrt(mom.cov(i, i) / 10000.0))
          << "t = " << controlled_->times()[k] << " component " << i;
    }
  }
}

TEST_F(OscillatorBatch, EnergyMatchesQuadrature) {
  const auto& c = oscillator();
  const auto e = empirical_energy(*controlled_);
  const double jdyn = expected_energy(c.gains, c.cov, c.sol).jdyn;
  EXPECT_LE(std::abs(e.mean - jdyn), 3.0 * e.std_error);
  EXPECT_EQ(empirical_energy(*uncontrolled_).mean, 0.0);
}

TEST(ConvergenceRate, TerminalCovarianceErrorScalesLikeInverseRootN) {
  const auto& c = oscillator();
  const Matrix& x = c.sol.x.mat();
  auto rms_error = [&](int paths) {
    double sum = 0.0;
    const int seeds = 10;
    for (int s = 0; s < seeds; ++s) {
      SimConfig cfg;
      cfg.paths = paths;
      cfg.seed = 1000 + static_cast<std::uint64_t>(s);
      cfg.store_every = kDefaultSteps;
      const auto b = simulate_paths(c.spec, c.gains, cfg);
      sum += (empirical_moments(b, b.nodes() - 1).cov - x).squaredNorm();
    }
    return std::sqrt(sum / seeds);
  };
  const double ratio = rms_error(1000) / rms_error(10000);
  EXPECT_GE(ratio, 1.5);
  EXPECT_LE(ratio, 6.0);
}

TEST(Tube, IdentityIsACircle) {
  const auto t = tube_section(Matrix::Identity(2, 2));
  EXPECT_NEAR(t.radii(0), 3.0, 1e-15);
  EXPECT_NEAR(t.radii(1), 3.0, 1e-15);
  EXPECT_LE((t.axes.transpose() * t.axes - Matrix::Identity(2, 2)).norm(), 1e-14);
}

TEST(Tube, DiagonalSemiAxes) {
  const auto t = tube_section(mat({{4.0, 0.0}, {0.0, 1.0}}));
  EXPECT_NEAR(t.radii(0), 3.0, 1e-14);
  EXPECT_NEAR(t.radii(1), 6.0, 1e-14);
  EXPECT_NEAR(std::abs(t.axes(1, 0)), 1.0, 1e-14);
  EXPECT_NEAR(std::abs(t.axes(0, 1)), 1.0, 1e-14);
}

TEST(Tube, OscillatorMomentumExtentAtTheEnd) {
  const auto tubes = tube_radii(oscillator().cov);
  ASSERT_EQ(tubes.size(), oscillator().cov.sigma.size());
  const TubeSection& end = tubes.back();
  // Extent of the ellipse along the momentum coordinate: 3 sqrt(Sigma_pp).
  double extent2 = 0.0;
  for (Eigen::Index k = 0; k < 2; ++k) extent2 += std::pow(end.radii(k) * end.axes(1, k), 2);
  EXPECT_NEAR(std::sqrt(extent2), 0.75, 1e-5);
}

TEST(Tube, RejectsIndefinite) {
  try {
    (void)tube_section(mat({{1.0, 0.0}, {0.0, -1.0}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotPositiveDefinite);
  }
}

}  // namespace
}  // namespace covsteer
