#include "covsteer/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "covsteer/error.hpp"

namespace covsteer {
namespace {

void require(bool ok, ErrorKind kind, const std::string& msg) {
  if (!ok) throw Error(kind, msg);
}

std::string shape(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

bool finite_all(const std::vector<Matrix>& ms) {
  return std::all_of(ms.begin(), ms.end(), [](const Matrix& m) { return m.allFinite(); });
}

}  // namespace

MatrixFunction MatrixFunction::constant(Matrix value) {
  MatrixFunction f;
  f.values_.push_back(std::move(value));
  return f;
}

MatrixFunction MatrixFunction::sampled(std::vector<double> times, std::vector<Matrix> values) {
  require(times.size() == values.size() && times.size() >= 2, ErrorKind::DimensionMismatch,
          "sampled matrix function needs at least two (t, value) pairs");
  for (std::size_t i = 1; i < values.size(); ++i) {
    require(values[i].rows() == values[0].rows() && values[i].cols() == values[0].cols(),
            ErrorKind::DimensionMismatch, "sampled matrices must share one shape");
  }
  const double h = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
  require(h > 0.0, ErrorKind::ParseError, "sample times must be increasing");
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double expected = times.front() + h * static_cast<double>(i);
    require(std::abs(times[i] - expected) <= 1e-9 * (1.0 + std::abs(times.back())), ErrorKind::ParseError,
            "sample times must be uniformly spaced");
  }
  MatrixFunction f;
  f.times_ = std::move(times);
  f.values_ = std::move(values);
  return f;
}

Matrix MatrixFunction::at(double t) const {
  if (times_.empty()) return values_.front();
  if (t <= times_.front()) return values_.front();
  if (t >= times_.back()) return values_.back();
  const double h = (times_.back() - times_.front()) / static_cast<double>(times_.size() - 1);
  const double pos = (t - times_.front()) / h;
  auto k = static_cast<std::size_t>(std::floor(pos));
  k = std::min(k, times_.size() - 2);
  const double w = pos - static_cast<double>(k);
  return (1.0 - w) * values_[k] + w * values_[k + 1];
}

const SpdMatrix& ModelSpec::target_sigma() const {
  return std::visit([](const auto& t) -> const SpdMatrix& { return t.sigma; }, target);
}

void ModelSpec::validate() const {
  require(n() > 0, ErrorKind::DimensionMismatch, "A must be non-empty");
  require(a.rows() == a.cols(), ErrorKind::DimensionMismatch, "A must be square, got " + shape(a.at(0.0)));
  require(b.rows() == n() && m() > 0, ErrorKind::DimensionMismatch, "B must have n rows, got " + shape(b.at(0.0)));
  require(horizon > 0.0 && std::isfinite(horizon), ErrorKind::DimensionMismatch, "horizon must be positive");
  require(sigma0.dim() == n(), ErrorKind::DimensionMismatch, "Sigma0 must be n x n");
  for (const auto* f : {&a, &b}) {
    if (!f->is_constant()) {
      require(f->times().front() <= 0.0 && f->times().back() >= horizon, ErrorKind::DimensionMismatch,
              "time-varying samples must cover [0, T]");
    }
  }
  if (output_target()) {
    require(c.cols() == n() && p() > 0 && p() <= n(), ErrorKind::DimensionMismatch,
            "C must be p x n with p <= n, got " + shape(c));
    require(target_sigma().dim() == p(), ErrorKind::DimensionMismatch, "output target must be p x p");
    Eigen::JacobiSVD<Matrix> svd(c);
    const auto sv = svd.singularValues();
    require(sv(sv.size() - 1) > 1e-12 * std::max(1.0, sv(0)), ErrorKind::RankDeficient,
            "C does not have full row rank");
  } else {
    require(target_sigma().dim() == n(), ErrorKind::DimensionMismatch, "state target must be n x n");
  }
}

ModelSpec make_ou_example() {
  ModelSpec spec;
  Matrix a(2, 2);
  a << 0.0, 1.0,
      -1.0, -1.0;
  Matrix b(2, 1);
  b << 0.0, 1.0;
  Matrix c(1, 2);
  c << 0.0, 1.0;
  spec.a = MatrixFunction::constant(a);
  spec.b = MatrixFunction::constant(b);
  spec.c = c;
  spec.horizon = 1.0;
  spec.sigma0 = SpdMatrix(0.5 * Matrix::Identity(2, 2));
  spec.target = OutputTarget{SpdMatrix(Matrix::Constant(1, 1, 1.0 / 16.0))};
  return spec;
}

TimeGrid::TimeGrid(double horizon, int steps) : horizon_(horizon), steps_(steps) {
  require(steps >= 2, ErrorKind::DimensionMismatch, "grid needs at least 2 steps");
  require(horizon > 0.0, ErrorKind::DimensionMismatch, "grid horizon must be positive");
}

Matrix PriorMoments::terminal_cov() const {
  const auto n = sigma0.dim();
  return joint.bottomRightCorner(n, n);
}

PriorMoments compute_prior_moments(const ModelSpec& spec, const TimeGrid& grid) {
  spec.validate();
  const auto n = spec.n();
  const std::size_t nodes = grid.size();
  const double h = grid.spacing();
  const Matrix id = Matrix::Identity(n, n);

  PriorMoments out;
  out.grid = grid;
  out.sigma0 = spec.sigma0;
  out.phi_from0.resize(nodes);
  out.gram_from0.resize(nodes);
  out.phi_to_end.resize(nodes);
  out.gram_to_end.resize(nodes);

  // Forward: dPhi/dt = A Phi, dM/dt = A M + M A' + B B'.
  auto fwd = [&](double t, const Matrix& phi, const Matrix& gram, Matrix& dphi, Matrix& dgram) {
    const Matrix a = spec.a.at(t);
    const Matrix b = spec.b.at(t);
    dphi = a * phi;
    dgram = a * gram + gram * a.transpose() + b * b.transpose();
  };
  out.phi_from0[0] = id;
  out.gram_from0[0] = Matrix::Zero(n, n);
  Matrix k1p, k1g, k2p, k2g, k3p, k3g, k4p, k4g;
  for (std::size_t k = 0; k + 1 < nodes; ++k) {
    const double t = grid.node(k);
    const Matrix& p0 = out.phi_from0[k];
    const Matrix& g0 = out.gram_from0[k];
    fwd(t, p0, g0, k1p, k1g);
    fwd(t + 0.5 * h, p0 + 0.5 * h * k1p, g0 + 0.5 * h * k1g, k2p, k2g);
    fwd(t + 0.5 * h, p0 + 0.5 * h * k2p, g0 + 0.5 * h * k2g, k3p, k3g);
    fwd(t + h, p0 + h * k3p, g0 + h * k3g, k4p, k4g);
    out.phi_from0[k + 1] = p0 + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
    out.gram_from0[k + 1] = symmetrize(g0 + (h / 6.0) * (k1g + 2.0 * k2g + 2.0 * k3g + k4g));
  }

  // Backward from T: d/dt Phi(T,t) = -Phi(T,t) A(t), d/dt M_{t,T} = -G G' with G = Phi(T,t) B(t).
  auto bwd = [&](double t, const Matrix& psi, Matrix& dpsi, Matrix& dgram) {
    const Matrix g = psi * spec.b.at(t);
    dpsi = -psi * spec.a.at(t);
    dgram = -g * g.transpose();
  };
  out.phi_to_end[nodes - 1] = id;
  out.gram_to_end[nodes - 1] = Matrix::Zero(n, n);
  for (std::size_t k = nodes - 1; k > 0; --k) {
    const double t = grid.node(k);
    const Matrix& p0 = out.phi_to_end[k];
    const Matrix& g0 = out.gram_to_end[k];
    bwd(t, p0, k1p, k1g);
    bwd(t - 0.5 * h, p0 - 0.5 * h * k1p, k2p, k2g);
    bwd(t - 0.5 * h, p0 - 0.5 * h * k2p, k3p, k3g);
    bwd(t - h, p0 - h * k3p, k4p, k4g);
    out.phi_to_end[k - 1] = p0 - (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
    out.gram_to_end[k - 1] = symmetrize(g0 - (h / 6.0) * (k1g + 2.0 * k2g + 2.0 * k3g + k4g));
  }

  if (!finite_all(out.phi_from0) || !finite_all(out.gram_from0) || !finite_all(out.phi_to_end) ||
      !finite_all(out.gram_to_end)) {
    throw Error(ErrorKind::IntegrationFailure, "transition matrix or Gramian integration produced non-finite values");
  }

  const Matrix& phi = out.phi();
  const Matrix& gram = out.gramian();
  const Matrix& s0 = spec.sigma0.mat();
  out.joint.resize(2 * n, 2 * n);
  out.joint.topLeftCorner(n, n) = s0;
  out.joint.topRightCorner(n, n) = s0 * phi.transpose();
  out.joint.bottomLeftCorner(n, n) = phi * s0;
  out.joint.bottomRightCorner(n, n) = symmetrize(phi * s0 * phi.transpose() + gram);
  out.joint = symmetrize(out.joint);

  // Schur-complement form of S^{-1}.
  if (controllability_ratio(out) > kCtrlTol) {
    Eigen::LDLT<Matrix> gram_f(gram);
    const Matrix gram_inv = symmetrize(gram_f.solve(id));
    out.p_blk = gram_inv;
    out.v_blk = -phi.transpose() * gram_inv;
    out.n_blk = symmetrize(spd_inverse(spec.sigma0).mat() + phi.transpose() * gram_inv * phi);
  } else {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.p_blk = out.v_blk = out.n_blk = Matrix::Constant(n, n, nan);
  }
  return out;
}

double controllability_ratio(const PriorMoments& moments) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(moments.gramian(), Eigen::EigenvaluesOnly);
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(hi > 0.0)) return 0.0;
  return eig.eigenvalues().minCoeff() / hi;
}

void assert_controllable(const PriorMoments& moments) {
  const double ratio = controllability_ratio(moments);
  if (!(ratio > kCtrlTol)) {
    std::ostringstream os;
    os << "Gramian M_{0,T} eigenvalue ratio " << ratio << " <= " << kCtrlTol;
    throw Error(ErrorKind::NotControllable, os.str());
  }
}

}  // namespace covsteer
