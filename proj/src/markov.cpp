#include "sasim/markov.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sasim {

namespace {
constexpr double kSumTol = 1e-12;
constexpr double kRenormTol = 1e-9;
constexpr double kEntryTol = 1e-12;
constexpr double kPositiveTol = 1e-14;

void check_entries(const Eigen::MatrixXd& m, const char* what) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      if (!std::isfinite(v) || v < -kEntryTol || v > 1.0 + kEntryTol) {
        throw std::invalid_argument(std::string(what) + ": entry (" +
                                    std::to_string(i) + "," +
                                    std::to_string(j) + ") = " +
                                    std::to_string(v) + " outside [0,1]");
      }
    }
  }
}
}  // namespace

Pmf::Pmf(Eigen::VectorXd w) : w_(std::move(w)) {
  if (w_.size() == 0) throw std::invalid_argument("Pmf: empty");
  check_entries(w_.transpose(), "Pmf");
  w_ = w_.cwiseMax(0.0);
  const double s = w_.sum();
  if (std::abs(s - 1.0) > kRenormTol) {
    throw std::invalid_argument("Pmf: weights sum to " + std::to_string(s));
  }
  if (std::abs(s - 1.0) > kSumTol) w_ /= s;
}

Pmf Pmf::unit(int dim, int index) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(dim);
  w(index) = 1.0;
  return Pmf(std::move(w));
}

Pmf Pmf::uniform(int dim) {
  return Pmf(Eigen::VectorXd::Constant(dim, 1.0 / dim));
}

StochasticMatrix::StochasticMatrix(Eigen::MatrixXd p) : p_(std::move(p)) {
  if (p_.rows() == 0 || p_.rows() != p_.cols()) {
    throw std::invalid_argument("StochasticMatrix: must be square");
  }
  check_entries(p_, "StochasticMatrix");
  p_ = p_.cwiseMax(0.0);
  for (Eigen::Index i = 0; i < p_.rows(); ++i) {
    const double s = p_.row(i).sum();
    if (std::abs(s - 1.0) > kRenormTol) {
      throw std::invalid_argument("StochasticMatrix: row " + std::to_string(i) +
                                  " sums to " + std::to_string(s));
    }
    if (std::abs(s - 1.0) > kSumTol) p_.row(i) /= s;
  }
}

StochasticMatrix StochasticMatrix::identity(int dim) {
  return StochasticMatrix(Eigen::MatrixXd::Identity(dim, dim));
}

bool StochasticMatrix::is_regular() const {
  Eigen::MatrixXd power = p_;
  for (int k = 1; k < dim(); ++k) power *= p_;
  return (power.array() > kPositiveTol).all();
}

double SimulationBounds::concentration(double eps) const {
  if (degenerate) return 0.0;
  const double x =
      eps * eps * (1.0 - dobrushin) * (1.0 - dobrushin) * n / (spread * spread);
  return 2.0 * std::exp(-x);
}

Trajectory simulate_chain(const StochasticMatrix& P, const Pmf& pi0, int n,
                          RngStream& rng) {
  if (P.dim() != pi0.dim()) {
    throw std::invalid_argument("simulate_chain: dimension mismatch");
  }
  if (n < 1) throw std::invalid_argument("simulate_chain: n must be >= 1");
  Trajectory traj;
  traj.states.reserve(n);
  int x = rng.categorical(
      std::span<const double>(pi0.vec().data(), pi0.dim()));
  traj.states.push_back(x);
  // Eigen stores column-major; copy the current row into a buffer per step.
  Eigen::VectorXd row(P.dim());
  for (int k = 1; k < n; ++k) {
    row = P.mat().row(x).transpose();
    x = rng.categorical(std::span<const double>(row.data(), row.size()));
    traj.states.push_back(x);
  }
  return traj;
}

Pmf stationary_distribution(const StochasticMatrix& P) {
  if (!P.is_regular()) {
    throw std::runtime_error("stationary_distribution: matrix is not regular");
  }
  const int X = P.dim();
  // pi' P = pi'  <=>  (P' - I) pi = 0; replace the last balance equation with
  // sum pi = 1.
  Eigen::MatrixXd A = P.mat().transpose() - Eigen::MatrixXd::Identity(X, X);
  A.row(X - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(X);
  b(X - 1) = 1.0;
  Eigen::VectorXd pi = A.partialPivLu().solve(b);
  if (!pi.allFinite() || (pi.array() <= 0.0).any()) {
    throw std::runtime_error(
        "stationary_distribution: singular or nonpositive solution (not "
        "regular)");
  }
  const double residual = ((P.mat().transpose() * pi) - pi).cwiseAbs().maxCoeff();
  if (residual > 1e-9) {
    throw std::runtime_error("stationary_distribution: solve residual " +
                             std::to_string(residual));
  }
  return Pmf(pi);
}

double dobrushin_coefficient(const StochasticMatrix& P) {
  const int X = P.dim();
  double worst = 0.0;
  for (int i = 0; i < X; ++i) {
    for (int j = i + 1; j < X; ++j) {
      const double d = (P.mat().row(i) - P.mat().row(j)).cwiseAbs().sum();
      worst = std::max(worst, d);
    }
  }
  return 0.5 * worst;
}

double variational_distance(const Pmf& p, const Pmf& q) {
  if (p.dim() != q.dim()) {
    throw std::invalid_argument("variational_distance: dimension mismatch");
  }
  return 0.5 * (p.vec() - q.vec()).cwiseAbs().sum();
}

SimulationBounds howlong_bounds(const StochasticMatrix& P,
                                const Eigen::VectorXd& h, const Pmf& pi0,
                                int n) {
  if (h.size() != P.dim() || pi0.dim() != P.dim()) {
    throw std::invalid_argument("howlong_bounds: dimension mismatch");
  }
  if (n < 1) throw std::invalid_argument("howlong_bounds: n must be >= 1");
  const double rho = dobrushin_coefficient(P);
  if (rho >= 1.0) {
    throw std::runtime_error(
        "howlong_bounds: Dobrushin coefficient is 1, bounds undefined");
  }
  const Pmf pi_inf = stationary_distribution(P);

  SimulationBounds out;
  out.dobrushin = rho;
  out.n = n;
  out.h = h;
  out.spread = h.maxCoeff() - h.minCoeff();
  if (out.spread == 0.0) {
    out.degenerate = true;
    return out;
  }
  out.bias_bound =
      out.spread / (n * (1.0 - rho)) * variational_distance(pi0, pi_inf);
  double sum = 0.0;
  for (int i = 0; i < P.dim(); ++i) {
    const double dv = variational_distance(Pmf::unit(P.dim(), i), pi_inf);
    sum += dv * dv * pi_inf(i);
  }
  out.msd_bound = 2.0 * out.spread * out.spread / (n * (1.0 - rho)) * sum;
  return out;
}

Eigen::MatrixXd fundamental_matrix(const StochasticMatrix& P) {
  const int X = P.dim();
  const Pmf pi = stationary_distribution(P);  // throws if not regular
  const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(X, X) - P.mat() +
                            Eigen::VectorXd::Ones(X) * pi.vec().transpose();
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  Eigen::MatrixXd Z = lu.solve(Eigen::MatrixXd::Identity(X, X));
  if (!Z.allFinite()) {
    throw std::runtime_error("fundamental_matrix: singular system (not regular)");
  }
  return Z;
}

double empirical_average(const Trajectory& traj, const Eigen::VectorXd& h) {
  if (traj.states.empty()) {
    throw std::invalid_argument("empirical_average: empty trajectory");
  }
  double s = 0.0;
  for (int x : traj.states) s += h(x);
  return s / traj.length();
}

int inverse_cdf_step(const StochasticMatrix& P, int x, double u) {
  const Eigen::VectorXd row = P.mat().row(x).transpose();
  return inverse_cdf_index({row.data(), static_cast<size_t>(row.size())}, u);
}

}  // namespace sasim
