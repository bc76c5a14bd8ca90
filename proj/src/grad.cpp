#include "sasim/grad.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sasim {

GradientEstimate GradientEstimate::from_samples(
    const std::vector<Eigen::MatrixXd>& samples, long truncations) {
  if (samples.empty()) {
    throw std::invalid_argument("GradientEstimate: no samples");
  }
  const long n = static_cast<long>(samples.size());
  GradientEstimate est;
  est.n_samples = n;
  est.truncations = truncations;
  est.value = Eigen::MatrixXd::Zero(samples[0].rows(), samples[0].cols());
  for (const auto& s : samples) est.value += s;
  est.value /= static_cast<double>(n);
  est.variance = Eigen::MatrixXd::Zero(samples[0].rows(), samples[0].cols());
  if (n > 1) {
    for (const auto& s : samples) {
      est.variance += (s - est.value).cwiseProduct(s - est.value);
    }
    est.variance /= static_cast<double>(n - 1);
  }
  est.half_width = 1.96 * (est.variance / static_cast<double>(n)).cwiseSqrt();
  return est;
}

StepSchedule StepSchedule::constant(double eps, double delta) {
  if (eps <= 0 || delta <= 0) {
    throw std::invalid_argument("StepSchedule: eps and delta must be positive");
  }
  StepSchedule s;
  s.kind = Kind::Constant;
  s.eps = eps;
  s.delta = delta;
  return s;
}

StepSchedule StepSchedule::decreasing(double eps, double s, double zeta,
                                      double delta, double gamma_exp) {
  if (eps <= 0 || delta <= 0 || s < 0) {
    throw std::invalid_argument("StepSchedule: bad base constants");
  }
  if (!(zeta > 0.5 && zeta <= 1.0)) {
    throw std::invalid_argument("StepSchedule: zeta must lie in (0.5, 1]");
  }
  if (!(gamma_exp > 0.0 && gamma_exp <= 1.0)) {
    throw std::invalid_argument("StepSchedule: gamma_exp must lie in (0, 1]");
  }
  if (!(2.0 * zeta - 2.0 * gamma_exp > 1.0)) {
    throw std::invalid_argument(
        "StepSchedule: need 2 zeta - 2 gamma_exp > 1 (sum eps_n^2/Delta_n^2 "
        "diverges otherwise)");
  }
  StepSchedule sch;
  sch.kind = Kind::Decreasing;
  sch.eps = eps;
  sch.s = s;
  sch.zeta = zeta;
  sch.delta = delta;
  sch.gamma_exp = gamma_exp;
  return sch;
}

double StepSchedule::eps_at(long n) const {
  if (kind == Kind::Constant) return eps;
  return eps / std::pow(static_cast<double>(n + 1) + s, zeta);
}

double StepSchedule::delta_at(long n) const {
  if (kind == Kind::Constant) return delta;
  return delta / std::pow(static_cast<double>(n + 1), gamma_exp);
}

Eigen::VectorXd kw_gradient(const CostOracle& oracle,
                            const Eigen::VectorXd& theta, double delta_n,
                            RngStream& rng) {
  if (delta_n <= 0) throw std::invalid_argument("kw_gradient: delta_n <= 0");
  const int p = static_cast<int>(theta.size());
  Eigen::VectorXd grad(p);
  for (int i = 0; i < p; ++i) {
    Eigen::VectorXd up = theta, down = theta;
    up(i) += delta_n;
    down(i) -= delta_n;
    RngStream r_up = rng.substream(2 * i);
    RngStream r_down = rng.substream(2 * i + 1);
    double c_up, c_down;
    try {
      c_up = oracle(up, r_up);
      c_down = oracle(down, r_down);
    } catch (const std::exception& e) {
      throw std::runtime_error("kw_gradient: oracle failed at component " +
                               std::to_string(i) + ": " + e.what());
    }
    grad(i) = (c_up - c_down) / (2.0 * delta_n);
  }
  return grad;
}

Eigen::VectorXd spsa_gradient(const CostOracle& oracle,
                              const Eigen::VectorXd& theta, double delta_n,
                              RngStream& rng) {
  if (delta_n <= 0) throw std::invalid_argument("spsa_gradient: delta_n <= 0");
  const int p = static_cast<int>(theta.size());
  Eigen::VectorXd d(p);
  for (int i = 0; i < p; ++i) d(i) = rng.uniform() < 0.5 ? -1.0 : 1.0;
  RngStream r_up = rng.substream("spsa-up");
  RngStream r_down = rng.substream("spsa-down");
  double c_up, c_down;
  try {
    c_up = oracle(theta + delta_n * d, r_up);
    c_down = oracle(theta - delta_n * d, r_down);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("spsa_gradient: oracle failed: ") +
                             e.what());
  }
  return (c_up - c_down) / (2.0 * delta_n) * d;
}

std::vector<Eigen::VectorXd> sgd_drive(const CostOracle& oracle,
                                       FdEstimator estimator,
                                       const StepSchedule& schedule,
                                       const Eigen::VectorXd& theta0,
                                       long n_iter, RngStream& rng,
                                       const ExternalGradient* external) {
  if (estimator == FdEstimator::External && external == nullptr) {
    throw std::invalid_argument("sgd_drive: external estimator not supplied");
  }
  std::vector<Eigen::VectorXd> traj;
  traj.reserve(n_iter + 1);
  traj.push_back(theta0);
  Eigen::VectorXd theta = theta0;
  for (long n = 0; n < n_iter; ++n) {
    RngStream step_rng = rng.substream(static_cast<std::uint64_t>(n));
    Eigen::VectorXd g;
    switch (estimator) {
      case FdEstimator::KieferWolfowitz:
        g = kw_gradient(oracle, theta, schedule.delta_at(n), step_rng);
        break;
      case FdEstimator::Spsa:
        g = spsa_gradient(oracle, theta, schedule.delta_at(n), step_rng);
        break;
      case FdEstimator::External:
        g = (*external)(theta, n, step_rng);
        break;
    }
    theta -= schedule.eps_at(n) * g;
    if (!theta.allFinite()) {
      throw std::runtime_error("sgd_drive: non-finite iterate at iteration " +
                               std::to_string(n));
    }
    traj.push_back(theta);
  }
  return traj;
}

double score_estimate_for_path(const StochasticMatrix& P,
                               const Eigen::MatrixXd& dP,
                               const Eigen::VectorXd& c,
                               const std::vector<int>& path) {
  const int N = static_cast<int>(path.size()) - 1;
  if (N < 1) throw std::invalid_argument("score_estimate_for_path: need N >= 1");
  double S = 0.0;
  double acc = 0.0;
  for (int k = 1; k <= N; ++k) {
    const int a = path[k - 1], b = path[k];
    const double p = P(a, b);
    const double d = dP(a, b);
    if (p <= 0.0) {
      if (d != 0.0) {
        throw std::runtime_error("score undefined at step " + std::to_string(k) +
                                 ", transition (" + std::to_string(a) + "," +
                                 std::to_string(b) + ")");
      }
      // d == 0 on a never-taken transition contributes nothing.
    } else {
      S += d / p;
    }
    acc += c(b) * S;
  }
  return acc / N;
}

GradientEstimate score_gradient_chain(const StochasticMatrix& P,
                                      const Eigen::MatrixXd& dP,
                                      const Eigen::VectorXd& c, const Pmf& pi0,
                                      int N, int batches, RngStream& rng) {
  if (dP.rows() != P.dim() || dP.cols() != P.dim()) {
    throw std::invalid_argument("score_gradient_chain: dP dimension mismatch");
  }
  for (Eigen::Index i = 0; i < dP.rows(); ++i) {
    if (std::abs(dP.row(i).sum()) > 1e-10) {
      throw std::invalid_argument("score_gradient_chain: dP row " +
                                  std::to_string(i) + " does not sum to zero");
    }
  }
  std::vector<Eigen::MatrixXd> samples;
  samples.reserve(batches);
  for (int b = 0; b < batches; ++b) {
    RngStream r = rng.substream(static_cast<std::uint64_t>(b));
    Trajectory traj = simulate_chain(P, pi0, N + 1, r);
    Eigen::MatrixXd v(1, 1);
    v(0, 0) = score_estimate_for_path(P, dP, c, traj.states);
    samples.push_back(v);
  }
  return GradientEstimate::from_samples(samples);
}

WeakDerivativeTriplet hahn_jordan_decompose(const Eigen::MatrixXd& dP) {
  if (dP.rows() != dP.cols()) {
    throw std::invalid_argument("hahn_jordan_decompose: matrix must be square");
  }
  const int X = static_cast<int>(dP.rows());
  Eigen::VectorXd g(X);
  Eigen::MatrixXd pos = Eigen::MatrixXd::Zero(X, X);
  Eigen::MatrixXd neg = Eigen::MatrixXd::Zero(X, X);
  for (int i = 0; i < X; ++i) {
    if (std::abs(dP.row(i).sum()) > 1e-12) {
      throw std::invalid_argument("hahn_jordan_decompose: row " +
                                  std::to_string(i) + " sums to " +
                                  std::to_string(dP.row(i).sum()));
    }
    const double gi = dP.row(i).cwiseMax(0.0).sum();
    g(i) = gi;
    if (gi == 0.0) {
      pos(i, i) = 1.0;  // e_i convention; with g_i = 0 it contributes nothing
      neg(i, i) = 1.0;
    } else {
      for (int j = 0; j < X; ++j) {
        if (dP(i, j) > 0.0) pos(i, j) = dP(i, j) / gi;
        if (dP(i, j) < 0.0) neg(i, j) = -dP(i, j) / gi;
      }
    }
  }
  return WeakDerivativeTriplet{std::move(g), StochasticMatrix(std::move(pos)),
                               StochasticMatrix(std::move(neg))};
}

GradientEstimate weak_derivative_gradient_chain(
    const StochasticMatrix& P, const WeakDerivativeTriplet& triplet,
    const Eigen::VectorXd& c, const Pmf& pi0, int m, int N, int replications,
    RngStream& rng) {
  if (m < 1 || m >= N) {
    throw std::invalid_argument("weak_derivative_gradient_chain: need 1 <= m < N");
  }
  const int X = P.dim();
  if (triplet.p_dot.dim() != X || triplet.p_ddot.dim() != X ||
      triplet.g.size() != X) {
    throw std::invalid_argument(
        "weak_derivative_gradient_chain: triplet dimension mismatch");
  }
  long truncations = 0;
  std::vector<Eigen::MatrixXd> samples;
  samples.reserve(replications);
  Eigen::VectorXd row(X);
  for (int rep = 0; rep < replications; ++rep) {
    RngStream r = rng.substream(static_cast<std::uint64_t>(rep));
    Trajectory nominal = simulate_chain(P, pi0, m, r);
    const int branch_state = nominal.states.back();
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(1, 1);
    const double g = triplet.g(branch_state);
    if (g != 0.0) {
      // Both branch draws share one fresh uniform (not the nominal stream).
      // Hahn-Jordan rows have disjoint supports, so each branch still has
      // its own marginal law, and identical p_dot/p_ddot rows branch to the
      // same state, making the estimate exactly zero in that case.
      const double u_branch = r.uniform();
      int x_dot = inverse_cdf_step(triplet.p_dot, branch_state, u_branch);
      int x_ddot = inverse_cdf_step(triplet.p_ddot, branch_state, u_branch);
      double diff = c(x_dot) - c(x_ddot);
      bool coupled = (x_dot == x_ddot);
      for (int k = m + 1; k <= N && !coupled; ++k) {
        const double u = r.uniform();
        x_dot = inverse_cdf_step(P, x_dot, u);
        x_ddot = inverse_cdf_step(P, x_ddot, u);
        diff += c(x_dot) - c(x_ddot);
        coupled = (x_dot == x_ddot);
      }
      if (!coupled) ++truncations;
      v(0, 0) = g * diff;
    }
    samples.push_back(v);
  }
  return GradientEstimate::from_samples(samples, truncations);
}

BiasVarianceReport bias_variance_harness(const ScalarEstimator& estimator,
                                         double truth, long batches,
                                         RngStream& rng) {
  if (batches < 2) {
    throw std::invalid_argument("bias_variance_harness: need batches >= 2");
  }
  double sum = 0.0, sumsq = 0.0;
  for (long b = 0; b < batches; ++b) {
    RngStream r = rng.substream(static_cast<std::uint64_t>(b));
    const double v = estimator(r);
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / batches;
  BiasVarianceReport rep;
  rep.batches = batches;
  rep.bias = mean - truth;
  rep.variance = (sumsq - batches * mean * mean) / (batches - 1);
  rep.mse = rep.bias * rep.bias + rep.variance;
  return rep;
}

}  // namespace sasim
