#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "sasim/markov.hpp"
#include "sasim/rng.hpp"

namespace sasim {

/// Aggregated per-component gradient estimate: sample mean, unbiased sample
/// variance, and the 95% confidence half-width 1.96 sqrt(variance / n).
struct GradientEstimate {
  Eigen::MatrixXd value;
  Eigen::MatrixXd variance;
  Eigen::MatrixXd half_width;
  long n_samples = 0;
  long truncations = 0;  // coupling windows cut off at the horizon

  static GradientEstimate from_samples(
      const std::vector<Eigen::MatrixXd>& samples, long truncations = 0);
};

/// Step-size schedule for stochastic gradient loops. Decreasing schedules
/// use eps_n = eps / (n+1+s)^zeta and Delta_n = Delta / (n+1)^gamma. The
/// admissibility rule 2 zeta - 2 gamma > 1 (which makes sum eps_n = inf and
/// sum eps_n^2 / Delta_n^2 < inf) is enforced at construction.
struct StepSchedule {
  enum class Kind { Constant, Decreasing };
  Kind kind = Kind::Constant;
  double eps = 0.01;
  double s = 0.0;
  double zeta = 1.0;        // in (0.5, 1]
  double delta = 0.1;
  double gamma_exp = 0.16;  // in (0, 0.5) effectively, forced by the rule above

  static StepSchedule constant(double eps, double delta);
  static StepSchedule decreasing(double eps, double s, double zeta,
                                 double delta, double gamma_exp);

  double eps_at(long n) const;
  double delta_at(long n) const;
};

/// Noisy scalar cost sample at a parameter point.
using CostOracle =
    std::function<double(const Eigen::VectorXd& theta, RngStream& rng)>;

/// Two-sided finite differences along every coordinate: component i is
/// [C(theta + d e_i) - C(theta - d e_i)] / (2d). Exactly 2p oracle calls,
/// each on its own sub-stream.
Eigen::VectorXd kw_gradient(const CostOracle& oracle,
                            const Eigen::VectorXd& theta, double delta_n,
                            RngStream& rng);

/// Single random +/-1 direction d: [C(theta + d·dn) - C(theta - d·dn)] /
/// (2 dn) · d. Exactly 2 oracle calls.
Eigen::VectorXd spsa_gradient(const CostOracle& oracle,
                              const Eigen::VectorXd& theta, double delta_n,
                              RngStream& rng);

enum class FdEstimator { KieferWolfowitz, Spsa, External };

using ExternalGradient = std::function<Eigen::VectorXd(
    const Eigen::VectorXd& theta, long n, RngStream& rng)>;

/// theta_{n+1} = theta_n - eps_n g_n. Returns the full iterate trajectory
/// (theta_0 first). Aborts with the iteration index if an iterate goes
/// non-finite.
std::vector<Eigen::VectorXd> sgd_drive(const CostOracle& oracle,
                                       FdEstimator estimator,
                                       const StepSchedule& schedule,
                                       const Eigen::VectorXd& theta0,
                                       long n_iter, RngStream& rng,
                                       const ExternalGradient* external = nullptr);

// ---------------------------------------------------------------------------
// Score function estimator for a chain with scalar parameter direction dP
// ---------------------------------------------------------------------------

/// Deterministic value of the score-function estimate on a given path:
/// S_k = dP(x_{k-1},x_k)/P(x_{k-1},x_k) + S_{k-1}, estimate =
/// (1/N) sum_{k=1..N} c(x_k) S_k. The path has N+1 states. Used directly by
/// exhaustive-enumeration tests.
double score_estimate_for_path(const StochasticMatrix& P,
                               const Eigen::MatrixXd& dP,
                               const Eigen::VectorXd& c,
                               const std::vector<int>& path);

/// Simulates `batches` independent (N+1)-state paths and aggregates the
/// per-path score estimates. Throws if the score is undefined (P zero where
/// dP is not) at a visited transition.
GradientEstimate score_gradient_chain(const StochasticMatrix& P,
                                      const Eigen::MatrixXd& dP,
                                      const Eigen::VectorXd& c, const Pmf& pi0,
                                      int N, int batches, RngStream& rng);

// ---------------------------------------------------------------------------
// Weak derivative estimator for a chain
// ---------------------------------------------------------------------------

/// Row-wise Hahn-Jordan split of a row-sum-zero matrix dP:
/// dP(i,.) = g_i (p_dot(i,.) - p_ddot(i,.)) with disjoint row supports.
/// Rows with g_i = 0 use the e_i convention on both parts.
struct WeakDerivativeTriplet {
  Eigen::VectorXd g;
  StochasticMatrix p_dot;
  StochasticMatrix p_ddot;
};

WeakDerivativeTriplet hahn_jordan_decompose(const Eigen::MatrixXd& dP);

/// One branch per replication: run the nominal chain m steps, split into a
/// p_dot chain and a p_ddot chain (two fresh uniforms), then propagate both
/// with P on shared uniforms until they couple (capped at horizon N).
/// Replication value: g(x_{m-1}) * sum over the coupling window of
/// c(x_dot) - c(x_ddot).
GradientEstimate weak_derivative_gradient_chain(
    const StochasticMatrix& P, const WeakDerivativeTriplet& triplet,
    const Eigen::VectorXd& c, const Pmf& pi0, int m, int N, int replications,
    RngStream& rng);

// ---------------------------------------------------------------------------
// Bias / variance measurement harness
// ---------------------------------------------------------------------------

struct BiasVarianceReport {
  double bias = 0.0;
  double variance = 0.0;
  double mse = 0.0;  // bias^2 + variance
  long batches = 0;
};

using ScalarEstimator = std::function<double(RngStream& rng)>;

BiasVarianceReport bias_variance_harness(const ScalarEstimator& estimator,
                                         double truth, long batches,
                                         RngStream& rng);

}  // namespace sasim
