#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "sasim/rng.hpp"

namespace sasim {

/// Probability vector over a finite set. Entries in [0,1], sum 1 within
/// 1e-12 at construction (sums off by less than 1e-9 are renormalized).
class Pmf {
 public:
  explicit Pmf(Eigen::VectorXd w);
  static Pmf unit(int dim, int index);
  static Pmf uniform(int dim);

  int dim() const { return static_cast<int>(w_.size()); }
  double operator()(int i) const { return w_(i); }
  const Eigen::VectorXd& vec() const { return w_; }

 private:
  Eigen::VectorXd w_;
};

/// Row-stochastic dense matrix; the transition kernel of a finite chain.
/// Rows must sum to 1 within 1e-12; rows off by less than 1e-9 are
/// renormalized, anything worse is rejected.
class StochasticMatrix {
 public:
  explicit StochasticMatrix(Eigen::MatrixXd p);
  static StochasticMatrix identity(int dim);

  int dim() const { return static_cast<int>(p_.rows()); }
  double operator()(int i, int j) const { return p_(i, j); }
  const Eigen::MatrixXd& mat() const { return p_; }
  Eigen::VectorXd row(int i) const { return p_.row(i).transpose(); }

  /// Primitivity check used as the "regular" precondition: every entry of
  /// P^dim exceeds 1e-14.
  bool is_regular() const;

 private:
  Eigen::MatrixXd p_;
};

/// Sample path of a finite chain; states are 0-based indices.
struct Trajectory {
  std::vector<int> states;
  int length() const { return static_cast<int>(states.size()); }
};

/// Finite-sample accuracy bounds for the time average (1/n) sum h(x_k)
/// over an n-point path: a bias bound, a mean-square-deviation bound (the
/// O(1/n^2) remainder is dropped), and a two-sided concentration bound as
/// a function of the deviation epsilon. `degenerate` marks a constant
/// payoff vector, for which all bounds collapse to zero.
struct SimulationBounds {
  double bias_bound = 0.0;
  double msd_bound = 0.0;
  double spread = 0.0;  // max_{i,j} |h_i - h_j|
  double dobrushin = 0.0;
  int n = 0;
  Eigen::VectorXd h;
  bool degenerate = false;

  /// P(|phi_n - E phi_n| > eps) bound: 2 exp(-eps^2 (1-rho)^2 n / spread^2).
  /// Always in (0, 2]; returns 0 for a degenerate (constant) payoff.
  double concentration(double eps) const;
};

/// Simulate an n-point path: x_0 ~ pi0 and x_{k+1} from row x_k of P, one
/// uniform per step via inverse-CDF sampling (the coupling-friendly
/// convention documented on RngStream::categorical).
Trajectory simulate_chain(const StochasticMatrix& P, const Pmf& pi0, int n,
                          RngStream& rng);

/// Unique stationary pmf of a regular chain, from the direct linear system
/// with one balance equation replaced by normalization. Throws if P is not
/// regular.
Pmf stationary_distribution(const StochasticMatrix& P);

/// (1/2) max over row pairs of the L1 distance between rows; in [0,1].
double dobrushin_coefficient(const StochasticMatrix& P);

/// (1/2) sum |p_i - q_i|; in [0,1].
double variational_distance(const Pmf& p, const Pmf& q);

/// Bias / MSD / concentration bounds for the n-point time average of h.
/// Requires a regular P with Dobrushin coefficient < 1.
SimulationBounds howlong_bounds(const StochasticMatrix& P,
                                const Eigen::VectorXd& h, const Pmf& pi0,
                                int n);

/// Z = (I - P + 1 pi')^{-1}. For any row-sum-zero D and any cost vector c,
/// pi' D Z c equals pi' D sum_k P^k c, which is how exact gradients of
/// stationary costs are evaluated.
Eigen::MatrixXd fundamental_matrix(const StochasticMatrix& P);

/// (1/n) sum_k h(x_k) over the trajectory.
double empirical_average(const Trajectory& traj, const Eigen::VectorXd& h);

/// One transition of P from state x driven by an externally supplied
/// uniform (inverse-CDF on row x). Two chains stepped with the same uniform
/// couple and stay merged once their states agree.
int inverse_cdf_step(const StochasticMatrix& P, int x, double u);

}  // namespace sasim
