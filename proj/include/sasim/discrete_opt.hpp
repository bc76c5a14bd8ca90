#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "sasim/rng.hpp"

namespace sasim {

/// Noisy sample of the objective at a candidate index.
using NoisyObjective = std::function<double(int candidate, RngStream& rng)>;

/// Boltzmann draw from b_i proportional to exp(-phi_i / gamma), computed
/// with min-subtraction so large beliefs never underflow.
int boltzmann_sample(const Eigen::VectorXd& phi, double gamma, RngStream& rng);

/// Sampling probabilities behind boltzmann_sample (exposed because the
/// adaptive-search update divides by the probability of the drawn index).
Eigen::VectorXd boltzmann_probabilities(const Eigen::VectorXd& phi,
                                        double gamma);

struct AsStepResult {
  int sampled = 0;
  double cost = 0.0;
};

/// One smooth best-response adaptive-search step: draw theta_n from the
/// Boltzmann rule, observe c_n(theta_n), and move the belief vector by
/// mu_step toward the importance-weighted observation
/// f_i = c_n / b_i * 1{theta_n = i}.
AsStepResult as_step(Eigen::VectorXd& phi, double gamma, double mu_step,
                     const NoisyObjective& objective, RngStream& rng);

struct RsState {
  int current = 0;
  Eigen::VectorXd occupation;  // simplex-valued

  static RsState init(int S, int start);
  int estimate() const;  // argmax occupation, lowest index on ties
};

/// One random-search step: propose uniformly among the other candidates,
/// move only on a strict sample improvement, then fold e_{theta_n} into the
/// occupation probabilities with weight mu_step.
void rs_step(RsState& state, const NoisyObjective& objective, double mu_step,
             RngStream& rng);

struct UcbState {
  Eigen::VectorXd c_hat;    // discounted means
  Eigen::VectorXd m;        // discounted counts
  double M_total = 0.0;
  double mu_disc = 1.0;     // discount in (0,1]
  double xi = 2.0;          // exploration constant
  double B_bound = 1.0;     // payoff upper bound
  long n = 0;               // pulls since initialization

  /// Pull every arm once to seed the statistics.
  static UcbState init(int S, double mu_disc, double xi, double B_bound,
                       const NoisyObjective& payoff, RngStream& rng);
  int estimate() const;  // argmax discounted mean
};

/// One UCB step (maximization): pull the argmax of
/// c_hat + B sqrt(xi log(M+1)/m), then refresh the discounted statistics
/// incrementally. Returns the pulled arm.
int ucb_step(UcbState& state, const NoisyObjective& payoff, RngStream& rng);

/// Draw from Poisson(lambda) by CDF inversion.
int poisson_sample(double lambda, RngStream& rng);

enum class SearchAlgo { AdaptiveSearch, RandomSearch, Ucb };

struct BenchmarkOptions {
  long n_steps = 10000;
  int n_runs = 100;
  // Adaptive search: either the constant-step base algorithm or the
  // decreasing-schedule variant mu(n) = 1/n, gamma(n) = n^{-0.2}.
  bool as_decreasing = true;
  double as_mu = 0.1;
  double as_gamma = 0.1;
  double rs_mu = 0.05;
  double ucb_mu_disc = 1.0;
  double ucb_xi = 2.0;
  std::vector<long> checkpoints = {10, 50, 100, 500, 1000, 5000, 10000};
};

struct BenchmarkRow {
  long checkpoint = 0;
  double pct_converged = 0.0;  // % of runs whose estimate is in G
};

/// Poisson degree-mode benchmark: candidate theta in {0..S} is scored by
/// the indicator that a fresh Poisson(lambda) draw equals theta (counts
/// above S answer "no"). AS and RS minimize the negated indicator; UCB
/// maximizes the indicator. The target set G is {floor(lambda)}, plus
/// lambda - 1 when lambda is an integer.
std::vector<BenchmarkRow> poisson_mode_benchmark(double lambda, int S,
                                                 SearchAlgo algo,
                                                 const BenchmarkOptions& opts,
                                                 RngStream& rng);

std::vector<int> poisson_mode_target_set(double lambda);

}  // namespace sasim
